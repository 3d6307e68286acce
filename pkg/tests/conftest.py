import pytest

_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    # criterion -> list of (claim, passed, detail)
    config.stash[_KEY] = {}


@pytest.fixture
def record(request):
    """record(criterion, claim, passed, detail) for the acceptance summary."""
    store = request.config.stash[_KEY]

    def add(criterion, claim, passed, detail=""):
        store.setdefault(criterion, []).append((claim, bool(passed), detail))
        return bool(passed)

    return add


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_KEY, {})
    if not store:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c in sorted(store):
        rows = store[c]
        bad = [claim for claim, ok, _ in rows if not ok]
        tail = f" (failing: {'; '.join(bad)})" if bad else ""
        tr.write_line(f"criterion {c}: {'PASS' if not bad else 'FAIL'} [{len(rows) - len(bad)}/{len(rows)} claims]{tail}")
        for claim, ok, detail in rows:
            tr.write_line(f"    {'ok  ' if ok else 'FAIL'} {claim}: {detail}")
