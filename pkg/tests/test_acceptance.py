"""Acceptance criteria 1-9.

Each test records its claims through the ``record`` fixture; the terminal
summary prints one PASS/FAIL line per criterion. Claims are asserted at the
stated tolerances; nothing here is relaxed to make a claim pass.
"""

import itertools
import json
import time
from fractions import Fraction

import numpy as np
import pytest

from sdesym.catalog import catalog_entries, expected_for, load_entry
from sdesym.catalog.exact import additive_t, gbm, logistic
from sdesym.cli import main
from sdesym.exprcore import ZeroStatus, evaluate, is_zero, parse
from sdesym.exprcore.evaluate import evaluate_vectorized
from sdesym.exprcore.expr import mul, num, sub
from sdesym.invariants import (
    ConditionalStatus,
    apply_symmetry_to_invariant,
    check_invariant,
    conditional_invariance_check,
    ring_combine,
)
from sdesym.model import fokker_planck_coeffs, ito_to_stratonovich, stratonovich_to_ito
from sdesym.reduction import change_variables
from sdesym.sim import (
    AttractivityConfig,
    Verdict,
    attractivity_diagnostics,
    em_ensemble,
    euler_maruyama,
    monitor_ensemble,
    sample_ensemble,
    sample_wiener,
    uniform_grid,
    verify_solution,
)
from sdesym.sim.wiener import coarsen_increments
from sdesym.symmetry import Classification, SimpleVectorField, check_symmetry, classify, commutator, fields_equal

TOL = 1e-9
H_LIST = [2.0**-k for k in range(6, 11)]
SYMMETRY_ENTRIES = ["gbm", "logistic", "additive_t", "ne3", "gl2dim", "iso2d"]


def _variants(e):
    return e.variants()


def _positive_fields(e, sde, variant=None):
    return [
        (s["name"], e.field(sde, s))
        for s in e.symmetry_specs()
        if expected_for(s.get("expect"), variant) == "pass"
    ]


def _reproducible_witness(sde, X, v, domain):
    """Re-running gives the same witness and some residual is nonzero there."""
    if v.witness is None:
        return False, 0.0
    again = check_symmetry(sde, X, domain, TOL)
    exprs = list(v.drift_residuals) + [e for row in v.diffusion_residuals for e in row]
    worst = max(abs(evaluate(e, v.witness, sde.constants)) for e in exprs)
    return again.witness == v.witness and worst > TOL, worst


# ---- 1 --------------------------------------------------------------------


def test_c1_determining_equations(record):
    t0 = time.perf_counter()
    worst, fails = 0.0, []
    for name in SYMMETRY_ENTRIES:
        e = load_entry(name)
        sde = e.model()
        dom = sde.sample_box.with_overrides(N=200)
        for fname, X in _positive_fields(e, sde):
            v = check_symmetry(sde, X, dom, TOL)
            statuses = {v.drift.status, v.diffusion.status}
            ok = v.passed and v.max_residual <= TOL and statuses <= {ZeroStatus.SYMBOLIC_ZERO, ZeroStatus.NUMERIC_ZERO}
            worst = max(worst, v.max_residual)
            if not ok:
                fails.append(f"{name}.{fname}")
    record(1, "positive fixtures zero over 200 samples", not fails, f"max residual {worst:.2e}; failing {fails}")

    e = load_entry("gbm")
    sde = e.model()
    dom = sde.sample_box.with_overrides(N=200)
    f = e.fields(sde)
    negatives = {
        "translation": f["translation"],
        "W bracket": commutator(f["W_R1_Q1"], f["W_R2_Qzeta"]),
    }
    for label, X in negatives.items():
        v = check_symmetry(sde, X, dom, TOL)
        rep, val = _reproducible_witness(sde, X, v, dom)
        ok = (not v.passed) and ZeroStatus.NONZERO in (v.drift.status, v.diffusion.status) and rep
        record(1, f"gbm {label} NonZero with witness", ok,
               f"witness {v.witness.as_dict() if v.witness else None}, |residual| {val:.3g}")
    elapsed = time.perf_counter() - t0
    record(1, "runtime <= 10 s", elapsed <= 10.0, f"{elapsed:.2f} s")
    assert not fails and elapsed <= 10.0


def test_c1_negative_fixtures(record):
    e = load_entry("gbm")
    sde = e.model()
    f = e.fields(sde)
    dom = sde.sample_box.with_overrides(N=200)
    for X in (f["translation"], commutator(f["W_R1_Q1"], f["W_R2_Qzeta"])):
        v = check_symmetry(sde, X, dom, TOL)
        assert not v.passed
        assert _reproducible_witness(sde, X, v, dom)[0]


# ---- 2 --------------------------------------------------------------------


def _scaled(X, c):
    c = Fraction(c)
    R = tuple(tuple(c * v for v in row) for row in X.R)
    return SimpleVectorField(tuple(mul(num(c), p) for p in X.phi), R, X.m)


def _zero_field(X):
    return SimpleVectorField(tuple(num(0) for _ in X.phi), None, X.m)


def test_c2_bracket_closure(record):
    fails, count = [], 0
    for e in catalog_entries():
        for variant in _variants(e):
            sde = e.model(variant)
            fields = [
                (n, X) for n, X in _positive_fields(e, sde, variant)
                if classify(X) in (Classification.DETERMINISTIC, Classification.RANDOM)
            ]
            for (a, X), (b, Y) in itertools.combinations(fields, 2):
                count += 1
                if not check_symmetry(sde, commutator(X, Y)).passed:
                    fails.append(f"{e.name}[{a},{b}]")
    record(2, "deterministic/random pairs close", not fails, f"{count} pairs; failing {fails}")
    assert count and not fails


def test_c2_gbm_w_bracket_counterexample(record):
    e = load_entry("gbm")
    sde = e.model()
    f = e.fields(sde)
    v = check_symmetry(sde, commutator(f["W_R1_Q1"], f["W_R2_Qzeta"]))
    record(2, "gbm W-symmetry bracket is not a symmetry", not v.passed, f"max residual {v.max_residual:.3g}")
    assert not v.passed


ISO_TABLE = [
    ("Y1", "X1", {"Y1": 1}),
    ("Y1", "X2", {"Y2": -1}),
    ("Y2", "X1", {"Y2": 1}),
    ("Y2", "X2", {"Y1": 1}),
    ("X1", "X2", {}),
    ("Y1", "Y2", {}),
]


def test_c2_iso2d_commutation_table(record):
    e = load_entry("iso2d")
    sde = e.model()
    f = e.fields(sde)
    bad = []
    for a, b, combo in ISO_TABLE:
        Z = commutator(f[a], f[b])
        if combo:
            ((k, c),) = combo.items()
            want = _scaled(f[k], c)
        else:
            want = _zero_field(Z)
        if not fields_equal(Z, want, sde.sample_box, sde.constants):
            bad.append(f"[{a},{b}]")
    record(2, "iso2d commutation table", not bad, f"{len(ISO_TABLE)} brackets; failing {bad}")
    assert not bad


# ---- 3 --------------------------------------------------------------------


def test_c3_misawa_invariants_symbolic(record):
    e = load_entry("misawa")
    sde = e.model()
    for spec in e.invariant_specs():
        v = check_invariant(sde, e.parse(sde, spec["J"]))
        ok = v.drift.status is ZeroStatus.SYMBOLIC_ZERO and v.diffusion.status is ZeroStatus.SYMBOLIC_ZERO
        record(3, f"misawa {spec['name']} symbolic invariant", ok, f"{v.drift.status.value}/{v.diffusion.status.value}")
        assert ok


def _invariants(e, sde, variant):
    return [
        (s["name"], e.parse(sde, s["J"]))
        for s in e.invariant_specs()
        if expected_for(s.get("expect"), variant) == "invariant"
    ]


def test_c3_ring_and_symmetry_closure(record):
    ring_bad, nring = [], 0
    sym = {False: [0, []], True: [0, []]}  # keyed by "X has a Wiener action"
    for e in catalog_entries():
        for variant in _variants(e):
            sde = e.model(variant)
            invs = _invariants(e, sde, variant)
            for (a, F), (b, G) in itertools.combinations_with_replacement(invs, 2):
                for res in ring_combine(F, G, 2.5, -1.25):
                    nring += 1
                    if not check_invariant(sde, res).passed:
                        ring_bad.append(f"{e.name}:{a},{b}")
            for (a, F), (xn, X) in itertools.product(invs, _positive_fields(e, sde, variant)):
                slot = sym[X.has_R]
                slot[0] += 1
                if not check_invariant(sde, apply_symmetry_to_invariant(X, F)).passed:
                    slot[1].append(f"{e.name}:{xn}({a})")
    record(3, "linear and product combinations of invariants", not ring_bad, f"{nring} checks; failing {ring_bad}")
    n0, bad0 = sym[False]
    record(3, "X(F) is an invariant, X deterministic/random", not bad0, f"{n0} checks; failing {bad0}")
    # for gbm, W_R1_Q1 applied to log(x) - (alpha - beta^2/2)t - beta*w gives
    # G with dG = -beta^2 dt, so this claim cannot hold
    n1, bad1 = sym[True]
    record(3, "X(F) is an invariant, X a W-symmetry", not bad1, f"{n1} checks; failing {bad1}")
    assert nring and n0 and n1
    assert not ring_bad and not bad0
    assert not bad1


def test_c3_iso2d_z1(record):
    e = load_entry("iso2d")
    sde = e.model()
    v = check_invariant(sde, e.parse(sde, "w1 - x1/mu"))
    ok = v.diffusion.is_zero and not v.drift.is_zero
    record(3, "iso2d z1 diffusion residuals vanish, drift does not", ok,
           f"diffusion {v.diffusion.status.value}, drift {v.drift.status.value}")
    assert ok


# ---- 4 --------------------------------------------------------------------


@pytest.mark.parametrize("name", ["cartesian_circle", "cartesian_family"])
def test_c4_conditional_levels(name, record):
    e = load_entry(name)
    for variant in _variants(e):
        sde = e.model(variant)
        cand = e.invariant(sde, e.invariant_specs()[0])
        got = {}
        for ls in cand.level_sets:
            got[ls.c] = conditional_invariance_check(sde, ls)
        label = f"{name}[{variant}]" if variant else name
        ok = got[1.0].status is ConditionalStatus.CONDITIONAL and got[0.25].status is ConditionalStatus.NOT_CONDITIONAL
        record(4, f"{label} c=1 Conditional, c=0.25 NotConditional", ok,
               f"c=1 max {got[1.0].max_residual:.2e}; c=0.25 witness residual {got[0.25].witness_residual}")
        assert ok
        if name == "cartesian_circle":
            record(4, "cartesian_circle residuals factor through (1 - J)", got[1.0].factored, str(got[1.0].factored))
            assert got[1.0].factored


def test_c4_polar_circle_stays_on_circle(record):
    sde = load_entry("polar_circle").model()
    grid = uniform_grid(10.0, 1000)
    worst = 0.0
    for seed in range(4):
        tr = euler_maruyama(sde, [1.0, 0.7 * seed], sample_wiener(2, grid, seed))
        worst = max(worst, float(np.max(np.abs(tr.states[:, 0] - 1.0))))
    record(4, "polar model from rho=1 stays exactly on rho=1", worst == 0.0, f"max |rho - 1| = {worst}")
    assert worst == 0.0


# ---- 5 --------------------------------------------------------------------


def test_c5_gbm_strong_order(record):
    t0 = time.perf_counter()
    sde = load_entry("gbm").model()
    rep = verify_solution(sde, gbm(sde.constants), [1.0], H_LIST, P=200, seed=0, T=1.0)
    elapsed = time.perf_counter() - t0
    ok = 0.35 <= rep.slope <= 0.65
    record(5, "gbm strong slope in [0.35, 0.65]", ok, f"slope {rep.slope:.3f}")
    record(5, "gbm runtime <= 60 s", elapsed <= 60.0, f"{elapsed:.2f} s")
    assert ok and elapsed <= 60.0


def test_c5_logistic_error_shrinks(record):
    sde = load_entry("logistic").model()
    rep = verify_solution(sde, logistic(sde.constants), [0.5], H_LIST, P=200, seed=0, T=1.0)
    r = rep.ratios("sup_error")
    ok = all(x >= 1.3 for x in r)
    raw = ", ".join(f"{x:.2f}" for x in rep.ratios("max_error"))
    record(5, "logistic pathwise sup error shrinks >= 1.3 per halving", ok,
           f"ratios {', '.join(f'{x:.2f}' for x in r)} (max over paths: {raw})")
    assert ok


def test_c5_additive_t_exact(record):
    sde = load_entry("additive_t").model()
    rep = verify_solution(sde, additive_t(sde.constants), [0.3], H_LIST, P=50, seed=0, T=1.0)
    worst = max(rep.max_error)
    record(5, "dx = t dw matches the discrete Ito sum", worst <= 1e-12, f"max error {worst:.2e}")
    assert worst <= 1e-12


# ---- 6 --------------------------------------------------------------------


def _misawa_runs(P=1000):
    e = load_entry("misawa")
    sde = e.model()
    J = e.parse(sde, "x1^2 + x2^2 + x3^2")
    H = e.parse(sde, "x1 + x2 + x3")
    hmin = min(H_LIST)
    fine = uniform_grid(1.0, int(round(1 / hmin)))
    dW = sample_ensemble(sde.m, fine, 0, P)
    out = []
    for h in H_LIST:
        f = int(round(h / hmin))
        grid, d = fine[::f], coarsen_increments(dW, f)
        st = em_ensemble(sde, [0.6, -0.2, 0.5], grid, d)
        wT = d.sum(axis=0)
        zero = np.zeros_like(wT)
        dj = []
        for G in (J, H):
            a = evaluate_vectorized(G, grid[0], st[0], zero, sde.constants)
            b = evaluate_vectorized(G, grid[-1], st[-1], wT, sde.constants)
            dj.append(np.abs(np.broadcast_to(b - a, (P,))))
        hmax = float(np.max(monitor_ensemble(sde, H, grid, st, d)))
        out.append((float(np.mean(dj[0])), float(np.mean(dj[1])), hmax))
    return out


def test_c6_misawa_pathwise(record):
    runs = _misawa_runs()
    J = [r[0] for r in runs]
    Hs = [r[1] for r in runs]
    Hmax = max(r[2] for r in runs)
    rJ = [J[i] / J[i + 1] for i in range(len(J) - 1)]
    okJ = all(x >= 1.3 for x in rJ)
    record(6, "|J(T) - J(0)| shrinks >= 1.3 per halving", okJ, f"ratios {', '.join(f'{x:.2f}' for x in rJ)}")
    # H is conserved exactly by the discrete update, so both endpoint and
    # whole-path drift stay at rounding level and no ratio is meaningful
    okH = max(Hs) <= 1e-12 and Hmax <= 1e-12
    record(6, "H drift <= 1e-12 at every h", okH, f"max endpoint {max(Hs):.2e}, max over path {Hmax:.2e}")
    assert okJ and okH


# ---- 7 --------------------------------------------------------------------

def _attract(sde, distance, P=256):
    cfg = AttractivityConfig((0.5, 0.0), (1.5, 2 * np.pi), T=10.0, h=0.01, P=P, seed=0)
    return attractivity_diagnostics(sde, parse(distance, (sde.n, sde.m)), cfg)


def test_c7_strong(record):
    sde = load_entry("strong_attractive").alt_model("polar", {"a": 1.0})
    rep = _attract(sde, "x1 - 1")
    ok = rep.verdict is Verdict.STRONG and rep.sup < 1e-3
    record(7, "asymptotic circle (a=1) Strong with sup < 1e-3", ok, f"{rep.verdict.value}, sup {rep.sup:.2e}")
    assert ok


def test_c7_weak(record):
    # the noise sigma*(1 - rho^2) vanishes on rho = 1 and the drift pulls
    # paths onto it, so the measured verdict is Strong
    sde = load_entry("polar_circle").model(overrides={"a": 1.0, "sigma": 0.1})
    rep = _attract(sde, "x1 - 1")
    ok = rep.verdict is Verdict.WEAK
    record(7, "polar circle (a=1, sigma=0.1) Weak", ok,
           f"{rep.verdict.value}, sup {rep.sup:.2e}, median {rep.median:.2e}, eps_strong {rep.eps_strong:.2e}")
    assert ok


def test_c7_repelling(record):
    sde = load_entry("polar_circle").model(overrides={"a": -1.0, "sigma": 0.1})
    rep = _attract(sde, "x1 - 1")
    ok = rep.verdict is Verdict.NOT_ATTRACTIVE
    record(7, "a=-1 NotAttractive", ok, f"{rep.verdict.value}, median {rep.median:.3g}")
    assert ok


def test_c7_median_monotone_in_noise(record):
    meds = []
    for s in (0.4, 0.2, 0.1, 0.05):
        sde = load_entry("polar_circle").model(overrides={"a": 1.0, "sigma": s})
        meds.append(_attract(sde, "x1 - 1").median)
    ok = all(meds[i + 1] <= meds[i] for i in range(len(meds) - 1))
    record(7, "median distance nonincreasing as sigma decreases 0.4 -> 0.05", ok,
           "medians " + ", ".join(f"{m:.2e}" for m in meds))
    assert ok


def test_c7_runtime(record):
    # times the whole criterion on its own so the result does not depend on test order
    t0 = time.perf_counter()
    _attract(load_entry("strong_attractive").alt_model("polar", {"a": 1.0}), "x1 - 1")
    _attract(load_entry("polar_circle").model(overrides={"a": -1.0, "sigma": 0.1}), "x1 - 1")
    for s in (0.4, 0.2, 0.1, 0.05):
        _attract(load_entry("polar_circle").model(overrides={"a": 1.0, "sigma": s}), "x1 - 1")
    total = time.perf_counter() - t0
    record(7, "runtime <= 60 s", total <= 60.0, f"{total:.2f} s over 6 ensembles")
    assert total <= 60.0


# ---- 8 --------------------------------------------------------------------


def _transform_matches(e, sde, spec, drift, diffusion, box=None):
    ts = change_variables(sde, e.transform(sde, spec))
    want = [e.parse_y(sde, s) for s in drift] + [e.parse_y(sde, s) for row in diffusion for s in row]
    got = list(ts.drift) + [x for row in ts.diffusion for x in row]
    box = box or e.transform(sde, spec).y_box
    ok = all(is_zero(sub(g, w), box, TOL, sde.constants, sde.n, sde.m).is_zero for g, w in zip(got, want))
    return ok, ts


def test_c8_gbm_log(record):
    e = load_entry("gbm")
    sde = e.model()
    ok, ts = _transform_matches(e, sde, e.transform_specs()[0], ["alpha - beta^2/2"], [["beta"]])
    record(8, "gbm log transform drift alpha - beta^2/2, diffusion beta, Ito", ok and ts.is_ito,
           f"is_ito {ts.is_ito}")
    assert ok and ts.is_ito


def test_c8_logistic(record):
    e = load_entry("logistic")
    sde = e.model()
    ok, ts = _transform_matches(e, sde, e.transform_specs()[0], ["-beta*exp(A*t + gamma*w1)"], [["0"]])
    record(8, "logistic transform has no dw term, drift -beta exp(At + gamma w), not Ito", ok and not ts.is_ito,
           f"is_ito {ts.is_ito}")
    assert ok and not ts.is_ito


def test_c8_gl2dim_triangular(record):
    e = load_entry("gl2dim")
    sde = e.model()
    ok, ts = _transform_matches(e, sde, e.transform_specs()[0], ["y1^2", "-y1"], [["1", "0"], ["y1", "1"]])
    record(8, "gl2dim adapted coordinates give the triangular system", ok and ts.is_ito, f"is_ito {ts.is_ito}")
    assert ok and ts.is_ito


# ---- 9 --------------------------------------------------------------------


def _all_models():
    for e in catalog_entries():
        for v in _variants(e):
            yield f"{e.name}[{v}]" if v else e.name, e.model(v)
        for key in e.raw.get("alt_models") or {}:
            yield f"{e.name}@{key}", e.alt_model(key)


def test_c9_round_trip_and_fp(record):
    rt_bad, fp_bad, count = [], [], 0
    for label, sde in _all_models():
        count += 1
        back = stratonovich_to_ito(ito_to_stratonovich(sde))
        same = all(
            is_zero(sub(a, b), sde.sample_box, TOL, sde.constants, sde.n, sde.m).status is ZeroStatus.SYMBOLIC_ZERO
            for a, b in zip(list(back.f) + [x for r in back.sigma for x in r], list(sde.f) + [x for r in sde.sigma for x in r])
        )
        if not same:
            rt_bad.append(label)
        fp = fokker_planck_coeffs(sde, check=True)
        if fp.consistency.status is not ZeroStatus.SYMBOLIC_ZERO:
            fp_bad.append(f"{label}:{fp.consistency.status.value}")
    record(9, "Ito <-> Stratonovich round trip is the identity", not rt_bad, f"{count} models; failing {rt_bad}")
    record(9, "Fokker-Planck long and short forms agree symbolically", not fp_bad, f"{count} models; failing {fp_bad}")
    assert not rt_bad and not fp_bad


GBM_DOC = {"n": 1, "m": 1, "constants": {"alpha": 1.0, "beta": 0.5}, "drift": ["alpha*x1"], "diffusion": [["beta*x1"]]}


@pytest.fixture
def cli_files(tmp_path):
    docs = {
        "gbm": GBM_DOC,
        "x0": {"phi": ["x1"]},
        "dx": {"phi": ["1"]},
        "r2": {"J": "x1^2 + x2^2"},
        "log": {"forward": ["log(x1)"], "inverse": ["exp(y1)"]},
    }
    out = {}
    for k, v in docs.items():
        p = tmp_path / f"{k}.json"
        p.write_text(json.dumps(v))
        out[k] = str(p)
    return out


CLI_MATRIX = [
    (["check-symmetry", "--model", "{gbm}", "--symmetry", "{x0}"], 0),
    (["check-symmetry", "--model", "{gbm}", "--symmetry", "{dx}"], 2),
    (["check-symmetry", "--model", "missing.json", "--symmetry", "{dx}"], 1),
    (["check-invariant", "--model", "catalog:cartesian_circle", "--invariant", "{r2}", "--level", "1"], 0),
    (["check-invariant", "--model", "catalog:cartesian_circle", "--invariant", "{r2}", "--level", "0.25"], 2),
    (["convert", "--model", "{gbm}", "--to", "strat"], 0),
    (["convert", "--model", "{gbm}"], 1),
    (["fokker-planck", "--model", "{gbm}"], 0),
    (["transform", "--model", "{gbm}", "--transform", "{log}"], 0),
    (["simulate", "--model", "{gbm}", "--x0", "1", "--T", "0.2", "--h", "0.01", "--seed", "5"], 0),
    (["simulate", "--model", "{gbm}", "--x0", "1,1"], 1),
    (["verify", "--model", "{gbm}", "--exact", "gbm", "--x0", "1", "--P", "40"], 0),
    (["attract", "--model", "catalog:polar_circle", "--distance", "x1 - 1", "--lo", "0.5,0", "--hi", "1.5,6.28",
      "--T", "1", "--P", "16", "--expect", "NotAttractive"], 2),
    (["catalog", "list"], 0),
    (["bogus"], 1),
]


def test_c9_cli_contract(cli_files, capsys, record):
    bad_code, bad_repro = [], []
    for argv, want in CLI_MATRIX:
        argv = [a.format(**cli_files) for a in argv]
        outs = []
        for _ in range(2):
            code = main(argv)
            cap = capsys.readouterr()
            outs.append((code, cap.out, cap.err))
        if outs[0][0] != want:
            bad_code.append(f"{argv[0]}: {outs[0][0]} != {want}")
        if outs[0] != outs[1]:
            bad_repro.append(argv[0])
    record(9, "CLI exit-code contract", not bad_code, f"{len(CLI_MATRIX)} invocations; mismatches {bad_code}")
    record(9, "CLI identical seed gives byte-identical output", not bad_repro, f"differing {bad_repro}")
    assert not bad_code and not bad_repro
