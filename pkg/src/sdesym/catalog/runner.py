"""Re-derive every claim stored in a catalog entry."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from ..exprcore import ZERO, is_zero, simplify, to_string
from ..exprcore.expr import add, mul, sub
from ..invariants import check_invariant, conditional_invariance_check, phase_invariant_residuals
from ..levelset import LevelSetSpec, NewtonProjection, sampler_from_dict
from ..model import (
    fokker_planck_coeffs,
    ito_laplacian,
    ito_to_stratonovich,
    model_from_dict,
    model_to_dict,
    stratonovich_to_ito,
)
from ..reduction import change_variables, push_forward
from ..sim.attract import AttractivityConfig, attractivity_diagnostics
from ..sim.verify import linearize_at_point, verify_solution
from ..symmetry import (
    SimpleVectorField,
    check_symmetry,
    check_symmetry_on_level_set,
    classify,
    commutator,
    fields_equal,
    lie_module_combine,
)
from . import CatalogEntry, expected_for


@dataclass
class CheckResult:
    entry: str
    variant: str | None
    check: str
    subject: str
    expected: object
    observed: object
    passed: bool
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "entry": self.entry,
            "variant": self.variant,
            "check": self.check,
            "subject": self.subject,
            "expected": self.expected,
            "observed": self.observed,
            "pass": self.passed,
            "detail": self.detail,
        }


def _all_zero(exprs, sde, tol=1e-9, domain=None):
    rs = [is_zero(e, domain or sde.sample_box, tol, sde.constants, sde.n, sde.m) for e in exprs]
    return all(r.is_zero for r in rs), rs


def _diff_zero(got, want, sde, domain=None, tol=1e-9):
    ok, rs = _all_zero([sub(a, b) for a, b in zip(got, want)], sde, tol, domain)
    return ok and len(got) == len(want), [r.status.value for r in rs]


class _Run:
    def __init__(self, entry: CatalogEntry, variant, slow: bool):
        self.entry = entry
        self.variant = variant
        self.slow = slow
        self.results: list[CheckResult] = []

    def add(self, check, subject, expected, observed, passed, **detail):
        self.results.append(
            CheckResult(self.entry.name, self.variant, check, subject, expected, observed, bool(passed), detail)
        )

    def guard(self, check: str, subject: str, expected, fn: Callable):
        try:
            fn()
        except Exception as exc:  # a crashing check is a failed claim, not a crashed run
            self.add(check, subject, expected, f"error: {type(exc).__name__}: {exc}", False)


def _structural(run: _Run, sde):
    d = model_to_dict(sde)
    back = model_from_dict(d)
    same = back.drift == sde.drift and back.sigma == sde.sigma and dict(back.constants) == dict(sde.constants)
    run.add("schema", "model round trip", True, same, same)
    s = ito_to_stratonovich(sde)
    again = stratonovich_to_ito(s)
    ok, st = _diff_zero(list(again.f), list(sde.f), sde)
    run.add("ito_strat_round_trip", "drift", True, ok, ok, statuses=st)
    fp = fokker_planck_coeffs(sde, check=True)
    st = fp.consistency.status.value
    run.add("fokker_planck", "long vs short form", "zero", st, fp.consistency.is_zero)


def _linear_combination(e, sde, fields, coefs):
    acc = [ZERO] * sde.n
    Rt = [[Fraction(0)] * sde.m for _ in range(sde.m)]
    for name, coef in coefs.items():
        F = fields[name]
        c = e.parse(sde, str(coef))
        acc = [add(a_, mul(c, p)) for a_, p in zip(acc, F.phi)]
        if F.has_R:
            # Wiener parts only combine with numeric coefficients
            q = Fraction(str(coef))
            Rt = [[Rt[i][j] + q * F.R[i][j] for j in range(sde.m)] for i in range(sde.m)]
    return SimpleVectorField(tuple(simplify(a_) for a_ in acc), tuple(tuple(r) for r in Rt), sde.m)


def _symmetries(run: _Run, sde):
    e = run.entry
    fields = e.fields(sde)
    strat = ito_to_stratonovich(sde)
    for spec in e.symmetry_specs():
        X = fields[spec["name"]]
        exp_ = expected_for(spec.get("expect", "pass"), run.variant)
        v = check_symmetry(sde, X)
        obs = "pass" if v.passed else "fail"
        run.add("symmetry", spec["name"], exp_, obs, obs == exp_, verdict=v.as_dict())
        if spec.get("classification"):
            c = classify(X).value
            run.add("classification", spec["name"], spec["classification"], c, c == spec["classification"])
        if not X.has_R:
            vs = check_symmetry(strat, X)
            run.add("ito_strat_symmetry", spec["name"], v.passed, vs.passed, vs.passed == v.passed)
        ls = spec.get("on_level_set")
        if ls:
            J = e.parse(sde, ls["J"])
            smp = sampler_from_dict(ls["sampler"]) if ls.get("sampler") else NewtonProjection(sde.sample_box)
            lv = check_symmetry_on_level_set(sde, X, LevelSetSpec(J, float(ls["c"]), smp))
            want = expected_for(ls.get("expect", "pass"), run.variant)
            got = "pass" if lv.passed else "fail"
            run.add("conditional_symmetry", f"{spec['name']} on {ls['J']}={ls['c']}", want, got, got == want,
                    verdict=lv.as_dict())
    for b in e.raw.get("brackets", []):
        X, Y = fields[b["a"]], fields[b["b"]]
        Z = commutator(X, Y)
        v = check_symmetry(sde, Z)
        obs = "pass" if v.passed else "fail"
        subj = f"[{b['a']},{b['b']}]"
        run.add("bracket", subj, b["expect"], obs, obs == b["expect"], verdict=v.as_dict(),
                phi=[to_string(p) for p in Z.phi])
        if "equals" in b:
            target = _linear_combination(e, sde, fields, b["equals"])
            ok = fields_equal(Z, target, sde.sample_box, sde.constants)
            run.add("commutation", subj, b["equals"], ok, ok)
        if "equals_phi" in b:
            want = [e.parse(sde, s) for s in b["equals_phi"]]
            ok, st = _diff_zero(list(Z.phi), want, sde)
            run.add("commutation", subj, b["equals_phi"], ok, ok, statuses=st)
    for mc in e.raw.get("module_combinations", []):
        inv = {s["name"]: e.parse(sde, s["J"]) for s in e.invariant_specs()}
        W = lie_module_combine(inv[mc["F"]], fields[mc["X"]], inv[mc["G"]], fields[mc["Y"]])
        v = check_symmetry(sde, W)
        obs = "pass" if v.passed else "fail"
        run.add("module_combination", f"{mc['F']}*{mc['X']} + {mc['G']}*{mc['Y']}", mc["expect"], obs,
                obs == mc["expect"])


def _invariants(run: _Run, sde):
    e = run.entry
    for spec in e.invariant_specs():
        cand = e.invariant(sde, spec)
        run.add("kind", spec["name"], spec.get("kind"), cand.kind.value, cand.kind.value == spec.get("kind"))
        v = check_invariant(sde, cand.J)
        want = spec.get("expect", "invariant")
        if v.passed:
            obs = "invariant"
        elif v.diffusion.is_zero:
            obs = "diffusion_only"
        else:
            obs = "not_invariant"
        ok = obs == want or (want == "not_invariant" and obs == "diffusion_only")
        run.add("invariant", spec["name"], want, obs, ok, verdict=v.as_dict())
        if "drift_residual" in spec:
            ok, st = _diff_zero([v.drift_residual], [e.parse(sde, spec["drift_residual"])], sde)
            run.add("residual", f"{spec['name']} drift", spec["drift_residual"], ok, ok, statuses=st)
        if "residuals" in spec:
            d, s = phase_invariant_residuals(sde, cand.J)
            want_exprs = [e.parse(sde, spec["residuals"]["drift"])] + [e.parse(sde, x) for x in spec["residuals"]["diffusion"]]
            ok, st = _diff_zero([d] + list(s), want_exprs, sde)
            run.add("residual", f"{spec['name']} dJ", "matches display", ok, ok, statuses=st)
        for ls_spec, ls in zip(spec.get("level_sets", []), cand.level_sets):
            cv = conditional_invariance_check(sde, ls)
            want = ls_spec["expect"]
            run.add("conditional", f"{spec['name']}={ls.c}", want, cv.status.value, cv.status.value == want,
                    verdict=cv.as_dict())
            if "factored" in ls_spec:
                run.add("factored", f"{spec['name']}={ls.c}", ls_spec["factored"], cv.factored,
                        cv.factored == ls_spec["factored"])
    for lap in e.raw.get("laplacians", []):
        J = e.parse(sde, next(s["J"] for s in e.invariant_specs() if s["name"] == lap["of"]))
        ok, st = _diff_zero([ito_laplacian(sde, J)], [e.parse(sde, lap["equals"])], sde)
        run.add("laplacian", lap["of"], lap["equals"], ok, ok, statuses=st)


def _transforms(run: _Run, sde):
    e = run.entry
    for spec in e.transform_specs():
        if spec.get("variant") and spec["variant"] != run.variant:
            continue
        T = e.transform(sde, spec)
        err = T.round_trip_error()
        run.add("round_trip", spec["name"], "<= 1e-9", err, err <= 1e-9)
        ts = change_variables(sde, T)
        box = T.y_box
        if "expect" in spec:
            ex = spec["expect"]
            want = [e.parse_y(sde, s) for s in ex["drift"]] + [e.parse_y(sde, s) for row in ex["diffusion"] for s in row]
            got = list(ts.drift) + [x for row in ts.diffusion for x in row]
            ok, st = _diff_zero(got, want, sde, box)
            run.add("transform", spec["name"], ex, ts.as_dict(), ok, statuses=st)
            run.add("is_ito", spec["name"], ex["is_ito"], ts.is_ito, ts.is_ito == ex["is_ito"])
        if "expect_model" in spec:
            alt = e.alt_model(spec["expect_model"])
            got = list(ts.drift) + [x for row in ts.diffusion for x in row]
            want = list(alt.f) + [x for row in alt.sigma for x in row]
            ok, st = _diff_zero(got, want, sde, box)
            run.add("transform", f"{spec['name']} -> {spec['expect_model']}", "alt model", ok, ok, statuses=st)
        if "straightens" in spec:
            X = e.fields(sde)[spec["straightens"]["symmetry"]]
            Y = push_forward(X, T)
            want = [e.parse_y(sde, s) for s in spec["straightens"]["phi"]]
            ok, st = _diff_zero(list(Y.phi), want, sde, box)
            run.add("straightening", spec["name"], spec["straightens"]["phi"], [to_string(p) for p in Y.phi], ok,
                    statuses=st)
        if "linearize_at" in spec:
            lin = linearize_at_point(ts.to_sde(), spec["linearize_at"])
            ex = spec["expect_linear"]
            want = [e.parse_y(sde, s) for s in ex["drift"]]
            want += [e.parse_y(sde, s) for row in ex["diffusion"] for s in row]
            got = list(lin.f) + [x for row in lin.sigma for x in row]
            ok, st = _diff_zero(got, want, sde, box)
            run.add("linearization", spec["name"], ex, ok, ok, statuses=st)
    for spec in e.raw.get("linearizations", []):
        lin = linearize_at_point(sde, spec["at"])
        ex = spec["expect"]
        want = [e.parse(sde, s) for s in ex["drift"]] + [e.parse(sde, s) for row in ex["diffusion"] for s in row]
        got = list(lin.f) + [x for row in lin.sigma for x in row]
        ok, st = _diff_zero(got, want, sde)
        run.add("linearization", f"at {spec['at']}", ex, ok, ok, statuses=st)
        for sspec in spec.get("symmetries", []):
            X = e.field(lin, sspec)
            v = check_symmetry(lin, X)
            obs = "pass" if v.passed else "fail"
            run.add("symmetry", f"linearized {sspec['name']}", sspec["expect"], obs, obs == sspec["expect"])


def _exact(run: _Run, sde):
    ex = run.entry.exact(sde)
    if ex is None:
        return
    sol, x0 = ex
    rep = verify_solution(sde, sol, x0, [2.0**-6, 2.0**-8], P=40, seed=0, T=1.0)
    e0, e1 = rep.max_error
    ok = e1 <= 1e-12 or e1 < e0
    run.add("exact_solution", run.entry.raw["exact"]["kind"], "error shrinks or vanishes", rep.max_error, ok)


def _attractivity(run: _Run, sde):
    e = run.entry
    for spec in e.raw.get("attractivity", []):
        over = spec.get("constants")
        base = e.alt_model(spec["model"], over) if spec.get("model") else e.model(run.variant, over)
        cfg = AttractivityConfig(tuple(spec["lo"]), tuple(spec["hi"]), spec["T"], spec["h"], spec.get("P", 256), 0)
        rep = attractivity_diagnostics(base, e.parse(base, spec["distance"]), cfg)
        label = ", ".join(f"{k}={v}" for k, v in (over or {}).items())
        run.add("attractivity", label or spec["distance"], spec["expect"], rep.verdict.value,
                rep.verdict.value == spec["expect"], report=rep.as_dict(), published_claim=spec.get("published_claim"))
    sw = e.raw.get("noise_sweep")
    if sw:
        meds = []
        for val in sw["values"]:
            base = e.model(run.variant, {sw["constant"]: val})
            cfg = AttractivityConfig(tuple(sw["lo"]), tuple(sw["hi"]), sw["T"], sw["h"], sw.get("P", 256), 0)
            meds.append(attractivity_diagnostics(base, e.parse(base, sw["distance"]), cfg).median)
        mono = all(meds[i + 1] <= meds[i] for i in range(len(meds) - 1))
        # "report" records the statistics without a verdict
        ok = True if sw["expect"] == "report" else mono
        run.add("noise_sweep", f"median vs {sw['constant']} {sw['values']}", sw["expect"], meds, ok,
                median_nonincreasing=mono, published_claim=sw.get("published_claim"))


def run_entry(entry: CatalogEntry, slow: bool = True) -> list:
    """All checks for every variant of ``entry``; slow=False skips simulations."""
    out = []
    for variant in entry.variants():
        run = _Run(entry, variant, slow)
        sde = entry.model(variant)
        steps = [("structural", _structural), ("symmetries", _symmetries), ("invariants", _invariants),
                 ("transforms", _transforms)]
        if slow:
            steps += [("exact", _exact), ("attractivity", _attractivity)]
        for name, fn in steps:
            run.guard(name, entry.name, "no error", lambda fn=fn: fn(run, sde))
        out.extend(run.results)
    return out


def run_all(entries, slow: bool = True) -> list:
    out = []
    for e in entries:
        out.extend(run_entry(e, slow))
    return out
