"""Command-line front end: ``sdesym <command> [options]``.

Exit codes: 0 pass, 2 mathematical failure, 1 usage or I/O error.
Structured results go to stdout as JSON (sorted keys); with ``--out DIR``
they are also written to ``DIR/<command>.json``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .exprcore import ParseError, SampleDomain, parse, to_string
from .model import (
    DimensionError,
    ItoSDE,
    ModelFormatError,
    StratSDE,
    fokker_planck_coeffs,
    ito_to_stratonovich,
    load_model,
    model_to_dict,
    stratonovich_to_ito,
)

EXIT_PASS, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage, which would collide with "mathematical failure"
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---- output -------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, float):
        if math.isfinite(obj):
            return obj
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, (np.floating, np.integer)):
        return _clean(obj.item())
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _emit(args, command: str, payload: dict):
    payload = dict(payload)
    payload["config"] = _config(args)
    text = dumps(payload)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{command}.json").write_text(text, encoding="utf-8")


def _config(args) -> dict:
    d = {k: v for k, v in vars(args).items() if k != "func"}
    d["version"] = __version__
    return d


# ---- inputs -------------------------------------------------------------


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def _sample_box(text):
    if text is None:
        return None
    p = Path(text)
    d = _read_json(p) if p.suffix == ".json" or p.is_file() else json.loads(text)
    return SampleDomain.from_dict(d)


def load_cli_model(spec: str | None, args=None):
    """A model file path, or ``catalog:NAME[:VARIANT][@ALT]`` for a catalog model."""
    if not spec:
        raise UsageError("--model is required")
    if spec.startswith("catalog:"):
        from .catalog import load_entry

        body = spec[len("catalog:"):]
        body, _, alt = body.partition("@")
        name, _, variant = body.partition(":")
        entry = load_entry(name)
        sde = entry.alt_model(alt) if alt else entry.model(variant or _first_variant(entry))
    else:
        sde = load_model(spec)
    box = _sample_box(getattr(args, "sample_box", None)) if args is not None else None
    if box is not None:
        sde = dataclasses.replace(sde, sample_box=box)
    return sde


def _first_variant(entry):
    return entry.variants()[0]


def _floats(text: str, what: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _ito(sde) -> ItoSDE:
    return stratonovich_to_ito(sde) if isinstance(sde, StratSDE) else sde


# ---- commands -------------------------------------------------------------


def cmd_check_symmetry(args) -> int:
    from .symmetry import check_symmetry, load_field

    sde = load_cli_model(args.model, args)
    X = load_field(args.symmetry, sde)
    v = check_symmetry(sde, X, tol=args.tol)
    _emit(args, "check-symmetry", {"symmetry": X.as_dict(), "verdict": v.as_dict()})
    return EXIT_PASS if v.passed else EXIT_FAIL


def cmd_check_invariant(args) -> int:
    from .invariants import LevelSetSpec, check_invariant, conditional_invariance_check, load_invariant
    from .levelset import NewtonProjection

    sde = _ito(load_cli_model(args.model, args))
    cand = load_invariant(args.invariant, sde)
    full = check_invariant(sde, cand.J, tol=args.tol)
    if args.level:
        levels = [LevelSetSpec(cand.J, c, NewtonProjection(sde.sample_box)) for c in args.level]
    else:
        levels = [_in_model_box(ls, sde) for ls in cand.level_sets]
    per_level = [conditional_invariance_check(sde, ls, seed=args.seed) for ls in levels]
    if full.passed:
        status = "invariant"
    elif per_level and all(v.passed for v in per_level):
        status = "conditional"
    else:
        status = "not_invariant"
    payload = {
        "J": to_string(cand.J),
        "kind": "conditional" if status == "conditional" else cand.kind.value,
        "dependency": cand.kind.value,
        "status": status,
        "full": full.as_dict(),
        "levels": [v.as_dict() for v in per_level],
    }
    _emit(args, "check-invariant", payload)
    return EXIT_PASS if status != "not_invariant" else EXIT_FAIL


def _in_model_box(ls, sde):
    # Newton projection without an explicit box starts from the model's sample box
    from .levelset import LevelSetSpec, NewtonProjection

    if isinstance(ls.sampler, NewtonProjection) and ls.sampler.box == SampleDomain():
        return LevelSetSpec(ls.J, ls.c, dataclasses.replace(ls.sampler, box=sde.sample_box))
    return ls


def cmd_convert(args) -> int:
    sde = load_cli_model(args.model, args)
    if args.to == "strat":
        out = sde if isinstance(sde, StratSDE) else ito_to_stratonovich(sde)
    else:
        out = _ito(sde)
    _emit(args, "convert", {"model": model_to_dict(out)})
    return EXIT_PASS


def cmd_fokker_planck(args) -> int:
    sde = _ito(load_cli_model(args.model, args))
    fp = fokker_planck_coeffs(sde, check=True, tol=args.tol)
    _emit(args, "fokker-planck", {"coefficients": fp.as_dict()})
    return EXIT_PASS if fp.consistency.is_zero else EXIT_FAIL


def cmd_transform(args) -> int:
    from .reduction import change_variables, load_transform

    sde = _ito(load_cli_model(args.model, args))
    T = load_transform(args.transform, sde)
    err = T.round_trip_error()
    if not err <= max(args.tol, 1e-9):
        _emit(args, "transform", {"transform": T.as_dict(), "round_trip_error": err, "error": "inverse does not invert forward"})
        return EXIT_FAIL
    ts = change_variables(sde, T)
    payload = {"transform": T.as_dict(), "round_trip_error": err, "result": ts.as_dict(), "is_ito": ts.is_ito}
    if ts.is_ito:
        payload["model"] = model_to_dict(ts.to_sde())
    _emit(args, "transform", payload)
    return EXIT_PASS


def _grid(args):
    from .sim.wiener import uniform_grid

    N = int(round(args.T / args.h))
    if N < 1 or not math.isclose(N * args.h, args.T, rel_tol=1e-9):
        raise UsageError("--T must be a positive multiple of --h")
    return uniform_grid(args.T, N)


def cmd_simulate(args) -> int:
    from .sim import SimulationError, Trajectory, em_ensemble, monitor_invariant, sample_wiener, write_csv

    sde = _ito(load_cli_model(args.model, args))
    x0 = _floats(args.x0, "--x0")
    if len(x0) != sde.n:
        raise UsageError(f"--x0 needs {sde.n} values")
    grid = _grid(args)
    if args.paths > 1 and not args.out:
        raise UsageError("--paths > 1 needs --out for the CSV files")
    J = parse(args.monitor, (sde.n, sde.m), sde.constants) if args.monitor else None
    stats = []
    csvs = []
    names = list(sde.var_names) if sde.var_names else None
    for p in range(args.paths):
        path = sample_wiener(sde.m, grid, args.seed, p)
        try:
            states = em_ensemble(sde, x0, grid, path.increments[:, :, None])[:, :, 0]
        except SimulationError as exc:
            _emit(args, "simulate", {"error": str(exc), "path": p, "step": exc.step, "state": list(exc.state)})
            return EXIT_FAIL
        traj = Trajectory(states, path, model=sde.name)
        row = {"path": p, "final": states[-1].tolist()}
        if J is not None:
            row["monitor"] = monitor_invariant(sde, J, traj).as_dict()
        stats.append(row)
        csvs.append(write_csv(traj, names=names))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for p, text in enumerate(csvs):
            (out / f"trajectory_{p:04d}.csv").write_text(text, encoding="utf-8")
        finals = np.array([s["final"] for s in stats])
        payload = {
            "paths": stats,
            "mean_final": finals.mean(axis=0).tolist(),
            "generator": path.generator_id,
            "scheme": traj.scheme,
        }
        _emit(args, "simulate", payload)
    else:
        sys.stdout.write(csvs[0])
    return EXIT_PASS


def cmd_verify(args) -> int:
    from .catalog.exact import REGISTRY, exact_solution
    from .sim import verify_solution

    sde = _ito(load_cli_model(args.model, args))
    if args.exact not in REGISTRY:
        raise UsageError(f"unknown exact solution {args.exact!r}; choose from {', '.join(sorted(REGISTRY))}")
    x0 = _floats(args.x0, "--x0")
    h_list = [2.0 ** -k for k in range(args.kmin, args.kmax + 1)]
    rep = verify_solution(sde, exact_solution(args.exact, sde.constants), x0, h_list, P=args.P, seed=args.seed, T=args.T)
    lo, hi = _floats(args.slope_range, "--slope-range")
    exact_scheme = all(e <= 1e-12 for e in rep.max_error)
    ok = exact_scheme or lo <= rep.slope <= hi
    _emit(args, "verify", {"report": rep.as_dict(), "ratios": rep.ratios("rms_error"), "pass": ok, "exact_to_rounding": exact_scheme})
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_attract(args) -> int:
    from .sim import AttractivityConfig, attractivity_diagnostics

    sde = _ito(load_cli_model(args.model, args))
    lo, hi = _floats(args.lo, "--lo"), _floats(args.hi, "--hi")
    if len(lo) != sde.n or len(hi) != sde.n:
        raise UsageError(f"--lo and --hi need {sde.n} values")
    cfg = AttractivityConfig(tuple(lo), tuple(hi), args.T, args.h, args.P, args.seed, args.eps_strong, args.eps_weak)
    d = parse(args.distance, (sde.n, sde.m), sde.constants)
    rep = attractivity_diagnostics(sde, d, cfg)
    payload = {"report": rep.as_dict()}
    if args.expect:
        ok = rep.verdict.value == args.expect
        payload["expected"] = args.expect
    else:
        ok = rep.verdict.value != "NotAttractive"
    payload["pass"] = ok
    _emit(args, "attract", payload)
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_catalog(args) -> int:
    from .catalog import catalog_entries, load_entry
    from .catalog.runner import run_entry

    if args.action == "list":
        rows = [{"name": e.name, "title": e.title, "provenance": e.provenance, "variants": e.variants()} for e in catalog_entries()]
        _emit(args, "catalog", {"entries": rows})
        return EXIT_PASS
    entries = [load_entry(n) for n in args.entry] if args.entry else catalog_entries()
    summary, results = {}, []
    for e in entries:
        rs = run_entry(e, slow=not args.fast)
        results.extend(r.as_dict() for r in rs)
        summary[e.name] = {"checks": len(rs), "failed": sum(not r.passed for r in rs)}
    ok = all(s["failed"] == 0 for s in summary.values())
    payload = {"summary": summary, "pass": ok}
    if args.details:
        payload["results"] = results
    else:
        payload["failures"] = [r for r in results if not r["pass"]]
    _emit(args, "catalog", payload)
    return EXIT_PASS if ok else EXIT_FAIL


# ---- parser ---------------------------------------------------------------


GLOBAL_DEFAULTS = {"model": None, "seed": 0, "tol": 1e-9, "out": None, "sample_box": None}


def _global_flags(p):
    # suppressed defaults so flags given before or after the command both survive
    S = argparse.SUPPRESS
    p.add_argument("--model", default=S, help="model JSON file or catalog:NAME[:VARIANT][@ALT]")
    p.add_argument("--seed", type=int, default=S, help="RNG seed (default 0)")
    p.add_argument("--tol", type=float, default=S, help="absolute zero tolerance (default 1e-9)")
    p.add_argument("--out", default=S, help="directory for output files")
    p.add_argument("--sample-box", default=S, help="sample box as JSON text or a JSON file")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="sdesym", description="Symmetry and invariant analysis of Ito SDEs.")
    top.add_argument("--version", action="version", version=__version__)
    _global_flags(top)
    common = _Parser(add_help=False)
    _global_flags(common)
    sub = top.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("check-symmetry", cmd_check_symmetry, "evaluate the determining equations")
    p.add_argument("--symmetry", required=True, help="vector field JSON")
    p = add("check-invariant", cmd_check_invariant, "check invariance, optionally on level sets")
    p.add_argument("--invariant", required=True, help="invariant JSON")
    p.add_argument("--level", type=float, action="append", help="level value c (repeatable)")
    p = add("convert", cmd_convert, "Ito <-> Stratonovich conversion")
    p.add_argument("--to", choices=["ito", "strat"], required=True)
    add("fokker-planck", cmd_fokker_planck, "forward-equation coefficients")
    p = add("transform", cmd_transform, "change of variables")
    p.add_argument("--transform", required=True, help="transform JSON")

    p = add("simulate", cmd_simulate, "Euler-Maruyama trajectories as CSV")
    p.add_argument("--x0", required=True)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--monitor", help="expression to track along each path")

    p = add("verify", cmd_verify, "EM against an exact solution")
    p.add_argument("--exact", required=True, help="registered exact solution")
    p.add_argument("--x0", required=True)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--P", type=int, default=200)
    p.add_argument("--kmin", type=int, default=6, help="coarsest step 2^-kmin")
    p.add_argument("--kmax", type=int, default=10, help="finest step 2^-kmax")
    p.add_argument("--slope-range", default="0.35,0.65")

    p = add("attract", cmd_attract, "attractivity diagnostics")
    p.add_argument("--distance", required=True)
    p.add_argument("--lo", required=True)
    p.add_argument("--hi", required=True)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--P", type=int, default=256)
    p.add_argument("--eps-strong", type=float)
    p.add_argument("--eps-weak", type=float)
    p.add_argument("--expect", choices=["Strong", "Weak", "NotAttractive"])

    p = add("catalog", cmd_catalog, "list or run the catalog")
    p.add_argument("action", choices=["list", "run-all"])
    p.add_argument("--entry", action="append", help="restrict run-all to these entries")
    p.add_argument("--fast", action="store_true", help="skip simulations")
    p.add_argument("--details", action="store_true", help="include every check result")
    return top


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        for k, v in GLOBAL_DEFAULTS.items():
            if not hasattr(args, k):
                setattr(args, k, v)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ParseError, ModelFormatError, DimensionError, KeyError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
