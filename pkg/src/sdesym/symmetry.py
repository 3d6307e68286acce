"""Simple symmetry fields and their determining-equation residuals."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .exprcore import (
    ZERO,
    Expr,
    SampleDomain,
    ZeroResult,
    ZeroStatus,
    combine,
    depends_on,
    diff,
    is_zero,
    parse,
    simplify,
    to_string,
)
from .exprcore.evaluate import Binding
from .exprcore.expr import add, mul, num, sub, to_fraction
from .levelset import LevelSetSpec, evaluate_on_samples, sample_level_set
from .model import DimensionError, ItoSDE, StratSDE, ito_laplacian


class Classification(str, enum.Enum):
    DETERMINISTIC = "deterministic"
    RANDOM = "random"
    W = "W"


def _as_matrix(R, m: int):
    if R is None:
        return tuple(tuple(Fraction(0) for _ in range(m)) for _ in range(m))
    rows = tuple(tuple(to_fraction(v) for v in row) for row in R)
    if len(rows) != m or any(len(r) != m for r in rows):
        raise DimensionError(f"R must be {m}x{m}")
    return rows


def conformal_scale(R) -> Fraction | None:
    """The lambda with R + R^T = 2*lambda*I, or None if there is none."""
    m = len(R)
    if m == 0:
        return Fraction(0)
    lam = R[0][0]
    for i in range(m):
        if R[i][i] != lam:
            return None
        for j in range(m):
            if i != j and R[i][j] + R[j][i] != 0:
                return None
    return lam


@dataclass(frozen=True)
class SimpleVectorField:
    """X = phi^i(x, t, w) d/dx^i + (R w)^k d/dw^k, with no time component.

    ``R`` must lie in the conformal-linear algebra: R = lambda*I + S with S
    skew-symmetric. For n != m, R acts on the m Wiener coordinates.
    """

    phi: tuple
    R: tuple = None
    m: int = 0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(self.phi))
        m = self.m if self.R is None else len(self.R)
        object.__setattr__(self, "m", m)
        R = _as_matrix(self.R, m)
        object.__setattr__(self, "R", R)
        if conformal_scale(R) is None:
            raise ValueError("R is not of the form lambda*I + skew-symmetric")

    @property
    def n(self) -> int:
        return len(self.phi)

    @property
    def has_R(self) -> bool:
        return any(v != 0 for row in self.R for v in row)

    def w_action(self) -> list:
        """(R w)^k as expressions."""
        out = []
        for k in range(self.m):
            acc = ZERO
            for l in range(self.m):
                if self.R[k][l] != 0:
                    acc = add(acc, mul(num(self.R[k][l]), Expr("var", ("w", l + 1))))
            out.append(acc)
        return out

    def apply(self, F: Expr) -> Expr:
        """X(F) = phi^i dF/dx^i + (R w)^k dF/dw^k, simplified."""
        acc = ZERO
        for i, p in enumerate(self.phi):
            if p != ZERO:
                acc = add(acc, mul(p, diff(F, ("x", i + 1))))
        for k, rw in enumerate(self.w_action()):
            if rw != ZERO:
                acc = add(acc, mul(rw, diff(F, ("w", k + 1))))
        return simplify(acc)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "phi": [to_string(p) for p in self.phi],
            "R": [[_num_json(v) for v in row] for row in self.R],
        }


def _num_json(v: Fraction):
    return int(v) if v.denominator == 1 else float(v)


def classify(X: SimpleVectorField) -> Classification:
    if X.has_R:
        return Classification.W
    if any(depends_on(p, "w") for p in X.phi):
        return Classification.RANDOM
    return Classification.DETERMINISTIC


def _check(sde, X: SimpleVectorField):
    if sde.n != X.n or sde.m != X.m:
        raise DimensionError(f"field has context ({X.n}, {X.m}) but model has ({sde.n}, {sde.m})")


def _transport(drift: Sequence[Expr], X: SimpleVectorField, i: int) -> Expr:
    """d_t phi^i + f^j d_j phi^i - phi^j d_j f^i."""
    p = X.phi[i]
    acc = diff(p, ("t", 0))
    for j in range(X.n):
        acc = add(acc, mul(drift[j], diff(p, ("x", j + 1))))
        if X.phi[j] != ZERO:
            acc = sub(acc, mul(X.phi[j], diff(drift[i], ("x", j + 1))))
    return acc


def _diffusion_residuals(sde, X: SimpleVectorField) -> list:
    n, m = X.n, X.m
    out = []
    for i in range(n):
        row = []
        for k in range(m):
            acc = diff(X.phi[i], ("w", k + 1))
            for j in range(n):
                acc = add(acc, mul(sde.sigma[j][k], diff(X.phi[i], ("x", j + 1))))
                if X.phi[j] != ZERO:
                    acc = sub(acc, mul(X.phi[j], diff(sde.sigma[i][k], ("x", j + 1))))
            for l in range(m):
                if X.R[l][k] != 0:
                    acc = sub(acc, mul(sde.sigma[i][l], num(X.R[l][k])))
            row.append(simplify(acc))
        out.append(row)
    return out


def determining_residuals_ito(sde: ItoSDE, X: SimpleVectorField):
    """Residuals of the Ito determining equations: ``(drift[n], diffusion[n][m])``."""
    _check(sde, X)
    drift = []
    for i in range(X.n):
        acc = add(_transport(sde.f, X, i), mul(num("1/2"), ito_laplacian(sde, X.phi[i])))
        drift.append(simplify(acc))
    return drift, _diffusion_residuals(sde, X)


def determining_residuals_strat(ssde: StratSDE, X: SimpleVectorField):
    """Residuals of the Stratonovich determining equations (no Laplacian term)."""
    _check(ssde, X)
    drift = [simplify(_transport(ssde.b, X, i)) for i in range(X.n)]
    return drift, _diffusion_residuals(ssde, X)


def deterministic_ds_residual(f: Sequence[Expr], X: SimpleVectorField) -> list:
    """Residuals for dx/dt = f(x, t); the sigma = 0 case of the Ito equations."""
    if X.has_R or any(depends_on(p, "w") for p in X.phi) or any(depends_on(e, "w") for e in f):
        raise ValueError("deterministic systems admit no Wiener dependence")
    if len(f) != X.n:
        raise DimensionError("field and vector field dimensions differ")
    return [simplify(_transport(f, X, i)) for i in range(X.n)]


def commutator(X: SimpleVectorField, Y: SimpleVectorField) -> SimpleVectorField:
    """[X, Y]: spatial part X(psi) - Y(phi), Wiener part S R - R S."""
    if X.n != Y.n or X.m != Y.m:
        raise DimensionError("fields live in different contexts")
    phi = tuple(simplify(sub(X.apply(psi), Y.apply(ph))) for ph, psi in zip(X.phi, Y.phi))
    R, S = X.R, Y.R
    m = X.m
    Z = [
        [sum((S[i][k] * R[k][j] - R[i][k] * S[k][j] for k in range(m)), Fraction(0)) for j in range(m)]
        for i in range(m)
    ]
    name = f"[{X.name},{Y.name}]" if X.name and Y.name else ""
    return SimpleVectorField(phi, tuple(tuple(r) for r in Z), m, name)


def lie_module_combine(F: Expr, X: SimpleVectorField, G: Expr, Y: SimpleVectorField) -> SimpleVectorField:
    """F*X + G*Y for fields without Wiener action."""
    if X.has_R or Y.has_R:
        raise ValueError("module combinations are defined for fields with R = 0")
    if X.n != Y.n or X.m != Y.m:
        raise DimensionError("fields live in different contexts")
    phi = tuple(simplify(add(mul(F, a), mul(G, b))) for a, b in zip(X.phi, Y.phi))
    return SimpleVectorField(phi, None, X.m)


def field_difference(X: SimpleVectorField, Y: SimpleVectorField):
    """Coefficient differences of two fields: spatial exprs and R difference."""
    phi = [simplify(sub(a, b)) for a, b in zip(X.phi, Y.phi)]
    R = [[X.R[i][j] - Y.R[i][j] for j in range(X.m)] for i in range(X.m)]
    return phi, R


def fields_equal(X, Y, domain=None, consts=None, tol=1e-9) -> bool:
    phi, R = field_difference(X, Y)
    if any(v != 0 for row in R for v in row):
        return False
    return all(is_zero(p, domain, tol, consts, X.n, X.m).is_zero for p in phi)


# ---- verdicts ---------------------------------------------------------


@dataclass
class SymmetryVerdict:
    drift: ZeroResult
    diffusion: ZeroResult
    classification: Classification
    drift_residuals: list = field(default_factory=list, repr=False)
    diffusion_residuals: list = field(default_factory=list, repr=False)
    per_residual: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return self.drift.is_zero and self.diffusion.is_zero

    @property
    def max_residual(self) -> float:
        return max(self.drift.max_abs, self.diffusion.max_abs)

    @property
    def witness(self) -> Binding | None:
        return self.drift.witness or self.diffusion.witness

    def as_dict(self) -> dict:
        return {
            "pass": self.passed,
            "classification": self.classification.value,
            "drift": self.drift.as_dict(),
            "diffusion": self.diffusion.as_dict(),
            "max_residual": self.max_residual,
            "drift_residuals": [to_string(e) for e in self.drift_residuals],
            "diffusion_residuals": [[to_string(e) for e in row] for row in self.diffusion_residuals],
        }


def check_symmetry(
    sde,
    X: SimpleVectorField,
    domain: SampleDomain | None = None,
    tol: float = 1e-9,
) -> SymmetryVerdict:
    """Compute the determining residuals and judge each with :func:`is_zero`."""
    domain = domain or sde.sample_box
    if isinstance(sde, StratSDE):
        drift, dif = determining_residuals_strat(sde, X)
    else:
        drift, dif = determining_residuals_ito(sde, X)
    n, m = sde.n, sde.m
    dres = [is_zero(e, domain, tol, sde.constants, n, m) for e in drift]
    wres = [is_zero(e, domain, tol, sde.constants, n, m) for row in dif for e in row]
    return SymmetryVerdict(combine(dres), combine(wres), classify(X), drift, dif)


@dataclass
class LevelSetSymmetryVerdict:
    passed: bool
    max_residual: float
    n_points: int
    witness: dict | None = None

    def as_dict(self) -> dict:
        return {"pass": self.passed, "max_residual": self.max_residual, "n_points": self.n_points, "witness": self.witness}


def check_symmetry_on_level_set(
    sde,
    X: SimpleVectorField,
    spec: LevelSetSpec,
    tol: float = 1e-8,
    count: int = 30,
    seed: int = 0,
) -> LevelSetSymmetryVerdict:
    """Conditional symmetry: determining residuals vanish on {J = c}."""
    if isinstance(sde, StratSDE):
        drift, dif = determining_residuals_strat(sde, X)
    else:
        drift, dif = determining_residuals_ito(sde, X)
    exprs = list(drift) + [e for row in dif for e in row]
    sample = sample_level_set(spec, sde.n, sde.m, count, sde.constants, seed)
    vals = np.abs(evaluate_on_samples(exprs, sample, sde.constants))
    worst = vals.max(axis=0)
    finite = np.isfinite(worst)
    mx = float(worst[finite].max()) if finite.any() else float("inf")
    bad = np.nonzero(~(worst <= tol))[0]
    witness = None
    if bad.size:
        j = int(bad[0])
        witness = Binding(float(sample.t[j]), tuple(sample.x[:, j]), tuple(sample.w[:, j])).as_dict()
    return LevelSetSymmetryVerdict(bad.size == 0, mx, len(worst), witness)


# ---- JSON -------------------------------------------------------------


def field_from_dict(d: Mapping, n: int, m: int, constants: Mapping[str, float] | Sequence[str] = ()) -> SimpleVectorField:
    phi = [parse(str(s), (n, m), constants) for s in d["phi"]]
    if len(phi) != n:
        raise DimensionError(f"phi has {len(phi)} entries, model has n={n}")
    return SimpleVectorField(tuple(phi), d.get("R"), m, str(d.get("name", "")))


def load_field(path, sde) -> SimpleVectorField:
    with open(Path(path), encoding="utf-8") as fh:
        return field_from_dict(json.load(fh), sde.n, sde.m, sde.constants)
