"""Invariance residuals, conditional invariants on level sets, and the ring/module operations."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .exprcore import (
    Expr,
    SampleDomain,
    ZeroResult,
    combine,
    depends_on,
    diff,
    has_factor,
    is_zero,
    parse,
    simplify,
    to_string,
)
from .exprcore.evaluate import Binding
from .exprcore.expr import add, mul, num, sub, to_fraction
from .levelset import (
    LEVEL_TOL,
    LevelSetSamplingError,
    LevelSetSpec,
    evaluate_on_samples,
    sample_level_set,
    sampler_from_dict,
)
from .model import ItoSDE, diffusion_matrix, ito_differential
from .symmetry import SimpleVectorField

RESIDUAL_TOL = 1e-8
MIN_LEVEL_POINTS = 30


class Kind(str, enum.Enum):
    FULL = "full"
    PHASE = "phase"
    CONFIGURATIONAL = "configurational"


def dependency_kind(J: Expr) -> Kind:
    if depends_on(J, "w"):
        return Kind.FULL
    if depends_on(J, "t"):
        return Kind.PHASE
    return Kind.CONFIGURATIONAL


@dataclass(frozen=True)
class InvariantCandidate:
    J: Expr
    declared_kind: Kind | None = None
    name: str = ""
    level_sets: tuple = ()

    def __post_init__(self):
        if self.declared_kind is not None:
            k = Kind(self.declared_kind)
            object.__setattr__(self, "declared_kind", k)
            if k != self.kind:
                raise ValueError(f"declared kind {k.value} but the expression is {self.kind.value}")

    @property
    def kind(self) -> Kind:
        return dependency_kind(self.J)


def invariance_residuals(sde: ItoSDE, J: Expr):
    """``(drift, [diffusion_k])`` of dJ; all zero iff J is an invariant."""
    return ito_differential(sde, J)


def phase_invariant_residuals(sde: ItoSDE, psi: Expr):
    """dPsi for Psi(x, t): drift Psi_t + f^i Psi_i + D^{ij} Psi_ij / 2, diffusion sigma^i_k Psi_i."""
    if depends_on(psi, "w"):
        raise ValueError("phase invariants cannot depend on Wiener variables")
    n, m = sde.n, sde.m
    grad = [diff(psi, ("x", i + 1)) for i in range(n)]
    D = diffusion_matrix(sde)
    drift = diff(psi, ("t", 0))
    for i in range(n):
        drift = add(drift, mul(sde.f[i], grad[i]))
        for j in range(n):
            if D[i][j].kind != "num" or D[i][j].value != 0:
                drift = add(drift, mul(mul(num("1/2"), D[i][j]), diff(grad[i], ("x", j + 1))))
    dif = []
    for k in range(m):
        acc = num(0)
        for i in range(n):
            acc = add(acc, mul(sde.sigma[i][k], grad[i]))
        dif.append(simplify(acc))
    return simplify(drift), dif


def _residuals(sde, J):
    if depends_on(J, "w"):
        return invariance_residuals(sde, J)
    return phase_invariant_residuals(sde, J)


@dataclass
class InvariantVerdict:
    drift: ZeroResult
    diffusion: ZeroResult
    kind: Kind
    drift_residual: Expr | None = field(default=None, repr=False)
    diffusion_residuals: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.drift.is_zero and self.diffusion.is_zero

    def as_dict(self) -> dict:
        return {
            "pass": self.passed,
            "kind": self.kind.value,
            "drift": self.drift.as_dict(),
            "diffusion": self.diffusion.as_dict(),
            "drift_residual": to_string(self.drift_residual) if self.drift_residual is not None else None,
            "diffusion_residuals": [to_string(e) for e in self.diffusion_residuals],
        }


def check_invariant(sde: ItoSDE, J: Expr, domain: SampleDomain | None = None, tol: float = 1e-9) -> InvariantVerdict:
    domain = domain or sde.sample_box
    drift, dif = invariance_residuals(sde, J)
    dr = is_zero(drift, domain, tol, sde.constants, sde.n, sde.m)
    wr = combine([is_zero(e, domain, tol, sde.constants, sde.n, sde.m) for e in dif])
    return InvariantVerdict(dr, wr, dependency_kind(J), drift, dif)


class ConditionalStatus(str, enum.Enum):
    CONDITIONAL = "Conditional"
    NOT_CONDITIONAL = "NotConditional"


@dataclass
class ConditionalVerdict:
    status: ConditionalStatus
    level: float
    n_points: int
    max_residual: float
    mean_residual: float
    max_level_error: float
    factored: bool
    cofactors: list = field(default_factory=list)
    witness: Binding | None = None
    witness_residual: float | None = None

    @property
    def passed(self) -> bool:
        return self.status is ConditionalStatus.CONDITIONAL

    def as_dict(self) -> dict:
        d = {
            "status": self.status.value,
            "level": self.level,
            "n_points": self.n_points,
            "max_residual": self.max_residual,
            "mean_residual": self.mean_residual,
            "max_level_error": self.max_level_error,
            "factored": self.factored,
            "cofactors": [to_string(c) if c is not None else None for c in self.cofactors],
        }
        if self.witness is not None:
            d["witness"] = self.witness.as_dict()
            d["witness_residual"] = self.witness_residual
        return d


def factor_residuals(residuals, J: Expr, c) -> list:
    """Cofactor q with residual = (J - c)*q for each residual, None where division fails."""
    g = simplify(sub(J, num(to_fraction(c))))
    return [has_factor(r, g) for r in residuals]


def conditional_invariance_check(
    sde: ItoSDE,
    spec: LevelSetSpec,
    tol: float = RESIDUAL_TOL,
    count: int = MIN_LEVEL_POINTS,
    seed: int = 0,
) -> ConditionalVerdict:
    """Check that dJ vanishes at sampled points of {J = c}.

    Also tries to exhibit each residual as (J - c) times a cofactor; failure
    to factor does not affect the verdict.
    """
    if count < MIN_LEVEL_POINTS:
        raise ValueError(f"at least {MIN_LEVEL_POINTS} level-set points are required")
    drift, dif = _residuals(sde, spec.J)
    residuals = [drift] + list(dif)
    sample = sample_level_set(spec, sde.n, sde.m, count, sde.constants, seed)
    if len(sample.t) < MIN_LEVEL_POINTS:
        raise LevelSetSamplingError("not enough level-set points")
    vals = np.abs(evaluate_on_samples(residuals, sample, sde.constants))
    worst = vals.max(axis=0)
    bad = np.nonzero(~(worst <= tol))[0]
    cof = factor_residuals(residuals, spec.J, spec.c)
    factored = all(c is not None for c in cof)
    witness = wres = None
    if bad.size:
        j = int(bad[0])
        witness = Binding(float(sample.t[j]), tuple(sample.x[:, j]), tuple(sample.w[:, j]))
        wres = float(worst[j])
    finite = worst[np.isfinite(worst)]
    return ConditionalVerdict(
        ConditionalStatus.NOT_CONDITIONAL if bad.size else ConditionalStatus.CONDITIONAL,
        float(spec.c),
        len(worst),
        float(finite.max()) if finite.size else float("inf"),
        float(np.mean(finite)) if finite.size else float("inf"),
        float(sample.level_error.max()),
        factored,
        cof,
        witness,
        wres,
    )


def apply_symmetry_to_invariant(X: SimpleVectorField, J: Expr) -> Expr:
    """G = X(J); an invariant whenever X is a symmetry and J an invariant."""
    return X.apply(J)


def ring_combine(F: Expr, G: Expr, a, b):
    """``(a*F + b*G, F*G)``, both simplified."""
    s = simplify(add(mul(num(to_fraction(a)), F), mul(num(to_fraction(b)), G)))
    p = simplify(mul(F, G))
    return s, p


# ---- JSON -------------------------------------------------------------


def invariant_from_dict(d: Mapping, n: int, m: int, constants=()) -> InvariantCandidate:
    J = parse(str(d["J"]), (n, m), constants)
    levels = []
    for ls in d.get("level_sets") or []:
        levels.append(LevelSetSpec(J, float(ls["c"]), sampler_from_dict(ls.get("sampler"))))
    return InvariantCandidate(J, d.get("kind"), str(d.get("name", "")), tuple(levels))


def load_invariant(path, sde) -> InvariantCandidate:
    with open(Path(path), encoding="utf-8") as fh:
        return invariant_from_dict(json.load(fh), sde.n, sde.m, sde.constants)


__all__ = [
    "ConditionalStatus",
    "ConditionalVerdict",
    "InvariantCandidate",
    "InvariantVerdict",
    "Kind",
    "LEVEL_TOL",
    "LevelSetSpec",
    "apply_symmetry_to_invariant",
    "check_invariant",
    "conditional_invariance_check",
    "dependency_kind",
    "factor_residuals",
    "invariance_residuals",
    "phase_invariant_residuals",
    "ring_combine",
]
