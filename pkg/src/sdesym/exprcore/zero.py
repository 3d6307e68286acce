"""Tri-state zero testing: symbolic first, sampled numeric fallback."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .evaluate import Binding, Compiled
from .expr import Expr, free_vars
from .simplify import is_symbolic_zero, simplify

DEFAULT_TOL = 1e-9
DEFAULT_N = 200


class ZeroStatus(str, enum.Enum):
    SYMBOLIC_ZERO = "SymbolicZero"
    NUMERIC_ZERO = "NumericZero"
    NONZERO = "NonZero"

    @property
    def is_zero(self) -> bool:
        return self is not ZeroStatus.NONZERO


class InsufficientSamples(RuntimeError):
    """Too many sample points fell outside the expression's domain."""


@dataclass(frozen=True)
class SampleDomain:
    """Box for random (t, x, w) samples.

    ``x`` and ``w`` give one ``(lo, hi)`` range applied to every index, or a
    sequence with one range per index.
    """

    t: tuple = (0.1, 2.0)
    x: tuple = (0.2, 2.0)
    w: tuple = (-1.0, 1.0)
    N: int = DEFAULT_N
    seed: int = 0
    max_draw_factor: int = 20

    def _ranges(self, spec, count):
        if count == 0:
            return []
        if len(spec) == 2 and all(isinstance(v, (int, float)) for v in spec):
            return [tuple(map(float, spec))] * count
        spec = [tuple(map(float, r)) for r in spec]
        if len(spec) < count:
            raise ValueError(f"sample box gives {len(spec)} ranges, need {count}")
        return spec[:count]

    def draw(self, n: int, m: int, count: int, rng: np.random.Generator):
        """Uniform draws: ``(t[count], x[n, count], w[m, count])``."""
        lo, hi = self.t
        t = rng.uniform(lo, hi, count)
        x = np.array([rng.uniform(a, b, count) for a, b in self._ranges(self.x, n)]).reshape(n, count)
        w = np.array([rng.uniform(a, b, count) for a, b in self._ranges(self.w, m)]).reshape(m, count)
        return t, x, w

    def with_overrides(self, **kw) -> "SampleDomain":
        d = {k: getattr(self, k) for k in ("t", "x", "w", "N", "seed", "max_draw_factor")}
        d.update({k: v for k, v in kw.items() if v is not None})
        return SampleDomain(**d)

    def as_dict(self) -> dict:
        return {"t": list(self.t), "x": _listify(self.x), "w": _listify(self.w), "N": self.N, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "SampleDomain":
        if not d:
            return cls()
        kw = {}
        for key in ("t", "x", "w"):
            if key in d:
                v = d[key]
                kw[key] = tuple(tuple(r) if isinstance(r, (list, tuple)) else r for r in v)
        for key in ("N", "seed", "max_draw_factor"):
            if key in d:
                kw[key] = int(d[key])
        return cls(**kw)


def _listify(spec):
    return [list(r) if isinstance(r, (list, tuple)) else r for r in spec]


@dataclass
class ZeroResult:
    status: ZeroStatus
    max_abs: float = 0.0
    witness: Binding | None = None
    witness_value: float | None = None
    n_samples: int = 0
    simplified: Expr | None = field(default=None, repr=False)

    @property
    def is_zero(self) -> bool:
        return self.status.is_zero

    def as_dict(self) -> dict:
        d = {"status": self.status.value, "max_abs": self.max_abs, "n_samples": self.n_samples}
        if self.witness is not None:
            d["witness"] = self.witness.as_dict()
            d["witness_value"] = self.witness_value
        return d


def _dims(exprs: Sequence[Expr]):
    n = m = 0
    for e in exprs:
        for fam, idx in free_vars(e):
            if fam == "x":
                n = max(n, idx)
            elif fam == "w":
                m = max(m, idx)
    return n, m


def sample_values(
    exprs: Sequence[Expr],
    domain: SampleDomain,
    consts: Mapping[str, float] | None = None,
    n: int | None = None,
    m: int | None = None,
):
    """Evaluate ``exprs`` at ``domain.N`` points where all of them are finite.

    Returns ``(t, x, w, values)`` with ``values`` shaped ``[len(exprs), N]``.
    Raises :class:`InsufficientSamples` when the retry cap is exhausted.
    """
    dn, dm = _dims(exprs)
    n = dn if n is None else n
    m = dm if m is None else m
    rng = np.random.default_rng(domain.seed)
    fn = Compiled(exprs)
    need = domain.N
    got_t, got_x, got_w, got_v = [], [], [], []
    drawn = 0
    cap = domain.max_draw_factor * need
    have = 0
    while have < need and drawn < cap:
        batch = min(max(need - have, 16) * 2, cap - drawn)
        t, x, w = domain.draw(n, m, batch, rng)
        drawn += batch
        vals = np.array([np.broadcast_to(np.asarray(v, dtype=float), (batch,)) for v in fn(t, x, w, consts)])
        ok = np.all(np.isfinite(vals), axis=0)
        idx = np.nonzero(ok)[0][: need - have]
        got_t.append(t[idx])
        got_x.append(x[:, idx])
        got_w.append(w[:, idx])
        got_v.append(vals[:, idx])
        have += len(idx)
    if have < need:
        raise InsufficientSamples(f"only {have} of {need} sample points were inside the domain after {drawn} draws")
    return (
        np.concatenate(got_t),
        np.concatenate(got_x, axis=1),
        np.concatenate(got_w, axis=1),
        np.concatenate(got_v, axis=1),
    )


def is_zero(
    e: Expr,
    domain: SampleDomain | None = None,
    tol: float = DEFAULT_TOL,
    consts: Mapping[str, float] | None = None,
    n: int | None = None,
    m: int | None = None,
    assume_positive: bool = False,
) -> ZeroResult:
    """Decide whether ``e`` vanishes.

    SymbolicZero if the simplifier reduces ``e`` to 0; otherwise the original
    expression is sampled and NumericZero means ``|e| <= tol`` (absolute) at
    every sample. NumericZero is tolerance-relative evidence, not a proof.
    """
    domain = domain or SampleDomain()
    s = simplify(e, assume_positive)
    if (s.kind == "num" and s.value == 0) or is_symbolic_zero(e, assume_positive):
        return ZeroResult(ZeroStatus.SYMBOLIC_ZERO, 0.0, None, None, 0, s)
    t, x, w, vals = sample_values([e], domain, consts, n, m)
    v = np.abs(vals[0])
    max_abs = float(v.max()) if v.size else 0.0
    bad = np.nonzero(v > tol)[0]
    if bad.size == 0:
        return ZeroResult(ZeroStatus.NUMERIC_ZERO, max_abs, None, None, len(v), s)
    j = int(bad[0])
    witness = Binding(float(t[j]), tuple(x[:, j]), tuple(w[:, j]))
    return ZeroResult(ZeroStatus.NONZERO, max_abs, witness, float(vals[0][j]), len(v), s)


def combine(results: Sequence[ZeroResult]) -> ZeroResult:
    """Aggregate verdict for a family of residuals (worst status wins)."""
    if not results:
        return ZeroResult(ZeroStatus.SYMBOLIC_ZERO)
    max_abs = max(r.max_abs for r in results)
    for r in results:
        if r.status is ZeroStatus.NONZERO:
            return ZeroResult(ZeroStatus.NONZERO, max_abs, r.witness, r.witness_value, r.n_samples)
    if any(r.status is ZeroStatus.NUMERIC_ZERO for r in results):
        n = max(r.n_samples for r in results)
        return ZeroResult(ZeroStatus.NUMERIC_ZERO, max_abs, None, None, n)
    return ZeroResult(ZeroStatus.SYMBOLIC_ZERO, max_abs)
