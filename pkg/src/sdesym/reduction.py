"""Symmetry-adapted coordinates, Ito change of variables and reconstruction quadrature.

Inverse transforms are written in ``y1..yn``; internally these are the state
variables of the transformed system, so a :class:`TransformedSDE` is again an
expression system over ``(t, x, w)`` printed with the ``y`` prefix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .exprcore import (
    Compiled,
    Expr,
    SampleDomain,
    ZeroStatus,
    combine,
    depends_on,
    diff,
    free_vars,
    is_zero,
    parse,
    simplify,
    substitute,
    to_string,
)
from .exprcore.expr import div, exp, log, mul, neg, num, power, var
from .exprcore.simplify import from_poly, to_poly
from .model import ItoSDE, ito_differential
from .symmetry import SimpleVectorField

ROUND_TRIP_TOL = 1e-9


class TransformError(ValueError):
    """The transform is inconsistent or unusable on its sample box."""


class NonSeparable(ValueError):
    """phi is not of the form g(t, w)*p(x) with p in the antiderivative table."""


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Transform:
    """``y = u(x, t, w)`` with inverse ``x = v(y, t, w)``."""

    forward: tuple
    inverse: tuple
    n: int
    m: int
    constants: Mapping = field(default_factory=dict)
    y_box: SampleDomain = field(default_factory=SampleDomain)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "forward", tuple(self.forward))
        object.__setattr__(self, "inverse", tuple(self.inverse))
        if len(self.forward) != self.n or len(self.inverse) != self.n:
            raise TransformError("forward and inverse must both have n components")

    def round_trip_error(self, count: int = 200, seed: int = 0) -> float:
        """Max relative error of u(v(y)) - y over finite points of the y box."""
        rng = np.random.default_rng(seed)
        t, y, w = self.y_box.draw(self.n, self.m, count, rng)
        xs = _stack(Compiled(list(self.inverse))(t, y, w, self.constants), count)
        ys = _stack(Compiled(list(self.forward))(t, xs, w, self.constants), count)
        ok = np.all(np.isfinite(ys), axis=0) & np.all(np.isfinite(xs), axis=0)
        if not ok.any():
            raise TransformError("round trip is undefined on the whole y box")
        err = np.abs(ys[:, ok] - y[:, ok]) / np.maximum(1.0, np.abs(y[:, ok]))
        return float(err.max())

    def check(self, tol: float = ROUND_TRIP_TOL) -> None:
        err = self.round_trip_error()
        if not err <= tol:
            raise TransformError(f"round trip error {err:.3g} exceeds {tol:g}")

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "forward": [to_string(e) for e in self.forward],
            "inverse": [to_string(e, y_names(self.n)) for e in self.inverse],
        }


def y_names(n: int) -> dict:
    return {"x": [f"y{i + 1}" for i in range(n)]}


def _stack(vals, count):
    return np.array([np.broadcast_to(np.asarray(v, float), (count,)) for v in vals]).reshape(len(vals), count)


@dataclass
class TransformedSDE:
    drift: tuple
    diffusion: tuple
    ito_status: ZeroStatus
    transform: Transform
    w_dependent: tuple = ()

    @property
    def n(self) -> int:
        return len(self.drift)

    @property
    def m(self) -> int:
        return self.transform.m

    @property
    def is_ito(self) -> bool:
        return self.ito_status.is_zero

    def to_sde(self, name: str = "") -> ItoSDE:
        """The transformed system as an ItoSDE in y; requires is_ito."""
        if not self.is_ito:
            raise TransformError("transformed coefficients depend on w; not an Ito system")
        return ItoSDE(
            self.drift,
            self.diffusion,
            dict(self.transform.constants),
            name=name or (self.transform.name + " (transformed)"),
            var_names=tuple(f"y{i + 1}" for i in range(self.n)),
            sample_box=self.transform.y_box,
        )

    def as_dict(self) -> dict:
        names = y_names(self.n)
        return {
            "drift": [to_string(e, names) for e in self.drift],
            "diffusion": [[to_string(e, names) for e in row] for row in self.diffusion],
            "is_ito": self.is_ito,
            "ito_status": self.ito_status.value,
            "w_dependent": [list(p) for p in self.w_dependent],
        }


# ---- adapted coordinates ------------------------------------------------


def _split_exp_arg(arg: Expr):
    """exp argument -> (a, rest) with arg = a*x1 + rest, a a number, rest x-free."""
    a = Fraction(0)
    rest = {}
    for mono, c in to_poly(arg).items():
        if any(depends_on(b, "x") for b, _ in mono):
            if mono == ((var("x", 1), Fraction(1)),):
                a += c
                continue
            raise NonSeparable(f"exp argument {to_string(arg)} is not linear in x")
        rest[mono] = c
    return a, from_poly(rest)


def separate_1d(phi: Expr):
    """phi = g(t, w) * x^k * exp(a*x) -> (g, k, a)."""
    p = to_poly(phi)
    if len(p) != 1:
        raise NonSeparable(f"{to_string(phi)} is not a single product")
    (mono, coef), = p.items()
    k = Fraction(0)
    a = Fraction(0)
    g = num(coef)
    for base, e in mono:
        if base.kind == "exp":
            a_part, rest = _split_exp_arg(base.args[0])
            a += a_part
            g = mul(g, exp(rest))
        elif base == var("x", 1):
            k += e
        elif depends_on(base, "x"):
            raise NonSeparable(f"factor {to_string(base)} is outside the antiderivative table")
        else:
            g = mul(g, power(base, num(e)))
    if k != 0 and a != 0:
        raise NonSeparable("x^k*exp(a*x) has no elementary antiderivative in the table")
    return simplify(g), k, a


def adapted_coordinate_1d(phi: Expr) -> Expr:
    """y = (1/g(t, w)) * integral of dx / p(x) for phi = g*p."""
    g, k, a = separate_1d(phi)
    x = var("x", 1)
    if a != 0:
        prim = div(neg(exp(mul(num(-a), x))), num(a))
    elif k == 1:
        prim = log(x)
    else:
        prim = div(power(x, num(1 - k)), num(1 - k))
    return simplify(div(prim, g))


def adapted_inverse_1d(phi: Expr) -> Expr:
    """x as a function of y for :func:`adapted_coordinate_1d` (principal branch)."""
    g, k, a = separate_1d(phi)
    y = var("x", 1)
    gy = mul(g, y)
    if a != 0:
        inv = div(log(mul(num(-a), gy)), num(-a))
    elif k == 1:
        inv = exp(gy)
    else:
        inv = power(mul(num(1 - k), gy), num(Fraction(1) / (1 - k)))
    return simplify(inv)


def adapted_transform_1d(X: SimpleVectorField, sde: ItoSDE, name: str = "") -> Transform:
    if sde.n != 1:
        raise ValueError("adapted coordinates are built for n = 1 only")
    return Transform(
        (adapted_coordinate_1d(X.phi[0]),),
        (adapted_inverse_1d(X.phi[0]),),
        1,
        sde.m,
        dict(sde.constants),
        sde.sample_box,
        name=name or "adapted",
    )


# ---- change of variables -------------------------------------------------


def _inverse_map(T: Transform) -> dict:
    return {var("x", i + 1): T.inverse[i] for i in range(T.n)}


def _simplify_checked(raw: Expr, T: Transform, rng_seed: int = 0) -> Expr:
    """Simplify under positivity, keeping the result only if it agrees numerically with ``raw``."""
    pos = simplify(raw, assume_positive=True)
    rng = np.random.default_rng(rng_seed)
    t, y, w = T.y_box.draw(T.n, T.m, 64, rng)
    a, b = Compiled([raw, pos])(t, y, w, T.constants)
    a = np.broadcast_to(np.asarray(a, float), (64,))
    b = np.broadcast_to(np.asarray(b, float), (64,))
    ok = np.isfinite(a)
    if ok.any() and np.all(np.abs(a[ok] - b[ok]) <= 1e-9 * np.maximum(1.0, np.abs(a[ok]))):
        return pos
    return simplify(raw)


def change_variables(sde: ItoSDE, T: Transform, check: bool = True) -> TransformedSDE:
    """Apply Ito's rule to y = u(x, t, w) and rewrite the result in (t, y, w)."""
    if (T.n, T.m) != (sde.n, sde.m):
        raise TransformError("transform context does not match the model")
    if check:
        T.check()
    inv = _inverse_map(T)
    drift, dif = [], []
    for u in T.forward:
        d, s = ito_differential(sde, u)
        drift.append(_simplify_checked(substitute(d, inv), T))
        dif.append(tuple(_simplify_checked(substitute(e, inv), T) for e in s))
    coeffs = drift + [e for row in dif for e in row]
    vals = _stack(Compiled(coeffs)(*T.y_box.draw(T.n, T.m, 64, np.random.default_rng(1)), T.constants), 64)
    if not np.isfinite(vals).all(axis=0).any():
        raise TransformError("transformed coefficients are undefined on the whole y box")
    results, dependent = [], []
    for idx, e in enumerate(coeffs):
        for k in range(1, sde.m + 1):
            if ("w", k) not in free_vars(e):
                continue
            r = is_zero(diff(e, ("w", k)), T.y_box, consts=T.constants, n=T.n, m=T.m)
            results.append(r)
            if not r.is_zero:
                dependent.append((_coeff_label(idx, sde.n, sde.m), k))
    status = combine(results).status
    return TransformedSDE(tuple(drift), tuple(dif), status, T, tuple(dependent))


def _coeff_label(idx, n, m):
    if idx < n:
        return f"drift[{idx + 1}]"
    j = idx - n
    return f"diffusion[{j // m + 1}][{j % m + 1}]"


def push_forward(X: SimpleVectorField, T: Transform) -> SimpleVectorField:
    """Components of X in the y coordinates; the w action is unchanged."""
    inv = _inverse_map(T)
    phi = tuple(_simplify_checked(substitute(X.apply(u), inv), T) for u in T.forward)
    return SimpleVectorField(phi, X.R, X.m, name=X.name)


# ---- reconstruction ---------------------------------------------------------


def _on_grid(series, N: int, what: str) -> np.ndarray:
    a = np.asarray(series, dtype=float)
    if a.ndim == 0:
        return np.full(N, float(a))
    if a.shape[0] == N + 1:
        return a[:N]
    if a.shape[0] == N:
        return a
    raise GridMismatch(f"{what} has {a.shape[0]} values for a grid of {N + 1} points")


def reconstruct(path, drift_integrand, dw_integrands: Sequence, y0: float) -> np.ndarray:
    """y(t_j) = y0 + sum_{l<j} F_l h_l + sum_k sum_{l<j} S^k_l dW^k_l (left endpoints).

    Integrands are sampled on the path grid (N+1 values, the last unused) or
    given per step (N values); scalars are broadcast.
    """
    grid = np.asarray(path.grid, float)
    dW = np.asarray(path.increments, float)
    N = grid.shape[0] - 1
    if dW.shape[0] != N:
        raise GridMismatch("increments do not match the grid")
    m = dW.shape[1] if dW.ndim == 2 else 1
    dW = dW.reshape(N, m)
    if len(dw_integrands) not in (0, m):
        raise GridMismatch(f"expected {m} dw integrands, got {len(dw_integrands)}")
    inc = _on_grid(drift_integrand, N, "drift integrand") * np.diff(grid)
    for k, s in enumerate(dw_integrands):
        inc = inc + _on_grid(s, N, f"dw integrand {k + 1}") * dW[:, k]
    out = np.empty(N + 1)
    out[0] = y0
    out[1:] = y0 + np.cumsum(inc)
    return out


# ---- JSON -------------------------------------------------------------


def transform_from_dict(d: Mapping, sde: ItoSDE) -> Transform:
    consts = dict(sde.constants)
    fwd = tuple(parse(s, (sde.n, sde.m), consts) for s in d["forward"])
    inv = tuple(parse(s, (sde.n, sde.m), consts, state_symbol="y") for s in d["inverse"])
    box = SampleDomain.from_dict(d.get("y_box")) if d.get("y_box") else sde.sample_box
    return Transform(fwd, inv, sde.n, sde.m, consts, box, str(d.get("name", "")))


def load_transform(path, sde) -> Transform:
    with open(Path(path), encoding="utf-8") as fh:
        return transform_from_dict(json.load(fh), sde)


__all__ = [
    "GridMismatch",
    "NonSeparable",
    "Transform",
    "TransformError",
    "TransformedSDE",
    "adapted_coordinate_1d",
    "adapted_inverse_1d",
    "adapted_transform_1d",
    "change_variables",
    "push_forward",
    "reconstruct",
    "separate_1d",
    "transform_from_dict",
]
