"""Pathwise checks: exact-solution comparison, invariant monitoring, linearization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..exprcore import Compiled, Expr, diff, simplify, substitute
from ..exprcore.expr import add, mul, num, sub, to_fraction, var
from ..exprcore.evaluate import Binding, evaluate
from ..model import ItoSDE
from .integrate import Trajectory, em_ensemble
from .wiener import coarsen_increments, sample_ensemble, uniform_grid


@dataclass(frozen=True)
class ExactSolution:
    """``fn(grid, dW[N, m, P], x0[n]) -> states[N+1, n, P]`` on the same increments.

    ``refine`` > 0 marks maps that contain quadratures: they are evaluated
    once on a grid ``refine`` times finer than the finest step and
    subsampled, so the reference carries no step error of its own at the
    resolutions being compared.
    """

    fn: Callable
    note: str = ""
    refine: int = 0

    def __call__(self, grid, dW, x0):
        return self.fn(np.asarray(grid, float), np.asarray(dW, float), np.asarray(x0, float))


@dataclass
class VerificationReport:
    h: list
    rms_error: list
    max_error: list
    slope: float
    P: int
    T: float
    seed: int
    sup_error: list = field(default_factory=list)

    def ratios(self, which: str = "max_error") -> list:
        e = getattr(self, which)
        return [e[i] / e[i + 1] if e[i + 1] > 0 else math.inf for i in range(len(e) - 1)]

    def as_dict(self) -> dict:
        return {
            "h": self.h,
            "rms_error": self.rms_error,
            "max_error": self.max_error,
            "sup_error": self.sup_error,
            "slope": self.slope,
            "P": self.P,
            "T": self.T,
            "seed": self.seed,
        }


def fit_slope(h, err) -> float:
    """Least-squares slope of log(err) against log(h)."""
    h = np.asarray(h, float)
    e = np.asarray(err, float)
    ok = e > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(h[ok]), np.log(e[ok]), 1)[0])


def verify_solution(
    sde: ItoSDE,
    exact: ExactSolution,
    x0,
    h_list: Sequence[float],
    P: int = 200,
    seed: int = 0,
    T: float = 1.0,
) -> VerificationReport:
    """Compare EM terminal states with the exact map on shared increments.

    Paths are drawn once at the finest resolution and summed down to coarser
    steps, so every h sees the same Brownian motion. The per-h error is the RMS over
    paths of |X_T^EM - X_T^exact|; ``max_error`` is the largest pathwise
    error over paths and grid points, and ``sup_error`` the ensemble mean of
    each path's largest error over the grid.
    """
    hs = sorted((float(h) for h in h_list), reverse=True)
    r = max(1, exact.refine)
    N_ref = int(round(T / hs[-1])) * r
    grid_r = uniform_grid(T, N_ref)
    dW_r = sample_ensemble(sde.m, grid_r, seed, P)
    ex_r = exact(grid_r, dW_r, x0) if exact.refine else None
    N_fine = N_ref // r
    dW_f = coarsen_increments(dW_r, r)
    rms, mx, sup = [], [], []
    for h in hs:
        N = int(round(T / h))
        if N_fine % N or abs(N * h - T) > 1e-12 * T:
            raise ValueError(f"step {h} does not divide the finest grid")
        dW = coarsen_increments(dW_f, N_fine // N)
        grid = uniform_grid(T, N)
        em = em_ensemble(sde, x0, grid, dW)
        ex = ex_r[:: N_ref // N] if exact.refine else exact(grid, dW, x0)
        d = np.sqrt(np.sum((em - ex) ** 2, axis=1))  # [N+1, P]
        rms.append(float(math.sqrt(math.fsum(d[-1] ** 2) / P)))
        mx.append(float(np.max(d)))
        sup.append(math.fsum(np.max(d, axis=0)) / P)
    return VerificationReport(hs, rms, mx, fit_slope(hs, rms), P, float(T), seed, sup)


@dataclass
class MonitorReport:
    series: np.ndarray
    max_deviation: float

    def as_dict(self) -> dict:
        return {"max_deviation": self.max_deviation, "final": float(self.series[-1]), "initial": float(self.series[0])}


def monitor_invariant(sde: ItoSDE, J: Expr, traj: Trajectory, path=None) -> MonitorReport:
    """J(t_j, x_j, w_j) along a trajectory and its largest deviation from J(t_0)."""
    path = path or traj.path
    w = path.cumulative()
    vals = Compiled([J])(traj.grid, traj.states.T, w.T, sde.constants)[0]
    series = np.broadcast_to(np.asarray(vals, float), traj.grid.shape).copy()
    return MonitorReport(series, float(np.max(np.abs(series - series[0]))))


def monitor_ensemble(sde: ItoSDE, J: Expr, grid, states, dW) -> np.ndarray:
    """max_j |J_j - J_0| per path for ensemble states [N+1, n, P]."""
    N, m, P = dW.shape
    w = np.zeros((N + 1, m, P))
    w[1:] = np.cumsum(dW, axis=0)
    fn = Compiled([J])
    vals = np.empty((N + 1, P))
    for j in range(N + 1):
        vals[j] = np.broadcast_to(np.asarray(fn(grid[j], states[j], w[j], sde.constants)[0], float), (P,))
    return np.max(np.abs(vals - vals[0]), axis=0)


def linearize_at_point(sde: ItoSDE, xstar: Sequence[float]) -> ItoSDE:
    """First-order expansion of drift and diffusion columns about x*.

    Jacobians are taken symbolically and then evaluated at x* (t and the
    model constants stay symbolic).
    """
    n = sde.n
    if len(xstar) != n:
        raise ValueError(f"expansion point needs {n} components")
    pt = {var("x", i + 1): num(to_fraction(v)) for i, v in enumerate(xstar)}
    b = Binding(1.0, tuple(float(v) for v in xstar), tuple(0.0 for _ in range(sde.m)))

    def lin(e: Expr) -> Expr:
        out = substitute(e, pt)
        try:
            evaluate(out, b, sde.constants)
        except ArithmeticError as err:
            raise ArithmeticError(f"coefficient undefined at the expansion point: {err}") from err
        for j in range(n):
            dj = substitute(diff(e, ("x", j + 1)), pt)
            out = add(out, mul(dj, sub(var("x", j + 1), pt[var("x", j + 1)])))
        return simplify(out)

    return ItoSDE(
        tuple(lin(e) for e in sde.f),
        tuple(tuple(lin(e) for e in row) for row in sde.sigma),
        dict(sde.constants),
        name=(sde.name + " (linearized)") if sde.name else "linearized",
        var_names=sde.var_names,
        sample_box=sde.sample_box,
    )


def zeta_series(sde: ItoSDE, traj: Trajectory) -> np.ndarray:
    """x_j - sum_l f(t_l) h - sum_l sigma(t_l) dW_l for coefficients depending on t only.

    Constant along EM trajectories up to rounding.
    """
    from ..exprcore import depends_on

    for e in list(sde.f) + [e for row in sde.sigma for e in row]:
        if depends_on(e, "x"):
            raise ValueError("zeta invariants need coefficients that depend on t only")
    grid = traj.grid
    N = grid.shape[0] - 1
    n, m = sde.n, sde.m
    fn = Compiled(list(sde.f) + [e for row in sde.sigma for e in row])
    vals = fn(grid[:-1], np.zeros((n, N)), np.zeros((m, N)), sde.constants)
    arr = np.array([np.broadcast_to(np.asarray(v, float), (N,)) for v in vals])
    f, s = arr[:n], arr[n:].reshape(n, m, N)
    dW = traj.path.increments
    inc = f * np.diff(grid) + np.einsum("ikj,jk->ij", s, dW)
    acc = np.zeros((N + 1, n))
    acc[1:] = np.cumsum(inc.T, axis=0)
    return traj.states - acc
