"""Closed-form and quadrature solutions driven by the same Brownian increments."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from ..reduction import reconstruct
from ..sim.verify import ExactSolution
from ..sim.wiener import WienerPath


def _cumulative(dW: np.ndarray) -> np.ndarray:
    """w(t_j) from increments [N, m, P] -> [N+1, m, P]."""
    w = np.zeros((dW.shape[0] + 1,) + dW.shape[1:])
    w[1:] = np.cumsum(dW, axis=0)
    return w


def gbm(c: Mapping) -> ExactSolution:
    a, b = c["alpha"], c["beta"]

    def fn(grid, dW, x0):
        w = _cumulative(dW)[:, 0, :]
        return (x0[0] * np.exp((a - b * b / 2) * grid[:, None] + b * w))[:, None, :]

    return ExactSolution(fn, "x0*exp((alpha - beta^2/2) t + beta w)")


def additive_t(c: Mapping) -> ExactSolution:
    def fn(grid, dW, x0):
        inc = grid[:-1, None] * dW[:, 0, :]
        out = np.empty((grid.shape[0], dW.shape[2]))
        out[0] = x0[0]
        out[1:] = x0[0] + np.cumsum(inc, axis=0)
        return out[:, None, :]

    return ExactSolution(fn, "x0 + sum_j t_j dW_j")


def logistic(c: Mapping) -> ExactSolution:
    """x = -exp(A t + gamma w)/y, y = y0 - beta * left-endpoint integral of exp(A t + gamma w)."""
    beta, gamma = c["beta"], c["gamma"]
    A = c["alpha"] - gamma * gamma / 2

    def fn(grid, dW, x0):
        w = _cumulative(dW)[:, 0, :]
        E = np.exp(A * grid[:, None] + gamma * w)
        y0 = -1.0 / x0[0]
        P = dW.shape[2]
        out = np.empty((grid.shape[0], P))
        for p in range(P):
            y = reconstruct(WienerPath(grid, dW[:, :, p]), -beta * E[:, p], [], y0)
            out[:, p] = -E[:, p] / y
        return out[:, None, :]

    return ExactSolution(fn, "inverse straightening of the reconstructed y", refine=16)


def ne3(c: Mapping) -> ExactSolution:
    def fn(grid, dW, x0):
        w = _cumulative(dW)[:, 0, :]
        t = grid[:, None]
        return (x0[0] * np.exp(1 - np.exp(-t) - t / 2 + w))[:, None, :]

    return ExactSolution(fn, "x0*exp(1 - exp(-t) - t/2 + w)")


def polar_circle_on_m0(c: Mapping) -> ExactSolution:
    om, sig = c["omega"], c["sigma"]

    def fn(grid, dW, x0):
        if x0[0] != 1.0:
            raise ValueError("this solution holds only on the invariant circle rho = 1")
        w2 = _cumulative(dW)[:, 1, :]
        theta = x0[1] + om * grid[:, None] + sig * w2
        return np.stack([np.ones_like(theta), theta], axis=1)

    return ExactSolution(fn, "rho = 1, theta = theta0 + omega t + sigma w2")


REGISTRY: dict[str, Callable[[Mapping], ExactSolution]] = {
    "gbm": gbm,
    "additive_t": additive_t,
    "logistic": logistic,
    "ne3": ne3,
    "polar_circle_on_m0": polar_circle_on_m0,
}


def exact_solution(kind: str, constants: Mapping) -> ExactSolution:
    try:
        return REGISTRY[kind](constants)
    except KeyError:
        raise KeyError(f"no exact solution registered as {kind!r}") from None
