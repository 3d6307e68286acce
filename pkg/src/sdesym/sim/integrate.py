"""Euler-Maruyama integration for single paths and vectorized ensembles."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from ..exprcore import Compiled
from ..model import ItoSDE
from .wiener import WienerPath, check_grid

SCHEME = "euler-maruyama"


class SimulationError(ArithmeticError):
    """A coefficient was undefined at some step."""

    def __init__(self, message: str, step: int, state):
        super().__init__(message)
        self.step = step
        self.state = state


@dataclass
class Trajectory:
    states: np.ndarray  # [N+1, n]
    path: WienerPath
    scheme: str = SCHEME
    model: str = ""

    @property
    def grid(self) -> np.ndarray:
        return self.path.grid

    def to_csv(self, fh=None, names=None) -> str:
        return write_csv(self, fh, names)


def coefficient_function(sde: ItoSDE):
    """Vectorized ``(t, x[n, P]) -> (f[n, P], sigma[n, m, P])``."""
    n, m = sde.n, sde.m
    fn = Compiled(list(sde.f) + [e for row in sde.sigma for e in row])

    def coeffs(t, x):
        P = x.shape[1]
        vals = fn(t, x, np.zeros((m, P)), sde.constants)
        arr = np.array([np.broadcast_to(np.asarray(v, float), (P,)) for v in vals])
        return arr[:n], arr[n:].reshape(n, m, P)

    return coeffs


def em_ensemble(sde: ItoSDE, x0, grid, dW, on_nonfinite: str = "raise", record_every: int = 1) -> np.ndarray:
    """Integrate P paths at once.

    ``x0`` has shape [n] or [n, P]; ``dW`` has shape [N, m, P]. Returns the
    states at every ``record_every``-th grid point (and the last), shape
    [K, n, P]. ``on_nonfinite="keep"`` lets diverged paths carry inf/nan
    instead of raising.
    """
    grid = np.asarray(grid, float)
    check_grid(grid)
    dW = np.asarray(dW, float)
    N, m, P = dW.shape
    if N != grid.shape[0] - 1 or m != sde.m:
        raise ValueError("increments do not match the grid or the model")
    x = np.array(x0, dtype=float)
    if x.ndim == 1:
        x = np.repeat(x[:, None], P, axis=1)
    if x.shape != (sde.n, P):
        raise ValueError(f"initial state must have shape ({sde.n},) or ({sde.n}, {P})")
    coeffs = coefficient_function(sde)
    keep = list(range(0, N + 1, record_every))
    if keep[-1] != N:
        keep.append(N)
    out = np.empty((len(keep), sde.n, P))
    slot = 0
    if keep[0] == 0:
        out[0] = x
        slot = 1
    h = np.diff(grid)
    with np.errstate(all="ignore"):
        for j in range(N):
            f, s = coeffs(grid[j], x)
            if on_nonfinite == "raise" and not (np.isfinite(f).all() and np.isfinite(s).all()):
                bad = int(np.nonzero(~(np.isfinite(f).all(0) & np.isfinite(s).all((0, 1))))[0][0])
                raise SimulationError(f"coefficients undefined at step {j}", j, x[:, bad].copy())
            x = x + f * h[j] + np.einsum("ikp,kp->ip", s, dW[j])
            if slot < len(keep) and keep[slot] == j + 1:
                out[slot] = x
                slot += 1
    return out


def euler_maruyama(sde: ItoSDE, x0, path: WienerPath) -> Trajectory:
    """x_{j+1} = x_j + f(x_j, t_j) h + sigma(x_j, t_j) dW_j along one path."""
    dW = np.asarray(path.increments, float)[:, :, None]
    states = em_ensemble(sde, np.asarray(x0, float), path.grid, dW)[:, :, 0]
    return Trajectory(states, path, SCHEME, sde.name)


def write_csv(traj: Trajectory, fh=None, names=None) -> str:
    """CSV with header ``t,x1..xn,w1..wm`` and 17 significant digits."""
    n = traj.states.shape[1]
    w = traj.path.cumulative()
    m = w.shape[1]
    names = list(names) if names else [f"x{i + 1}" for i in range(n)]
    header = ",".join(["t"] + names + [f"w{k + 1}" for k in range(m)])
    data = np.column_stack([traj.grid, traj.states, w])
    buf = io.StringIO()
    np.savetxt(buf, data, fmt="%.17g", delimiter=",", header=header, comments="")
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text
