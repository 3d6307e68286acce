"""Reproducible Wiener increments from a counter-based generator.

Each path has its own Philox4x64-10 stream keyed by ``(seed, path_index)``.
Raw 64-bit words become uniforms ``((raw >> 11) + 0.5) * 2**-53`` in (0, 1)
and normals through the inverse normal CDF, so the output depends only on
the key and the counter, never on platform, thread count or call order.
Word ``j*m + k`` of a path's stream gives increment ``(j, k)``; the stream
is the concatenation of the 4-word Philox blocks for counters 1, 2, 3, ...
(numpy's ``Philox`` convention).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

GENERATOR_ID = "philox4x64-10/ndtri-v1"
_MASK64 = (1 << 64) - 1
# substreams for things other than Wiener increments (e.g. initial clouds)
AUX_STREAM = 1 << 63


class GridError(ValueError):
    pass


def uniform_grid(T: float, N: int, t0: float = 0.0) -> np.ndarray:
    if N < 1:
        raise GridError("a grid needs at least one step")
    return t0 + (T - t0) * np.arange(N + 1) / N


def check_grid(grid) -> float:
    """Return the step of a uniform, strictly increasing grid."""
    g = np.asarray(grid, float)
    if g.ndim != 1 or g.shape[0] < 2:
        raise GridError("a grid needs at least two points")
    d = np.diff(g)
    h = (g[-1] - g[0]) / (g.shape[0] - 1)
    if not np.all(d > 0) or np.max(np.abs(d - h)) > 1e-9 * max(1.0, abs(h)):
        raise GridError("grid is not uniform and strictly increasing")
    return float(h)


def raw_stream(seed: int, index: int, count: int) -> np.ndarray:
    bg = np.random.Philox(key=np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64))
    return bg.random_raw(count)


def uniforms(seed: int, index: int, count: int) -> np.ndarray:
    raw = raw_stream(seed, index, count)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def standard_normals(seed: int, index: int, count: int) -> np.ndarray:
    return ndtri(uniforms(seed, index, count))


@dataclass(frozen=True)
class WienerPath:
    grid: np.ndarray
    increments: np.ndarray  # [N, m]
    seed: int = 0
    path_index: int = 0
    generator_id: str = GENERATOR_ID

    @property
    def N(self) -> int:
        return self.increments.shape[0]

    @property
    def m(self) -> int:
        return self.increments.shape[1]

    @property
    def h(self) -> float:
        return check_grid(self.grid)

    def cumulative(self) -> np.ndarray:
        """w(t_j) with w(t_0) = 0, shape [N+1, m]."""
        out = np.zeros((self.N + 1, self.m))
        out[1:] = np.cumsum(self.increments, axis=0)
        return out

    def coarsen(self, factor: int) -> "WienerPath":
        return coarsen(self, factor)


def sample_wiener(m: int, grid, seed: int, path_index: int = 0) -> WienerPath:
    grid = np.asarray(grid, float)
    h = check_grid(grid)
    N = grid.shape[0] - 1
    z = standard_normals(seed, path_index, N * m).reshape(N, m) if m else np.zeros((N, 0))
    return WienerPath(grid, z * np.sqrt(h), seed, path_index)


def sample_ensemble(m: int, grid, seed: int, P: int) -> np.ndarray:
    """Increments for paths 0..P-1, shape [N, m, P]."""
    grid = np.asarray(grid, float)
    h = check_grid(grid)
    N = grid.shape[0] - 1
    out = np.empty((N, m, P))
    for p in range(P):
        out[:, :, p] = standard_normals(seed, p, N * m).reshape(N, m) * np.sqrt(h)
    return out


def coarsen_increments(dW: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` fine increments (axis 0)."""
    N = dW.shape[0]
    if factor < 1 or N % factor:
        raise GridError(f"cannot coarsen {N} steps by a factor of {factor}")
    return dW.reshape((N // factor, factor) + dW.shape[1:]).sum(axis=1)


def coarsen(path: WienerPath, factor: int) -> WienerPath:
    """Sub-summing refinement: the coarse path whose increments are sums of the fine ones."""
    dW = coarsen_increments(path.increments, factor)
    return WienerPath(path.grid[::factor].copy(), dW, path.seed, path.path_index, path.generator_id)


def aux_uniforms(seed: int, path_index: int, count: int) -> np.ndarray:
    """Uniforms from the auxiliary substream of a path (independent of its increments)."""
    return uniforms(seed, path_index | AUX_STREAM, count)
