"""Monte Carlo diagnostics for strong and weak attractivity of an invariant manifold."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..exprcore import Compiled, Expr, to_string
from ..model import ItoSDE
from .integrate import em_ensemble
from .wiener import aux_uniforms, sample_ensemble, uniform_grid

DEFAULT_P = 256
STRONG_FACTOR = 1e-3
WEAK_FACTOR = 0.1


class Verdict(str, enum.Enum):
    STRONG = "Strong"
    WEAK = "Weak"
    NOT_ATTRACTIVE = "NotAttractive"


@dataclass(frozen=True)
class AttractivityConfig:
    """Ensemble settings.

    The initial cloud is uniform in the box ``[lo_i, hi_i]``; point p comes
    from the auxiliary substream of path p. ``eps_strong``/``eps_weak``
    default to 1e-3 and 0.1 times the cloud diameter D, taken as twice the
    largest initial distance to the manifold.
    """

    lo: tuple
    hi: tuple
    T: float = 10.0
    h: float = 0.01
    P: int = DEFAULT_P
    seed: int = 0
    eps_strong: float | None = None
    eps_weak: float | None = None
    record_every: int | None = None

    def as_dict(self) -> dict:
        return {
            "lo": list(self.lo),
            "hi": list(self.hi),
            "T": self.T,
            "h": self.h,
            "P": self.P,
            "seed": self.seed,
            "eps_strong": self.eps_strong,
            "eps_weak": self.eps_weak,
        }


@dataclass
class AttractivityReport:
    T: float
    P: int
    sup: float
    mean: float
    median: float
    q95: float
    times: list
    median_series: list
    sup_series: list
    verdict: Verdict
    eps_strong: float
    eps_weak: float
    diameter: float
    fluctuation_fraction: float
    diverged: int
    cfg: AttractivityConfig | None = None
    distance: str = ""

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "T": self.T,
            "P": self.P,
            "distance": self.distance,
            "sup": self.sup,
            "mean": self.mean,
            "median": self.median,
            "q95": self.q95,
            "eps_strong": self.eps_strong,
            "eps_weak": self.eps_weak,
            "diameter": self.diameter,
            "fluctuation_fraction": self.fluctuation_fraction,
            "diverged": self.diverged,
            "series": {"t": self.times, "median": self.median_series, "sup": self.sup_series},
            "cfg": self.cfg.as_dict() if self.cfg else None,
        }


def initial_cloud(cfg: AttractivityConfig) -> np.ndarray:
    n = len(cfg.lo)
    lo = np.asarray(cfg.lo, float)
    hi = np.asarray(cfg.hi, float)
    u = np.array([aux_uniforms(cfg.seed, p, n) for p in range(cfg.P)]).T  # [n, P]
    return lo[:, None] + (hi - lo)[:, None] * u


def _distances(fn, consts, t, x, m):
    P = x.shape[1]
    with np.errstate(all="ignore"):
        d = np.abs(np.broadcast_to(np.asarray(fn(t, x, np.zeros((m, P)), consts)[0], float), (P,)))
    return np.where(np.isfinite(d), d, np.inf)


def attractivity_diagnostics(sde: ItoSDE, distance: Expr, cfg: AttractivityConfig) -> AttractivityReport:
    """Simulate the ensemble to T and classify the manifold {distance = 0}.

    Strong if the sup over paths of the distance at T is at most eps_strong;
    Weak if the median is at most eps_weak while the sup is larger than
    eps_strong; NotAttractive otherwise. Paths that leave the coefficient
    domain or overflow count as infinitely far.
    """
    if len(cfg.lo) != sde.n or len(cfg.hi) != sde.n:
        raise ValueError("initial cloud box must have n components")
    N = int(round(cfg.T / cfg.h))
    grid = uniform_grid(cfg.T, N)
    dW = sample_ensemble(sde.m, grid, cfg.seed, cfg.P)
    x0 = initial_cloud(cfg)
    every = cfg.record_every or max(1, N // 200)
    states = em_ensemble(sde, x0, grid, dW, on_nonfinite="keep", record_every=every)
    times = list(range(0, N + 1, every))
    if times[-1] != N:
        times.append(N)
    fn = Compiled([distance])
    d0 = _distances(fn, sde.constants, grid[0], x0, sde.m)
    D = 2.0 * float(np.max(d0[np.isfinite(d0)])) if np.isfinite(d0).any() else 1.0
    eps_s = cfg.eps_strong if cfg.eps_strong is not None else STRONG_FACTOR * D
    eps_w = cfg.eps_weak if cfg.eps_weak is not None else WEAK_FACTOR * D
    meds, sups = [], []
    above = 0
    for slot, j in enumerate(times):
        d = _distances(fn, sde.constants, grid[j], states[slot], sde.m)
        meds.append(float(np.median(d)))
        sups.append(float(np.max(d)))
        above += int(np.sum(d > eps_w))
    dT = _distances(fn, sde.constants, grid[-1], states[-1], sde.m)
    finite = dT[np.isfinite(dT)]
    sup = float(np.max(dT))
    med = float(np.median(dT))
    q95 = float(np.quantile(dT, 0.95)) if np.isfinite(dT).all() else float(np.sort(dT)[int(math.ceil(0.95 * (len(dT) - 1)))])
    mean = math.fsum(finite) / len(finite) if len(finite) == len(dT) else float("inf")
    if sup <= eps_s:
        verdict = Verdict.STRONG
    elif med <= eps_w:
        verdict = Verdict.WEAK
    else:
        verdict = Verdict.NOT_ATTRACTIVE
    return AttractivityReport(
        float(cfg.T),
        cfg.P,
        sup,
        float(mean),
        med,
        q95,
        [float(grid[j]) for j in times],
        meds,
        sups,
        verdict,
        float(eps_s),
        float(eps_w),
        D,
        above / (len(times) * cfg.P),
        int(np.sum(~np.isfinite(dT))),
        cfg,
        to_string(distance),
    )
