"""Sampling points on level sets {J = c} of configurational or phase functions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exprcore import Compiled, Expr, SampleDomain, diff, parse

LEVEL_TOL = 1e-10


class LevelSetSamplingError(RuntimeError):
    """Could not produce enough points on the level set."""


@dataclass(frozen=True)
class NewtonProjection:
    """Project random box points onto {J = c} by damped Newton steps along grad J."""

    box: SampleDomain = field(default_factory=SampleDomain)
    max_iter: int = 50
    tol: float = 1e-12
    retry_factor: int = 20

    def as_dict(self) -> dict:
        return {"kind": "newton", "box": self.box.as_dict(), "max_iter": self.max_iter, "tol": self.tol}


@dataclass(frozen=True)
class Parametrization:
    """Explicit points x_i(u_1..u_d); parameters drawn uniformly from ``box``.

    Parameter expressions use ``x1..xd`` as the parameter names.
    """

    params: tuple
    box: tuple
    t: tuple = (0.1, 2.0)
    w: tuple = (-1.0, 1.0)

    def as_dict(self) -> dict:
        return {"kind": "param", "params": [str(p) for p in self.params], "box": [list(b) for b in self.box]}


@dataclass(frozen=True)
class LevelSetSpec:
    J: Expr
    c: float
    sampler: object = field(default_factory=NewtonProjection)


@dataclass
class LevelSample:
    t: np.ndarray
    x: np.ndarray  # [n, N]
    w: np.ndarray  # [m, N]
    level_error: np.ndarray
    attempts: int


def sampler_from_dict(d: Mapping | None, d_params: int | None = None):
    if not d or d.get("kind", "newton") == "newton":
        d = d or {}
        return NewtonProjection(
            SampleDomain.from_dict(d.get("box")),
            int(d.get("max_iter", 50)),
            float(d.get("tol", 1e-12)),
        )
    params = d["params"]
    dd = d_params or len(d["box"])
    exprs = tuple(parse(p, (dd, 0)) for p in params)
    return Parametrization(exprs, tuple(tuple(map(float, b)) for b in d["box"]))


def sample_level_set(
    spec: LevelSetSpec,
    n: int,
    m: int,
    count: int,
    consts: Mapping[str, float] | None = None,
    seed: int = 0,
) -> LevelSample:
    """Draw ``count`` points with |J - c| <= LEVEL_TOL."""
    rng = np.random.default_rng(seed)
    s = spec.sampler
    jfun = Compiled([spec.J])
    if isinstance(s, Parametrization):
        d = len(s.box)
        u = np.array([rng.uniform(lo, hi, count) for lo, hi in s.box]).reshape(d, count)
        xs = Compiled(list(s.params))(0.0, u, [], consts)
        x = np.array([np.broadcast_to(np.asarray(v, float), (count,)) for v in xs])
        t = rng.uniform(s.t[0], s.t[1], count)
        w = np.array([rng.uniform(s.w[0], s.w[1], count) for _ in range(m)]).reshape(m, count)
        err = np.abs(np.broadcast_to(np.asarray(jfun(t, x, w, consts)[0], float), (count,)) - spec.c)
        ok = err <= LEVEL_TOL
        if ok.sum() < count:
            raise LevelSetSamplingError("parametrization points are off the level set")
        return LevelSample(t, x, w, err, count)
    grad = Compiled([diff(spec.J, ("x", i)) for i in range(1, n + 1)])
    got_t, got_x, got_w, got_e = [], [], [], []
    have = 0
    attempts = 0
    cap = s.retry_factor * count
    while have < count and attempts < cap:
        batch = min(2 * (count - have) + 8, cap - attempts)
        attempts += batch
        t, x, w = s.box.draw(n, m, batch, rng)
        x = x.copy()
        converged = np.zeros(batch, bool)
        for _ in range(s.max_iter):
            g = np.broadcast_to(np.asarray(jfun(t, x, w, consts)[0], float), (batch,)) - spec.c
            converged = np.abs(g) <= s.tol
            if converged.all():
                break
            gr = np.array([np.broadcast_to(np.asarray(v, float), (batch,)) for v in grad(t, x, w, consts)])
            nrm = np.sum(gr * gr, axis=0)
            with np.errstate(all="ignore"):
                step = np.where(nrm > 0, g / nrm, 0.0)
            # damping: never move more than the box scale in one step
            scale = np.sqrt(nrm) * np.abs(step)
            damp = np.where(scale > 1.0, 1.0 / np.maximum(scale, 1e-300), 1.0)
            upd = np.where(converged, 0.0, step * damp)
            x = x - gr * upd
        g = np.broadcast_to(np.asarray(jfun(t, x, w, consts)[0], float), (batch,)) - spec.c
        # non-converged draws are rejected
        ok = np.isfinite(g) & (np.abs(g) <= min(s.tol, LEVEL_TOL))
        idx = np.nonzero(ok)[0][: count - have]
        got_t.append(t[idx])
        got_x.append(x[:, idx])
        got_w.append(w[:, idx])
        got_e.append(np.abs(g[idx]))
        have += len(idx)
    if have < count:
        raise LevelSetSamplingError(f"Newton projection produced {have} of {count} level-set points")
    return LevelSample(
        np.concatenate(got_t),
        np.concatenate(got_x, axis=1),
        np.concatenate(got_w, axis=1),
        np.concatenate(got_e),
        attempts,
    )


def evaluate_on_samples(exprs: Sequence[Expr], sample: LevelSample, consts=None) -> np.ndarray:
    vals = Compiled(list(exprs))(sample.t, sample.x, sample.w, consts)
    N = sample.t.shape[0]
    return np.array([np.broadcast_to(np.asarray(v, float), (N,)) for v in vals])
