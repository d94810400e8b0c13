"""Global-best particle swarm optimizer for bounded scalar objectives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class SwarmConfig:
    particles: int = 16
    iterations: int = 50
    inertia: float = 0.7298
    cognitive: float = 1.49618
    social: float = 1.49618
    max_velocity_fraction: float = 0.5  # of the box width per step


@dataclass
class PSOResult:
    best_x: np.ndarray
    best_f: float
    trace: np.ndarray  # best-seen misfit after each iteration (index 0 = initial swarm)
    n_evals: int


def fit_parameters_pso(
    objective: Callable[[np.ndarray], float],
    bounds: Sequence[tuple[float, float]],
    swarm: SwarmConfig | None = None,
    seed: int = 0,
) -> PSOResult:
    """Minimize ``objective`` over a box with a particle swarm.

    Positions that leave the box are reflected back and their velocity
    component is reversed.  Non-finite misfits are treated as ``inf``.
    The run is fully determined by ``seed``.

    Parameters
    ----------
    objective : callable
        Maps a candidate vector (shape ``(d,)``) to a scalar misfit.
    bounds : sequence of (low, high)
        Finite per-parameter intervals with ``low < high``.
    swarm : SwarmConfig, optional
    seed : int

    Returns
    -------
    PSOResult
        Best-seen candidate, its misfit, and the non-increasing trace.
    """
    cfg = swarm or SwarmConfig()
    b = np.asarray(bounds, dtype=float).reshape(-1, 2)
    lo, hi = b[:, 0], b[:, 1]
    if b.size == 0 or not np.all(np.isfinite(b)) or np.any(hi <= lo):
        raise ValueError("bounds must be finite, non-empty intervals")
    if cfg.particles < 4:
        raise ValueError("need at least 4 particles")

    rng = np.random.default_rng(seed)
    d = len(lo)
    width = hi - lo
    vmax = cfg.max_velocity_fraction * width

    def evaluate(x):
        v = float(objective(x.copy()))
        return v if np.isfinite(v) else np.inf

    pos = lo + rng.random((cfg.particles, d)) * width
    vel = (rng.random((cfg.particles, d)) * 2 - 1) * vmax
    fit = np.array([evaluate(p) for p in pos])
    pbest, pbest_f = pos.copy(), fit.copy()
    g = int(np.argmin(pbest_f))
    gbest, gbest_f = pbest[g].copy(), pbest_f[g]
    trace = [gbest_f]
    n_evals = cfg.particles

    for _ in range(cfg.iterations):
        r1 = rng.random((cfg.particles, d))
        r2 = rng.random((cfg.particles, d))
        vel = (cfg.inertia * vel
               + cfg.cognitive * r1 * (pbest - pos)
               + cfg.social * r2 * (gbest - pos))
        vel = np.clip(vel, -vmax, vmax)
        pos = pos + vel
        # reflect at the walls
        below, above = pos < lo, pos > hi
        pos = np.where(below, 2 * lo - pos, pos)
        pos = np.where(above, 2 * hi - pos, pos)
        pos = np.clip(pos, lo, hi)
        vel = np.where(below | above, -vel, vel)

        fit = np.array([evaluate(p) for p in pos])
        n_evals += cfg.particles
        improved = fit < pbest_f
        pbest[improved] = pos[improved]
        pbest_f[improved] = fit[improved]
        g = int(np.argmin(pbest_f))
        if pbest_f[g] < gbest_f:
            gbest, gbest_f = pbest[g].copy(), pbest_f[g]
        trace.append(gbest_f)

    return PSOResult(best_x=gbest, best_f=float(gbest_f), trace=np.array(trace), n_evals=n_evals)
