"""
Two-level recursive multi-fidelity GP.

The high-fidelity function is modelled as ``rho * f_low + f_err``.  The
low level is trained on the low-fidelity data alone; the error level is
trained on the high-fidelity residuals after scaling the low-level
posterior mean, which requires the high-fidelity inputs to be a subset of
the low-fidelity ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import gp_core
from .errors import NestedDesignViolation
from .gp_core import GPModel, KernelHyper

NEST_TOL = 1e-9


@dataclass
class MFModel:
    low: GPModel
    err: GPModel
    rho: float
    x_low: np.ndarray
    x_high: np.ndarray

    @property
    def n_low(self) -> int:
        return len(self.x_low)

    @property
    def n_high(self) -> int:
        return len(self.x_high)

    def predict(self, x_star):
        return predict_mf(self, x_star)

    def summary(self) -> dict:
        return {
            "rho": float(self.rho),
            "low": self.low.summary(),
            "err": self.err.summary(),
            "n_low": self.n_low,
            "n_high": self.n_high,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def check_nested(x_low, x_high, domain, tol: float = NEST_TOL) -> None:
    """Raise :class:`NestedDesignViolation` unless every high input is a low input."""
    lo, hi = domain
    scale = hi - lo if hi > lo else 1.0
    xl = (np.asarray(x_low, dtype=float) - lo) / scale
    xh = (np.asarray(x_high, dtype=float) - lo) / scale
    gap = np.min(np.abs(xh[:, None] - xl[None, :]), axis=1)
    bad = np.flatnonzero(gap > tol)
    if bad.size:
        raise NestedDesignViolation(
            f"high-fidelity inputs not in the low-fidelity design: {np.asarray(x_high)[bad]}")


def fit_mf(
    x_low,
    y_low,
    x_high,
    y_high,
    init: KernelHyper | None = None,
    seed: int = 0,
    restarts: int = 8,
    domain: tuple[float, float] | None = None,
    err_restarts: int | None = None,
    err_template: GPModel | None = None,
) -> MFModel:
    """Fit the recursive two-level model.

    ``rho`` is the least-squares slope of ``y_high`` on the low-level
    posterior mean at ``x_high`` (no intercept; any offset is left to the
    error GP).  ``domain`` defaults to the range of ``x_low`` and is used
    by both levels.  ``err_restarts`` overrides ``restarts`` for the error
    level; ``err_template`` skips its training and reuses the
    hyperparameters and target scaling of an earlier error GP.
    """
    x_low = np.asarray(x_low, dtype=float).ravel()
    y_low = np.asarray(y_low, dtype=float).ravel()
    x_high = np.asarray(x_high, dtype=float).ravel()
    y_high = np.asarray(y_high, dtype=float).ravel()
    if x_high.size < 2 or x_low.size < x_high.size:
        raise ValueError("need n_high >= 2 and n_low >= n_high")
    if x_low.shape != y_low.shape or x_high.shape != y_high.shape:
        raise ValueError("inputs and outputs must have equal lengths")
    if domain is None:
        domain = (float(x_low.min()), float(x_low.max()))
    check_nested(x_low, x_high, domain)
    if err_restarts is None:
        err_restarts = restarts

    low = gp_core.fit(x_low, y_low, init, restarts=restarts, seed=seed, domain=domain)
    mu_low, _ = gp_core.predict(low, x_high)
    denom = float(mu_low @ mu_low)
    rho = float(y_high @ mu_low) / denom if denom > 0 else 1.0
    resid = y_high - rho * mu_low
    if err_template is not None:
        t = err_template
        err = gp_core.condition(x_high, resid, t.hyper, t.x_offset, t.x_scale, t.y_mean,
                                t.y_scale)
    else:
        # residuals at round-off level of the data count as constant
        tol = 1e-6 * max(1.0, float(np.max(np.abs(y_high))))
        err = gp_core.fit(x_high, resid, init, restarts=err_restarts, seed=seed + 1,
                          domain=domain, degenerate_tol=tol)
    return MFModel(low=low, err=err, rho=rho, x_low=x_low, x_high=x_high)


def predict_mf(model: MFModel, x_star):
    """High-fidelity posterior mean and variance.

    ``mu = rho * mu_low + mu_err`` and ``var = rho^2 * var_low + var_err``.
    """
    m_lo, v_lo = gp_core.predict(model.low, x_star)
    m_er, v_er = gp_core.predict(model.err, x_star)
    mu = model.rho * np.asarray(m_lo) + np.asarray(m_er)
    var = np.maximum(model.rho**2 * np.asarray(v_lo) + np.asarray(v_er), 0.0)
    if np.ndim(x_star) == 0:
        return float(mu), float(var)
    return mu, var
