"""
Single-fidelity Gaussian process regression on scalar inputs.

Inputs are mapped affinely to ``[0, 1]`` and targets are standardized
before training; hyperparameters live in those internal units and
predictions are returned in the original ones.  Hyperparameters are
trained by multi-start L-BFGS on the log marginal likelihood with its
analytic gradient.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .errors import DegenerateDataWarning, NotPositiveDefinite

LOG_2PI = math.log(2.0 * math.pi)
JITTER_START = 1e-10
JITTER_MAX = 1e-4
SIGNAL_FLOOR = 1e-10

# log-space training box, internal units
LENGTHSCALE_BOUNDS = (5e-2, 10.0)
SIGNAL_BOUNDS = (1e-4, 1e2)
NOISE_BOUNDS = (1e-10, 1.0)


@dataclass(frozen=True)
class KernelHyper:
    lengthscale: float = 0.2
    signal_variance: float = 1.0
    noise_variance: float = 1e-2

    def __post_init__(self):
        if not (self.lengthscale > 0 and self.signal_variance > 0 and self.noise_variance >= 0):
            raise ValueError(f"invalid hyperparameters {self}")
        if not all(map(math.isfinite, (self.lengthscale, self.signal_variance,
                                       self.noise_variance))):
            raise ValueError("hyperparameters must be finite")


def rbf(x, x2, hyper: KernelHyper):
    """Squared-exponential covariance ``sf2 * exp(-(x - x')^2 / (2 l^2))``.

    Broadcasts: two 1D arrays give the full cross-covariance matrix,
    two scalars give a scalar.
    """
    a = np.asarray(x, dtype=float)
    b = np.asarray(x2, dtype=float)
    if a.ndim == 0 and b.ndim == 0:
        d = float(a - b)
        return hyper.signal_variance * math.exp(-0.5 * d * d / hyper.lengthscale**2)
    d = np.atleast_1d(a)[:, None] - np.atleast_1d(b)[None, :]
    return hyper.signal_variance * np.exp(-0.5 * (d / hyper.lengthscale) ** 2)


def _factor(K, signal_variance):
    """Cholesky of ``K`` with the jitter ladder; returns (L, jitter)."""
    jitter = JITTER_START * signal_variance
    n = K.shape[0]
    while True:
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(n))
            return L, jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > JITTER_MAX * signal_variance * (1 + 1e-9):
                raise NotPositiveDefinite("covariance not positive definite after max jitter")


def log_marginal_likelihood(x, y, hyper: KernelHyper) -> float:
    """Log marginal likelihood of zero-mean data under the RBF prior plus noise.

    ``-1/2 y^T alpha - sum(log diag L) - n/2 log(2 pi)`` with ``L`` the
    Cholesky factor of ``K + (sn2 + jitter) I``.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    K = rbf(x, x, hyper) + hyper.noise_variance * np.eye(len(x))
    L, _ = _factor(K, hyper.signal_variance)
    alpha = cho_solve((L, True), y)
    return float(-0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(x) * LOG_2PI)


def _params_to_hyper(p) -> KernelHyper:
    log_l, log_sf, log_sn = p
    return KernelHyper(math.exp(log_l), math.exp(2 * log_sf), math.exp(2 * log_sn))


def lml_and_grad(x, y, log_params):
    """LML and its gradient w.r.t. ``(log l, log sigma_f, log sigma_n)``."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    hyper = _params_to_hyper(log_params)
    n = len(x)
    d2 = (x[:, None] - x[None, :]) ** 2
    Kf = hyper.signal_variance * np.exp(-0.5 * d2 / hyper.lengthscale**2)
    K = Kf + hyper.noise_variance * np.eye(n)
    L, _ = _factor(K, hyper.signal_variance)
    alpha = cho_solve((L, True), y)
    lml = -0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * LOG_2PI
    Kinv = cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - Kinv
    dK = (
        Kf * d2 / hyper.lengthscale**2,   # d/dlog l
        2.0 * Kf,                          # d/dlog sigma_f
        2.0 * hyper.noise_variance * np.eye(n),  # d/dlog sigma_n
    )
    grad = np.array([0.5 * np.sum(W * g) for g in dK])
    return float(lml), grad


@dataclass
class GPModel:
    """Trained GP; immutable after construction by :func:`fit`."""

    x: np.ndarray
    y: np.ndarray
    hyper: KernelHyper
    x_offset: float
    x_scale: float
    y_mean: float
    y_scale: float
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    jitter: float
    log_marginal_likelihood: float
    degenerate: bool = False

    @property
    def n(self) -> int:
        return len(self.x)

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.x_offset) / self.x_scale

    def predict(self, x_star):
        return predict(self, x_star)

    def summary(self) -> dict:
        """Hyperparameters in original units plus the internal LML."""
        return {
            "lengthscale": float(self.hyper.lengthscale * self.x_scale),
            "signal_variance": float(self.hyper.signal_variance * self.y_scale**2),
            "noise_variance": float(self.hyper.noise_variance * self.y_scale**2),
            "n": int(self.n),
            "log_marginal_likelihood": float(self.log_marginal_likelihood),
        }


def _condition(xn, ys, hyper):
    K = rbf(xn, xn, hyper) + hyper.noise_variance * np.eye(len(xn))
    L, jitter = _factor(K, hyper.signal_variance)
    alpha = cho_solve((L, True), ys)
    lml = -0.5 * ys @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(xn) * LOG_2PI
    return L, alpha, jitter, float(lml)


def condition(x, y, hyper: KernelHyper, x_offset: float, x_scale: float,
              y_mean: float = 0.0, y_scale: float = 1.0) -> GPModel:
    """Condition on data with fixed hyperparameters and normalization.

    ``hyper`` is in internal units: inputs ``(x - x_offset) / x_scale``
    and targets ``(y - y_mean) / y_scale``.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    L, alpha, jitter, lml = _condition((x - x_offset) / x_scale, (y - y_mean) / y_scale, hyper)
    return GPModel(x, y, hyper, float(x_offset), float(x_scale), float(y_mean), float(y_scale),
                   L, alpha, jitter, lml)


def fit(
    x,
    y,
    init_hyper: KernelHyper | None = None,
    restarts: int = 8,
    seed: int = 0,
    domain: tuple[float, float] | None = None,
    degenerate_tol: float | None = None,
) -> GPModel:
    """Train a GP by maximizing the log marginal likelihood.

    Parameters
    ----------
    x, y : array_like
        Training inputs and targets.
    init_hyper : KernelHyper, optional
        First optimizer start, in internal units. Defaults to
        ``KernelHyper(0.2, 1.0, 1e-2)``.
    restarts : int
        Number of optimizer starts; the first uses ``init_hyper``, the rest
        are drawn uniformly in the log box from ``seed``.  ``0`` skips
        training and conditions on ``init_hyper`` directly.
    domain : (low, high), optional
        Interval mapped to ``[0, 1]``; defaults to the range of ``x``.
    degenerate_tol : float, optional
        Targets whose standard deviation is at or below this are treated as
        constant.  Default ``1e-12 * max(1, |mean|)``.

    Notes
    -----
    Constant targets emit :class:`DegenerateDataWarning` and return a model
    that predicts the constant with the signal variance at its floor.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape or x.size < 1:
        raise ValueError("x and y must be non-empty and of equal length")
    init = init_hyper or KernelHyper()

    if domain is None:
        lo, hi = float(x.min()), float(x.max())
    else:
        lo, hi = map(float, domain)
    x_scale = hi - lo if hi > lo else 1.0
    xn = (x - lo) / x_scale

    y_mean = float(y.mean())
    y_std = float(y.std())
    tol = 1e-12 * max(1.0, abs(y_mean)) if degenerate_tol is None else degenerate_tol
    if y.size >= 2 and y_std <= tol:
        warnings.warn("constant training targets; returning prior-mean model",
                      DegenerateDataWarning, stacklevel=2)
        hyper = KernelHyper(init.lengthscale, SIGNAL_FLOOR, 0.0)
        ys = np.zeros_like(y)
        L, alpha, jitter, lml = _condition(xn, ys, hyper)
        return GPModel(x, y, hyper, lo, x_scale, y_mean, 1.0, L, alpha, jitter, lml,
                       degenerate=True)

    y_scale = y_std if y.size >= 2 else 1.0
    ys = (y - y_mean) / y_scale

    if restarts <= 0 or y.size < 2:
        hyper = init
    else:
        hyper = optimize_hyper(lambda p: lml_and_grad(xn, ys, p), init, restarts, seed)
    return condition(x, y, hyper, lo, x_scale, y_mean, y_scale)


def optimize_hyper(objective, init: KernelHyper, restarts: int, seed: int) -> KernelHyper:
    """Multi-start L-BFGS-B maximization in ``(log l, log sigma_f, log sigma_n)``.

    ``objective(p)`` returns ``(value, gradient)`` and may raise
    :class:`NotPositiveDefinite`.  The first start is ``init``; the others
    are uniform in the training box, drawn from ``seed``.
    """
    box = np.log([
        LENGTHSCALE_BOUNDS,
        np.sqrt(SIGNAL_BOUNDS),
        np.sqrt(NOISE_BOUNDS),
    ])
    rng = np.random.default_rng(seed)
    p0 = np.log([init.lengthscale, math.sqrt(init.signal_variance),
                 math.sqrt(max(init.noise_variance, NOISE_BOUNDS[0]))])
    starts = [np.clip(p0, box[:, 0], box[:, 1])]
    for _ in range(restarts - 1):
        starts.append(box[:, 0] + rng.random(3) * (box[:, 1] - box[:, 0]))

    def neg(p):
        try:
            v, g = objective(p)
        except NotPositiveDefinite:
            return 1e25, np.zeros(3)
        return -v, -g

    best_p, best_v = starts[0], np.inf
    for p in starts:
        res = minimize(neg, p, jac=True, method="L-BFGS-B", bounds=box)
        if np.isfinite(res.fun) and res.fun < best_v:
            best_p, best_v = res.x, res.fun
    return _params_to_hyper(best_p)


def predict(model: GPModel, x_star):
    """Posterior mean and latent variance at ``x_star`` (original units)."""
    xs = np.atleast_1d(np.asarray(x_star, dtype=float)).ravel()
    xn = (model.x - model.x_offset) / model.x_scale
    xsn = (xs - model.x_offset) / model.x_scale
    h = model.hyper
    Ks = rbf(xsn, xn, h)
    mu = Ks @ model.alpha
    v = solve_triangular(model.chol, Ks.T, lower=True)
    var = h.signal_variance - np.sum(v * v, axis=0)
    var = np.maximum(var, 0.0)
    mu = model.y_mean + model.y_scale * mu
    var = model.y_scale**2 * var
    if np.ndim(x_star) == 0:
        return float(mu[0]), float(var[0])
    return mu, var
