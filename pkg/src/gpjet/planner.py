"""
Acquisition functions and sequential design loops.

Every acquisition is expressed for maximization: the planner picks the
candidate with the largest value.  Minimization problems are handled by
negating the posterior mean before scoring (PI, EI) or by scoring
``-(mu - kappa * sigma)`` (LCB).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from . import gp_core, multi_fidelity
from .errors import GPJetError, GridExhausted, UnstableRegime

KINDS = ("variance", "pi", "ei", "lcb")
_ALIASES = {
    "variance": "variance",
    "probabilityofimprovement": "pi",
    "pi": "pi",
    "expectedimprovement": "ei",
    "ei": "ei",
    "lowerconfidencebound": "lcb",
    "lcb": "lcb",
}
Z95 = 1.96
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class AcquisitionSpec:
    """Acquisition kind and its parameters.

    ``xi=None`` means ``0.01 * std(y)`` of the current observations.
    """

    kind: str = "variance"
    xi: float | None = None
    kappa: float = 2.0

    def __post_init__(self):
        k = _ALIASES.get(str(self.kind).replace("_", "").replace(" ", "").lower())
        if k is None:
            raise ValueError(f"unknown acquisition kind {self.kind!r}")
        object.__setattr__(self, "kind", k)
        if self.xi is not None and self.xi < 0:
            raise ValueError("xi must be >= 0")
        if not self.kappa > 0:
            raise ValueError("kappa must be > 0")


def _pdf(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def probability_of_improvement(mu, sigma, f_best, xi=0.0):
    mu, sigma = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    pos = sigma > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (mu - f_best - xi) / np.where(pos, sigma, 1.0)
    return np.where(pos, ndtr(z), 0.0)


def expected_improvement(mu, sigma, f_best, xi=0.0):
    mu, sigma = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    pos = sigma > 0
    s = np.where(pos, sigma, 1.0)
    imp = mu - f_best - xi
    z = imp / s
    return np.where(pos, imp * ndtr(z) + s * _pdf(z), 0.0)


def acquire(spec: AcquisitionSpec, mu, sigma, f_best=None, xi=None):
    """Acquisition values in maximization form.

    ``f_best`` is the incumbent for PI and EI.  ``xi`` overrides
    ``spec.xi`` (the loops pass the data-dependent default here).
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise ValueError("sigma must be >= 0")
    if spec.kind == "variance":
        out = sigma**2
    elif spec.kind == "lcb":
        out = -(np.asarray(mu, dtype=float) - spec.kappa * sigma)
    else:
        if f_best is None:
            raise ValueError(f"{spec.kind} needs an incumbent f_best")
        x = spec.xi if xi is None else xi
        x = 0.0 if x is None else x
        fn = expected_improvement if spec.kind == "ei" else probability_of_improvement
        out = fn(mu, sigma, f_best, x)
    return float(out) if out.ndim == 0 else out


def grid_argmax(values, candidates, mask=None) -> int:
    """Index of the largest value; ties go to the smallest candidate."""
    v = np.asarray(values, dtype=float)
    c = np.asarray(candidates, dtype=float)
    ok = np.ones(len(v), bool) if mask is None else np.asarray(mask, bool)
    ok = ok & ~np.isnan(v)
    if not ok.any():
        raise GridExhausted("no admissible candidate left")
    best = np.max(v[ok])
    tied = np.flatnonzero(ok & (v == best))
    return int(tied[np.argmin(c[tied])])


def propose_next(
    model,
    candidates,
    spec: AcquisitionSpec,
    observed: Sequence[float] = (),
    f_best: float | None = None,
    minimize: bool = False,
    xi: float | None = None,
    mask=None,
    transform: Callable | None = None,
) -> float:
    """Grid argmax of the acquisition over unobserved candidates.

    Parameters
    ----------
    model
        Anything with ``predict(x) -> (mu, var)``.
    candidates : array_like
        Candidate inputs, in the units the caller works in.
    observed : sequence of float
        Inputs already measured; excluded within 1e-9.
    f_best : float, optional
        Incumbent; the best observed value in the direction of
        ``minimize``.
    transform : callable, optional
        Maps candidates to the model's input coordinate.

    Raises
    ------
    GridExhausted
        If every candidate is observed or masked out.
    """
    cand = np.asarray(candidates, dtype=float).ravel()
    if cand.size == 0:
        raise GridExhausted("empty candidate grid")
    u = cand if transform is None else transform(cand)
    mu, var = model.predict(u)
    sigma = np.sqrt(np.maximum(var, 0.0))
    if minimize:
        if spec.kind in ("pi", "ei"):
            values = acquire(spec, -mu, sigma, None if f_best is None else -f_best, xi)
        else:
            values = acquire(spec, mu, sigma, f_best, xi)
    else:
        if spec.kind == "lcb":
            # upper bound for maximization
            values = mu + spec.kappa * sigma
        else:
            values = acquire(spec, mu, sigma, f_best, xi)
    ok = np.ones(cand.size, bool) if mask is None else np.asarray(mask, bool).copy()
    obs = np.asarray(observed, dtype=float)
    if obs.size:
        ok &= np.min(np.abs(cand[:, None] - obs[None, :]), axis=1) > 1e-9
    return float(cand[grid_argmax(values, cand, ok)])


# ---------------------------------------------------------------------------
# metrics and records


def metrics(model, eval_grid, truth, best_so_far=None, true_opt=None, transform=None) -> dict:
    """RMSE against truth, mean 95% CI width, and regret."""
    g = np.asarray(eval_grid, dtype=float)
    if g.size == 0:
        raise ValueError("empty evaluation grid")
    mu, var = model.predict(g if transform is None else transform(g))
    rmse = float(np.sqrt(np.mean((mu - np.asarray(truth, dtype=float)) ** 2)))
    mciw = float(np.mean(2 * Z95 * np.sqrt(np.maximum(var, 0.0))))
    out = {"rmse": rmse, "mciw": mciw, "min_regret": None}
    if best_so_far is not None and true_opt is not None:
        out["min_regret"] = float(best_so_far - true_opt)
    return out


@dataclass
class IterationRecord:
    iter: int
    x: float
    y: float
    rmse: float | None
    mciw: float | None
    min_regret: float | None = None
    failed: bool = False
    model: dict | None = None


@dataclass
class RunRecord:
    """Per-iteration history of a design loop.

    ``iterations[0]`` holds the metrics of the model fitted on the
    initial points (with the last initial point as its ``x``); later
    entries are one per acquisition.  Failed queries carry
    ``failed=True`` and the penalty value as ``y``.
    """

    kind: str
    iterations: list[IterationRecord] = field(default_factory=list)
    initial_x: list[float] = field(default_factory=list)
    initial_y: list[float] = field(default_factory=list)
    aborted: str | None = None
    best_x: float | None = None
    best_y: float | None = None

    @property
    def acquisitions(self) -> list[IterationRecord]:
        return self.iterations[1:]

    @property
    def n_successful(self) -> int:
        return len(self.initial_x) + sum(not r.failed for r in self.acquisitions)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.iterations], dtype=float)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r), sort_keys=True) + "\n" for r in self.iterations)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "x", "y", "rmse", "mciw", "min_regret"])
        for r in self.iterations:
            w.writerow([r.iter, repr(r.x), repr(r.y), _opt(r.rmse), _opt(r.mciw),
                        _opt(r.min_regret)])
        return buf.getvalue()


def _opt(v):
    return "" if v is None else repr(float(v))


# ---------------------------------------------------------------------------
# surrogates


@dataclass
class GPSurrogate:
    """Single-fidelity GP in the (optionally log) input coordinate.

    Hyperparameters are trained once the design holds at least
    ``min_train`` points; smaller designs are conditioned on the default
    initial hyperparameters.  With ``train="initial"`` the first trained
    hyperparameters and target scaling are kept for the rest of the run,
    so later fits only condition on the new data.
    """

    domain: tuple[float, float]
    log_inputs: bool = False
    restarts: int = 8
    seed: int = 0
    min_train: int = 4
    train: str = "every"
    _frozen: gp_core.GPModel | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.train not in ("every", "initial"):
            raise ValueError("train must be 'every' or 'initial'")

    def transform(self, x):
        x = np.asarray(x, dtype=float)
        return np.log(x) if self.log_inputs else x

    def fit(self, x, y):
        u = self.transform(x)
        if self._frozen is not None:
            t = self._frozen
            return gp_core.condition(u, y, t.hyper, t.x_offset, t.x_scale, t.y_mean, t.y_scale)
        d = tuple(self.transform(np.asarray(self.domain, dtype=float)))
        restarts = self.restarts if len(u) >= self.min_train else 0
        model = gp_core.fit(u, y, restarts=restarts, seed=self.seed, domain=d)
        if self.train == "initial":
            self._frozen = model
        return model


@dataclass
class MFSurrogate:
    """Two-level model whose low-fidelity design is a base grid plus every
    high-fidelity input, so the nesting always holds.

    ``min_train`` and ``train`` apply to the error level as in
    :class:`GPSurrogate`; the low level is always trained.
    """

    domain: tuple[float, float]
    low_source: Callable[[np.ndarray], np.ndarray]
    x_low: np.ndarray
    log_inputs: bool = False
    restarts: int = 8
    seed: int = 0
    min_train: int = 4
    train: str = "every"
    _frozen: gp_core.GPModel | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.train not in ("every", "initial"):
            raise ValueError("train must be 'every' or 'initial'")

    def transform(self, x):
        x = np.asarray(x, dtype=float)
        return np.log(x) if self.log_inputs else x

    def fit(self, x, y):
        x = np.asarray(x, dtype=float)
        base = np.asarray(self.x_low, dtype=float)
        extra = x[np.min(np.abs(x[:, None] - base[None, :]), axis=1) > 1e-12]
        xl = np.sort(np.concatenate([base, extra]))
        yl = np.asarray(self.low_source(xl), dtype=float)
        d = tuple(self.transform(np.asarray(self.domain, dtype=float)))
        err_restarts = self.restarts if len(x) >= self.min_train else 0
        model = multi_fidelity.fit_mf(self.transform(xl), yl, self.transform(x), y,
                                      seed=self.seed, restarts=self.restarts, domain=d,
                                      err_restarts=err_restarts, err_template=self._frozen)
        if self.train == "initial" and self._frozen is None:
            self._frozen = model.err
        return model


def _initial_points(init, candidates, seed):
    if isinstance(init, dict) and "points" not in init:
        count = int(init["count"])
        rng = np.random.default_rng(init.get("seed", seed))
        idx = rng.choice(len(candidates), size=count, replace=False)
        return [float(candidates[i]) for i in np.sort(idx)]
    pts = init["points"] if isinstance(init, dict) else init
    return [float(p) for p in np.atleast_1d(pts)]


def run_active_learning(
    oracle: Callable[[float], float],
    candidates,
    surrogate,
    spec: AcquisitionSpec | None = None,
    init=None,
    max_iter: int = 6,
    mciw_floor: float | None = None,
    eval_grid=None,
    truth=None,
    seed: int = 0,
) -> RunRecord:
    """Sequential design for learning a function.

    Parameters
    ----------
    oracle : callable
        ``oracle(x) -> y``; may raise :class:`UnstableRegime`, which is
        recorded as a failed iteration and masks that candidate.
    candidates : array_like
        Discrete input grid.
    surrogate
        :class:`GPSurrogate` or :class:`MFSurrogate`.
    init : sequence of float or dict
        Initial inputs, or ``{"count": k, "seed": s}`` to draw ``k`` grid
        points.
    mciw_floor : float, optional
        Stop once the mean CI width falls below this value.  Defaults to 1%
        of the truth range when ``truth`` is given.
    eval_grid, truth : array_like, optional
        Metrics are computed when both are given.
    """
    spec = spec or AcquisitionSpec("variance")
    return _run(oracle, candidates, surrogate, spec, init, max_iter, mciw_floor, eval_grid,
                truth, seed, minimize=False, max_success=None, true_opt=None,
                truth_fn=None, kind="active_learning")


def run_bayesian_optimization(
    oracle: Callable[[float], float],
    candidates,
    surrogate,
    spec: AcquisitionSpec | None = None,
    init=None,
    max_evals: int = 3,
    eval_grid=None,
    truth=None,
    truth_fn: Callable | None = None,
    true_opt: float | None = None,
    seed: int = 0,
    max_queries: int | None = None,
) -> RunRecord:
    """Minimize an expensive oracle over a grid.

    Stops once ``max_evals`` successful observations (initial points
    included) have been made.  A query that raises
    :class:`UnstableRegime` is recorded with a penalty value of twice the
    largest observed ``y``; it is not given to the GP, and it masks every
    candidate at or below the failed input.  ``min_regret`` is the running
    minimum of ``truth_fn(x) - true_opt`` over successful observations.
    """
    spec = spec or AcquisitionSpec("ei")
    return _run(oracle, candidates, surrogate, spec, init, max_queries, None, eval_grid,
                truth, seed, minimize=True, max_success=max_evals, true_opt=true_opt,
                truth_fn=truth_fn, kind="bayesian_optimization")


def _run(oracle, candidates, surrogate, spec, init, max_iter, mciw_floor, eval_grid, truth,
         seed, minimize, max_success, true_opt, truth_fn, kind):
    cand = np.sort(np.asarray(candidates, dtype=float).ravel())
    if init is None:
        init = {"count": 1, "seed": seed}
    x0 = _initial_points(init, cand, seed)
    have_metrics = eval_grid is not None and truth is not None
    if have_metrics and mciw_floor is None and not minimize:
        t = np.asarray(truth, dtype=float)
        mciw_floor = 0.01 * float(t.max() - t.min())
    max_iter = len(cand) if max_iter is None else int(max_iter)

    rec = RunRecord(kind=kind)
    xs, ys = [], []
    mask = np.ones(len(cand), bool)
    regret = math.inf

    def observe(x):
        y = float(oracle(x))
        xs.append(x)
        ys.append(y)
        return y

    def update_regret(x):
        nonlocal regret
        if truth_fn is not None and true_opt is not None:
            regret = min(regret, float(truth_fn(x)) - float(true_opt))
        return None if not math.isfinite(regret) else regret

    for x in x0:
        rec.initial_x.append(x)
        rec.initial_y.append(observe(x))
        update_regret(x)

    def snapshot(model, x, y, failed=False):
        m = {"rmse": None, "mciw": None}
        if have_metrics:
            m = metrics(model, eval_grid, truth, transform=surrogate.transform)
        r = None if not math.isfinite(regret) else float(regret)
        return IterationRecord(iter=len(rec.iterations), x=float(x), y=float(y),
                               rmse=m["rmse"], mciw=m["mciw"], min_regret=r, failed=failed,
                               model=model.summary())

    try:
        model = surrogate.fit(np.array(xs), np.array(ys))
    except GPJetError as exc:
        rec.aborted = f"{type(exc).__name__}: {exc}"
        return rec
    rec.iterations.append(snapshot(model, xs[-1], ys[-1]))

    n_acq = 0
    while n_acq < max_iter:
        if max_success is not None and len(xs) >= max_success:
            break
        if not minimize and mciw_floor is not None and rec.iterations[-1].mciw is not None \
                and rec.iterations[-1].mciw < mciw_floor:
            break
        y_arr = np.array(ys)
        xi = spec.xi if spec.xi is not None else 0.01 * float(y_arr.std())
        f_best = float(y_arr.min() if minimize else y_arr.max())
        try:
            x_next = propose_next(model, cand, spec, observed=xs, f_best=f_best,
                                  minimize=minimize, xi=xi, mask=mask,
                                  transform=surrogate.transform)
        except GridExhausted:
            break
        n_acq += 1
        try:
            y = observe(x_next)
        except UnstableRegime:
            mask &= cand > x_next
            penalty = 2.0 * float(np.max(ys))
            rec.iterations.append(IterationRecord(
                iter=len(rec.iterations), x=x_next, y=penalty,
                rmse=rec.iterations[-1].rmse, mciw=rec.iterations[-1].mciw,
                min_regret=rec.iterations[-1].min_regret, failed=True,
                model=rec.iterations[-1].model))
            continue
        update_regret(x_next)
        try:
            model = surrogate.fit(np.array(xs), np.array(ys))
        except GPJetError as exc:
            rec.aborted = f"{type(exc).__name__}: {exc}"
            break
        rec.iterations.append(snapshot(model, x_next, y))

    i = int(np.argmin(ys) if minimize else np.argmax(ys))
    rec.best_x, rec.best_y = float(xs[i]), float(ys[i])
    return rec
