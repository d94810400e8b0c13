"""
Quasistatic geometric model of a viscous thread falling on a moving belt.

The contact point of the thread with the belt is tracked in polar
coordinates ``(r, psi)`` about the point below the nozzle, together with
the tangent angle ``theta`` of the thread at its bottom.  Lengths are in
units of the steady coiling radius ``R_c``; the speed ratio is
``U_c / V_jm`` (belt speed over thread speed).  Deposited traces follow by
adding the belt displacement accumulated since each point was laid.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import IntegrationFailure, NegativeRatio, PoleSingularity, UnstableRegime

COIL_CONSTANT = 0.715
R_MIN_FRACTION = 1e-6


class PatternClass(str, enum.Enum):
    STEADY_COILING = "steady_coiling"
    TRANSLATED_COILING = "translated_coiling"
    ALTERNATING_LOOPS = "alternating_loops"
    W_PATTERN = "w_pattern"
    MEANDERS = "meanders"
    STRAIGHT = "straight"


# Representative ratios of each pattern; band edges sit at the midpoints.
REPRESENTATIVE_RATIOS = {
    PatternClass.TRANSLATED_COILING: 0.23,
    PatternClass.ALTERNATING_LOOPS: 0.48,
    PatternClass.W_PATTERN: 0.64,
    PatternClass.MEANDERS: 0.83,
}
_BAND_EDGES = (0.355, 0.56, 0.735, 1.0)


@dataclass(frozen=True)
class ContactState:
    s: float
    r: float
    psi: float
    theta: float


@dataclass
class ContactPath:
    """Contact-point orbit sampled at fixed arc-length steps."""

    s: np.ndarray
    r: np.ndarray
    psi: np.ndarray
    theta: np.ndarray
    ratio: float
    R_c: float

    def __len__(self):
        return len(self.s)

    def __getitem__(self, i) -> ContactState:
        return ContactState(float(self.s[i]), float(self.r[i]), float(self.psi[i]),
                            float(self.theta[i]))

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.r * np.cos(self.psi), self.r * np.sin(self.psi)])


@dataclass
class Trace:
    points: np.ndarray  # (n, 2), units of R_c
    s: np.ndarray
    ratio: float
    pattern: PatternClass

    def __post_init__(self):
        if len(self.points) < 2 or not np.all(np.isfinite(self.points)):
            raise ValueError("a trace needs at least two finite points")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "x", "y"])
        for s, (x, y) in zip(self.s, self.points):
            w.writerow([repr(float(s)), repr(float(x)), repr(float(y))])
        return buf.getvalue()


def contact_rhs(state: ContactState, ratio: float, R_c: float = 1.0) -> np.ndarray:
    """Arc-length derivatives ``(r', psi', theta')`` of the contact point.

    Raises
    ------
    PoleSingularity
        If ``r <= 1e-6 * R_c``.
    NegativeRatio
        If ``ratio < 0``.
    """
    if ratio < 0:
        raise NegativeRatio(f"speed ratio must be >= 0, got {ratio}")
    if state.r <= R_MIN_FRACTION * R_c:
        raise PoleSingularity(f"r = {state.r:.3g} at the polar pole")
    rp, psip, thp = _field(np.float64(state.r), np.float64(state.psi),
                           np.float64(state.theta), ratio, R_c)
    return np.array([rp, psip, thp], dtype=float)


def _field(r, psi, th, U, Rc):
    phi = th - psi
    c, sn = np.cos(phi), np.sin(phi)
    rp = c + U * np.cos(psi)
    psip = (sn - U * np.sin(psi)) / r
    thp = (1.0 / Rc) * np.sqrt(r / Rc) * (
        1.0 + COIL_CONSTANT**2 * c / (1.0 - COIL_CONSTANT * c) * r) * sn
    return rp, psip, thp


def _rk4_batch(ratios, R_c, s_max, ds, init, record_every=1):
    """Fixed-step RK4 for several speed ratios at once.

    Returns arrays of shape ``(n_ratios, n_samples)`` for r, psi, theta.
    Near the pole the angular rate is held at its last value computed
    away from it.
    """
    U = np.asarray(ratios, dtype=float)
    n = int(round(s_max / ds))
    r0, psi0, th0 = init
    y = np.empty((3, U.size))
    y[0], y[1], y[2] = r0, psi0, th0
    r_min = R_MIN_FRACTION * R_c
    held = np.zeros(U.size)

    def f(state):
        r = state[0]
        safe = r > r_min
        rr = np.where(safe, r, r_min)
        rp, psip, thp = _field(rr, state[1], state[2], U, R_c)
        psip = np.where(safe, psip, held)
        return np.array([rp, psip, thp])

    n_rec = n // record_every + 1
    out = np.empty((3, U.size, n_rec))
    out[:, :, 0] = y
    k = 1
    with np.errstate(invalid="ignore", over="ignore"):
        for i in range(1, n + 1):
            k1 = f(y)
            held = np.where(y[0] > r_min, k1[1], held)
            k2 = f(y + 0.5 * ds * k1)
            k3 = f(y + 0.5 * ds * k2)
            k4 = f(y + ds * k3)
            y = y + (ds / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if i % record_every == 0:
                out[:, :, k] = y
                k += 1
    if not np.all(np.isfinite(out)):
        raise IntegrationFailure("non-finite contact-point state")
    s = np.arange(n_rec) * ds * record_every
    return s, out


def integrate_contact_path(
    ratio: float,
    R_c: float = 1.0,
    s_max: float | None = None,
    ds: float = 0.01,
    init: ContactState | None = None,
) -> ContactPath:
    """Integrate the contact-point equations with fixed-step RK4.

    ``s_max`` defaults to ``200 * R_c`` and must be at least ``100 * R_c``
    so the start-up transient has passed.  The default start is
    ``(r, psi, theta) = (0.1 R_c, 0, pi/2)``.
    """
    if ratio < 0:
        raise NegativeRatio(f"speed ratio must be >= 0, got {ratio}")
    return integrate_contact_paths([ratio], R_c, s_max, ds, init)[0]


def integrate_contact_paths(
    ratios,
    R_c: float = 1.0,
    s_max: float | None = None,
    ds: float = 0.01,
    init: ContactState | None = None,
) -> list[ContactPath]:
    """Vectorized :func:`integrate_contact_path` over several speed ratios."""
    U = np.atleast_1d(np.asarray(ratios, dtype=float))
    if np.any(U < 0):
        raise NegativeRatio(f"speed ratios must be >= 0, got {U.min()}")
    if ds <= 0:
        raise ValueError("ds must be > 0")
    s_max = 200.0 * R_c if s_max is None else float(s_max)
    if s_max < 100.0 * R_c:
        raise ValueError("s_max must be >= 100 * R_c")
    if init is None:
        init = ContactState(0.0, 0.1 * R_c, 0.0, np.pi / 2)
    s, out = _rk4_batch(U, R_c, s_max, ds, (init.r, init.psi, init.theta))
    return [ContactPath(s=s + init.s, r=out[0, k], psi=out[1, k], theta=out[2, k],
                        ratio=float(u), R_c=float(R_c)) for k, u in enumerate(U)]


def reconstruct_trace(path: ContactPath, ratio: float | None = None,
                      T: float | None = None) -> Trace:
    """Deposited trace ``q(s) = r(s) + ratio * (T - s) e_x``.

    Time is measured in units of ``R_c / V_jm`` so a point laid at arc
    length ``s`` has travelled ``ratio * (T - s)`` with the belt by time
    ``T`` (default: the end of the path).
    """
    if len(path) == 0:
        raise ValueError("empty contact path")
    ratio = path.ratio if ratio is None else float(ratio)
    T = float(path.s[-1]) if T is None else float(T)
    pts = path.xy.copy()
    pts[:, 0] += ratio * (T - path.s)
    return Trace(points=pts, s=path.s.copy(), ratio=ratio, pattern=classify_pattern(ratio))


def classify_pattern(ratio: float) -> PatternClass:
    """Pattern band of a speed ratio (edges at midpoints of representative ratios)."""
    if ratio < 0:
        raise NegativeRatio(f"speed ratio must be >= 0, got {ratio}")
    if ratio == 0:
        return PatternClass.STEADY_COILING
    e1, e2, e3, e4 = _BAND_EDGES
    if ratio < e1:
        return PatternClass.TRANSLATED_COILING
    if ratio < e2:
        return PatternClass.ALTERNATING_LOOPS
    if ratio < e3:
        return PatternClass.W_PATTERN
    if ratio < e4:
        return PatternClass.MEANDERS
    return PatternClass.STRAIGHT


# ---------------------------------------------------------------------------
# trace geometry


def count_self_intersections(points: np.ndarray) -> int:
    """Number of proper crossings between non-adjacent segments of a polyline."""
    P = np.asarray(points, dtype=float)
    a, d = P[:-1], np.diff(P, axis=0)
    n = len(a)
    lo = np.minimum(P[:-1], P[1:])
    hi = np.maximum(P[:-1], P[1:])
    count = 0
    for i in range(n - 2):
        j = slice(i + 2, n)
        box = ((lo[j, 0] <= hi[i, 0]) & (hi[j, 0] >= lo[i, 0])
               & (lo[j, 1] <= hi[i, 1]) & (hi[j, 1] >= lo[i, 1]))
        if not box.any():
            continue
        q, s = a[j][box], d[j][box]
        p, r = a[i], d[i]
        rxs = r[0] * s[:, 1] - r[1] * s[:, 0]
        qp = q - p
        ok = rxs != 0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / rxs
            u = (qp[:, 0] * r[1] - qp[:, 1] * r[0]) / rxs
        count += int(np.count_nonzero(ok & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)))
    return count


def intersection_density(trace: Trace, s_min: float, decimate: int = 4) -> float:
    """Self-intersections per unit arc length over ``s >= s_min``."""
    m = trace.s >= s_min
    pts = trace.points[m][::decimate]
    s = trace.s[m]
    if len(pts) < 3:
        return 0.0
    return count_self_intersections(pts) / float(s[-1] - s[0])


# ---------------------------------------------------------------------------
# low-fidelity lag


def lag_lowfidelity(ratio, R_c: float = 1.0, s_max: float = 200.0, ds: float = 0.01):
    """Low-fidelity lag surrogate for stable speed ratios (``ratio >= 1``).

    For ``ratio > 1`` the contact-point equations have no fixed point: the
    contact point trails away from the nozzle at a steady rate.  The
    surrogate is that along-belt drift over the second half of a long
    integration, per unit arc length, times ``R_c``.  It vanishes at
    ``ratio = 1`` (where the orbit settles on a fixed point) and grows
    with the ratio.  Accepts a scalar or an array of ratios.

    Raises
    ------
    UnstableRegime
        If any ratio is below 1.
    """
    U = np.atleast_1d(np.asarray(ratio, dtype=float))
    if np.any(U < 1.0):
        raise UnstableRegime("no straight deposit for speed ratios below 1")
    S = s_max * R_c
    s, out = _rk4_batch(U, R_c, S, ds * R_c, (0.1 * R_c, 0.0, np.pi / 2))
    x = out[0] * np.cos(out[1])
    half = len(s) // 2
    drift = np.abs(x[:, -1] - x[:, half]) / (s[-1] - s[half])
    L = drift * R_c
    return float(L[0]) if np.ndim(ratio) == 0 else L


@lru_cache(maxsize=8)
def lag_table(r_max: float = 15.0, n: int = 80, ds: float = 0.01) -> tuple[np.ndarray, np.ndarray]:
    """Cached ``(ratios, lag)`` table on a log grid over ``[1, r_max]``."""
    ratios = np.logspace(0.0, np.log10(r_max), n)
    return ratios, lag_lowfidelity(ratios, ds=ds)
