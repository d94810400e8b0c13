"""
Steady 1D electrohydrodynamic jet model for melt electrowriting.

The thin-filament balance of mass, momentum, charge, energy and a
non-isothermal Giesekus-type constitutive law, in nondimensional form,
reduces to first-order ODEs in the axial coordinate ``z = Z/R0``.  The
state carried by the integrator is ``(R, tau_pzz, tau_prr, theta)``; the
speed follows from continuity, ``V = 1/R**2``, so ``R**2 V = 1`` holds to
rounding error at every output point.

At each evaluation the momentum balance is solved for ``V'`` after the
polymer-stress rates from the constitutive law (and ``theta'`` from the
energy equation) have been substituted into it.  With the arc-slope
factor ``sqrt(1 + R'^2)`` frozen the balance is exactly quadratic in
``V'``; the branch continuous with the linear solution is taken and the
slope factor is refreshed until it stops changing.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import IntegrationFailure, NoRealRoot, SingularAssembly
from .pso import PSOResult, SwarmConfig, fit_parameters_pso

__all__ = [
    "MaterialProperties",
    "DimensionlessGroups",
    "JetState",
    "RadiusProfile",
    "JetSolution",
    "pcl_material",
    "default_pcl_groups",
    "initial_radius_slope",
    "inlet_state",
    "rhs",
    "solve_jet_profile",
    "fit_groups_to_profile",
    "fit_parameters_pso",
    "groups_table_csv",
    "SwarmConfig",
    "PSOResult",
]

DEFAULT_DELTA_T_RH = 373.0  # K
SLOPE_BRACKET = 50.0


@dataclass(frozen=True)
class MaterialProperties:
    """PCL melt properties (SI units)."""

    zero_shear_viscosity: float = 1900.0
    relaxation_time: float = 0.019
    activation_energy_over_gas_constant: float = 7938.4
    density: float = 1145.0
    heat_capacity: float = 1340.0
    thermal_conductivity: float = 0.14
    electrical_conductivity: float = 9.5e-9
    surface_tension: float = 0.0435
    beta: float = 0.001
    alpha: float = 0.015
    dielectric_ratio: float = 2.9

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be strictly positive")
        if not (0 < self.beta < 1 and 0 < self.alpha < 1):
            raise ValueError("beta and alpha must lie in (0, 1)")


def pcl_material() -> MaterialProperties:
    return MaterialProperties()


@dataclass(frozen=True)
class DimensionlessGroups:
    """Nondimensional constants of the jet equations.

    ``A_f`` is the activation ratio ``dH / (R_ig * dT_Rh)`` used by the
    shift factor ``f(theta)``; ``theta_inf`` is the ambient temperature
    the cooling term relaxes toward.  ``Pe_c`` is carried for completeness
    and is not used by the solver.
    """

    Re: float
    Ca: float
    Pe: float
    Pe_c: float
    De: float
    Fe: float
    Bi_L: float
    Na: float
    Gamma: float
    Bo: float
    beta: float
    beta_E: float
    alpha: float
    chi: float
    A_f: float
    theta_inf: float

    def __post_init__(self):
        for name in ("Re", "Ca", "Pe", "De", "Bi_L", "Na", "Gamma", "chi"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v}")
        for name in ("Fe", "Bo"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")

    def replace(self, **changes) -> "DimensionlessGroups":
        return replace(self, **changes)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=False)

    @classmethod
    def from_mapping(cls, data: dict, base: "DimensionlessGroups | None" = None):
        """Build groups from a JSON-style mapping; missing keys come from ``base``."""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown group keys: {sorted(unknown)}")
        if base is None:
            base = default_pcl_groups()
        return replace(base, **{k: float(v) for k, v in data.items()})

    @classmethod
    def from_json(cls, path: str | Path) -> "DimensionlessGroups":
        return cls.from_mapping(json.loads(Path(path).read_text()))


def default_pcl_groups(
    delta_T_rh: float = DEFAULT_DELTA_T_RH,
    theta_inf: float = -1.0,
    chi: float = 17.5,
) -> DimensionlessGroups:
    """Typical PCL groups; ``A_f`` derives from dH/R_ig = 7938.4 K and ``delta_T_rh``."""
    mat = pcl_material()
    return DimensionlessGroups(
        Re=5.785e-6,
        Ca=1048.276,
        Pe=105.209,
        Pe_c=0.1122,
        De=1.14,
        Fe=0.0254,
        Bi_L=0.424,
        Na=0.446,
        Gamma=21.283,
        Bo=0.0,
        beta=mat.beta,
        beta_E=mat.dielectric_ratio,
        alpha=mat.alpha,
        chi=chi,
        A_f=mat.activation_energy_over_gas_constant / delta_T_rh,
        theta_inf=theta_inf,
    )


def _fmt(v: float) -> str:
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


def groups_table_csv(groups: DimensionlessGroups | None = None) -> str:
    """Export the tabulated groups as ``Parameter,Value`` CSV, in table order."""
    g = default_pcl_groups() if groups is None else groups
    rows = [
        ("Bi", g.Bi_L), ("De", g.De), ("Bo", g.Bo), ("Re", g.Re),
        ("Ca", g.Ca), ("Na", g.Na), ("Fe", g.Fe), ("Γ", g.Gamma),
        ("Pe", g.Pe), ("Pe_c", g.Pe_c),
    ]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Parameter", "Value"])
    for name, v in rows:
        w.writerow([name, _fmt(v)])
    return buf.getvalue()


@dataclass(frozen=True)
class JetState:
    z: float
    R: float
    V: float
    tau_pzz: float
    tau_prr: float
    theta: float

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be > 0")


@dataclass(frozen=True)
class RadiusProfile:
    z_grid: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z_grid, dtype=float)
        r = np.asarray(self.radii, dtype=float)
        if z.shape != r.shape or z.ndim != 1 or len(z) < 2:
            raise ValueError("z_grid and radii must be 1D arrays of equal length >= 2")
        if np.any(np.diff(z) <= 0):
            raise ValueError("z_grid must be strictly increasing")
        if np.any(r <= 0):
            raise ValueError("radii must be > 0")
        object.__setattr__(self, "z_grid", z)
        object.__setattr__(self, "radii", r)

    @property
    def chi(self) -> float:
        return float(self.z_grid[-1])

    def __call__(self, z) -> np.ndarray:
        """Linear interpolation of the radius, clamped at the ends."""
        return np.interp(z, self.z_grid, self.radii)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["z_over_R0", "Rj_over_R0"])
        for z, r in zip(self.z_grid, self.radii):
            w.writerow([repr(float(z)), repr(float(r))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RadiusProfile":
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0] != ["z_over_R0", "Rj_over_R0"]:
            raise ValueError("unexpected profile CSV header")
        data = np.array(rows[1:], dtype=float)
        return cls(data[:, 0], data[:, 1])


# ---------------------------------------------------------------------------
# inlet condition


def _slope_residual(Rp, R, g: DimensionlessGroups):
    s = np.sqrt(1.0 + Rp * Rp)
    return (
        6.0 / R**4 * Rp * Rp
        + (1.0 / (g.Ca * R * R) + g.Fe * R) * Rp
        + 2.0 * g.Fe / s * (1.0 - g.beta_E / s)
    )


def initial_radius_slope(groups: DimensionlessGroups, n_scan: int = 50_001) -> float:
    """Inlet slope ``R'(0)`` from the nozzle boundary condition at ``R = 1``.

    The residual is scanned from 0 toward ``-50``; the first sign change
    (the non-positive root of smallest magnitude) is refined with Brent's
    method.

    Raises
    ------
    NoRealRoot
        No sign change in the bracket, or the root sits on its lower edge.
    """
    r0 = _slope_residual(0.0, 1.0, groups)
    if r0 == 0.0:
        return 0.0
    grid = np.linspace(0.0, -SLOPE_BRACKET, n_scan)
    res = _slope_residual(grid, 1.0, groups)
    if not np.all(np.isfinite(res)):
        raise NoRealRoot("non-finite residual while scanning the inlet slope")
    flips = np.nonzero(np.sign(res[:-1]) * np.sign(res[1:]) <= 0)[0]
    if flips.size == 0:
        raise NoRealRoot("no sign change of the inlet-slope residual in [-50, 0]")
    i = flips[0]
    root = brentq(_slope_residual, grid[i + 1], grid[i], args=(1.0, groups),
                  xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if root <= -SLOPE_BRACKET * (1 - 1e-9):
        raise NoRealRoot("inlet-slope root lies on the bracket edge")
    return float(root)


def _shift_factor(theta, g: DimensionlessGroups):
    return np.exp(g.A_f * (1.0 / (theta + g.Gamma) - 1.0 / g.Gamma))


def inlet_state(groups: DimensionlessGroups) -> JetState:
    """State at the nozzle: R = 1, theta = 0 and Newtonian-limit polymer stresses."""
    Rp0 = initial_radius_slope(groups)
    Vp0 = -2.0 * Rp0  # continuity at R = V = 1
    f0 = _shift_factor(0.0, groups)
    b = groups.beta
    return JetState(
        z=0.0, R=1.0, V=1.0,
        tau_pzz=2.0 * (1.0 - b) * f0 * Vp0,
        tau_prr=-(1.0 - b) * f0 * Vp0,
        theta=0.0,
    )


# ---------------------------------------------------------------------------
# right-hand side


def _balance(z, R, V, tzz, trr, th, w, s, g: DimensionlessGroups):
    """Momentum residual F(V') with a frozen slope factor ``s``, plus the rates."""
    b = g.beta
    f = _shift_factor(th, g)
    G = th + g.Gamma
    Rp = -R * w / (2.0 * V)
    D = 1.0 + 2.0 * z - z * z / g.chi
    E = 1.0 / (D * s)
    Ep = (-2.0 + 2.0 * z / g.chi) / (D * s)
    N = tzz - trr + 3.0 * b * f * w  # tau_zz - tau_rr incl. solvent part
    thp = (g.Na * w * N - 2.0 * g.Bi_L * (th - g.theta_inf) / R) / (g.Pe * V)
    c = g.De * g.Gamma / G
    tzzp = ((2.0 * (1.0 - b) * f * w - tzz - c * g.alpha * tzz * tzz / (1.0 - b)) / (c * f * V)
            + 2.0 * w * tzz / V + tzz * thp / G)
    trrp = ((-(1.0 - b) * f * w - trr - c * g.alpha * trr * trr / (1.0 - b)) / (c * f * V)
            - w * trr / V)
    F = (g.Re * V * w - g.Bo - (tzzp - trrp) - 2.0 * Rp * N / R
         - Rp / (g.Ca * R * R) - g.Fe * (R * Rp + g.beta_E * E * Ep + 2.0 * Ep))
    return F, Rp, tzzp, trrp, thp


def _solve_acceleration(z, R, V, tzz, trr, th, g, tol=1e-12, max_iter=60):
    s = 1.0
    w_prev = None
    for _ in range(max_iter):
        f0 = _balance(z, R, V, tzz, trr, th, 0.0, s, g)[0]
        fp = _balance(z, R, V, tzz, trr, th, 1.0, s, g)[0]
        fm = _balance(z, R, V, tzz, trr, th, -1.0, s, g)[0]
        c0 = f0
        c1 = 0.5 * (fp - fm)
        c2 = 0.5 * (fp + fm) - f0
        disc = c1 * c1 - 4.0 * c0 * c2
        if abs(c1) < tol or disc < 0.0:
            raise SingularAssembly(
                f"momentum balance singular at z={z:.6g} (c1={c1:.3g}, disc={disc:.3g})")
        # root continuous with -c0/c1 as c2 -> 0
        w = -2.0 * c0 / (c1 + math.copysign(math.sqrt(disc), c1))
        if abs(c1 + 2.0 * c2 * w) < tol:
            raise SingularAssembly(f"vanishing balance slope at z={z:.6g}")
        Rp = -R * w / (2.0 * V)
        s = math.sqrt(1.0 + Rp * Rp)
        if w_prev is not None and abs(w - w_prev) <= 1e-14 * (1.0 + abs(w)):
            break
        w_prev = w
    return w, s


def rhs(state: JetState, groups: DimensionlessGroups) -> np.ndarray:
    """Derivatives ``d/dz`` of ``(R, V, tau_pzz, tau_prr, theta)`` at ``state``.

    Raises
    ------
    SingularAssembly
        If the momentum balance has no well-conditioned solution for ``V'``.
    """
    st = state
    w, s = _solve_acceleration(st.z, st.R, st.V, st.tau_pzz, st.tau_prr, st.theta, groups)
    _, Rp, tzzp, trrp, thp = _balance(st.z, st.R, st.V, st.tau_pzz, st.tau_prr,
                                       st.theta, w, s, groups)
    return np.array([Rp, w, tzzp, trrp, thp])


def _ode(z, y, g):
    R, tzz, trr, th = y
    if not R > 0:
        raise IntegrationFailure(f"radius left the physical range at z={z:.6g}")
    V = 1.0 / (R * R)
    w, s = _solve_acceleration(z, R, V, tzz, trr, th, g)
    _, Rp, tzzp, trrp, thp = _balance(z, R, V, tzz, trr, th, w, s, g)
    return np.array([Rp, tzzp, trrp, thp])


# ---------------------------------------------------------------------------
# integration


@dataclass
class JetSolution:
    """Result of :func:`solve_jet_profile`.

    ``states`` has columns ``(z, R, V, tau_pzz, tau_prr, theta)`` on the
    output grid; ``dense`` evaluates ``(R, tau_pzz, tau_prr, theta)``
    anywhere in ``[0, chi]``.
    """

    profile: RadiusProfile
    states: np.ndarray
    groups: DimensionlessGroups
    n_steps: int
    nfev: int
    dense: Callable

    def radius_at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.asarray(self.dense(z))[0]

    def state_at(self, z: float) -> JetState:
        R, tzz, trr, th = np.asarray(self.dense(float(z)))
        return JetState(z=float(z), R=float(R), V=1.0 / float(R) ** 2,
                        tau_pzz=float(tzz), tau_prr=float(trr), theta=float(th))


def solve_jet_profile(
    groups: DimensionlessGroups,
    n_points: int = 93,
    rtol: float = 1e-8,
    atol: float = 1e-9,
    max_step: float = np.inf,
) -> JetSolution:
    """Integrate the jet from the nozzle (z = 0) to the collector (z = chi).

    Parameters
    ----------
    groups : DimensionlessGroups
    n_points : int
        Number of equally spaced output points on ``[0, chi]`` (>= 16).
    rtol, atol : float
        Tolerances of the adaptive Dormand-Prince 5(4) pair.
    max_step : float
        Optional cap on the step size.

    Raises
    ------
    IntegrationFailure
        Step-size underflow, a non-finite state or a non-positive radius.
    NoRealRoot
        Propagated from :func:`initial_radius_slope`.
    """
    if n_points < 16:
        raise ValueError("n_points must be >= 16")
    s0 = inlet_state(groups)
    y0 = np.array([s0.R, s0.tau_pzz, s0.tau_prr, s0.theta])
    z_grid = np.linspace(0.0, groups.chi, n_points)
    try:
        sol = solve_ivp(_ode, (0.0, groups.chi), y0, method="RK45", t_eval=z_grid,
                        rtol=rtol, atol=atol, max_step=max_step, dense_output=True,
                        args=(groups,))
    except SingularAssembly as exc:
        raise IntegrationFailure(str(exc)) from exc
    if sol.status != 0:
        raise IntegrationFailure(sol.message)
    Y = sol.y
    if not np.all(np.isfinite(Y)) or np.any(Y[0] <= 0):
        raise IntegrationFailure("non-finite or non-positive radius in the solution")
    R = Y[0].copy()
    R[0] = 1.0
    V = 1.0 / (R * R)
    states = np.column_stack([z_grid, R, V, Y[1], Y[2], Y[3]])
    return JetSolution(
        profile=RadiusProfile(z_grid, R),
        states=states,
        groups=groups,
        n_steps=int(sol.sol.n_segments),
        nfev=int(sol.nfev),
        dense=sol.sol,
    )


# ---------------------------------------------------------------------------
# parameter fitting


def fit_groups_to_profile(
    z_obs: Sequence[float],
    r_obs: Sequence[float],
    names: Sequence[str],
    bounds: Sequence[tuple[float, float]],
    base: DimensionlessGroups | None = None,
    swarm: SwarmConfig | None = None,
    seed: int = 0,
) -> tuple[DimensionlessGroups, PSOResult]:
    """Fit selected groups to observed radii by minimizing the profile RMSE.

    Candidates that make the solver fail score ``inf``.
    """
    base = default_pcl_groups() if base is None else base
    z_obs = np.asarray(z_obs, dtype=float)
    r_obs = np.asarray(r_obs, dtype=float)

    def misfit(x):
        try:
            g = base.replace(**dict(zip(names, map(float, x))))
            sol = solve_jet_profile(g, n_points=16)
        except (IntegrationFailure, NoRealRoot, ValueError):
            return np.inf
        return float(np.sqrt(np.mean((sol.radius_at(z_obs) - r_obs) ** 2)))

    result = fit_parameters_pso(misfit, bounds, swarm=swarm, seed=seed)
    return base.replace(**dict(zip(names, map(float, result.best_x)))), result
