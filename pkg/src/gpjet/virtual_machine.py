"""
Virtual melt-electrowriting machine.

Serves noisy high-fidelity observations of the jet radius profile and the
lag distance from a synthetic ground truth:

* radius: the jet-model solve multiplied by a Taylor-cone bump
  ``1 + a * exp(-(z / z_c)^2)`` near the needle, so the physics model
  under-predicts there;
* lag: an affine map (in mm) of the low-fidelity sewing-machine lag, made
  strictly increasing in the speed ratio so that its minimum over the
  stable band sits at ratio 1.

Observations are pure functions of ``(seed, query)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import physics_jet, sewing_machine
from .errors import NonPositiveRatio, OutOfDomain, UnstableRegime


@dataclass(frozen=True)
class MachineSetting:
    id: int
    air_pressure: float  # bar
    tip_to_collector: float  # mm
    collector_speed: float  # mm/s
    frames: int
    duration: float  # s


# (pressure, Z, U_c, frames, duration); the literal strings are kept so the
# CSV export reproduces the table exactly.
_SETTINGS_TABLE = (
    ("1.2", "3.5", "191.2", "1341", "26.82"),
    ("1.2", "3.5", "212.5", "1672", "33.44"),
    ("1.2", "3.5", "255", "1437", "28.74"),
    ("1.2", "3.5", "340", "1343", "26.86"),
    ("1.2", "3.5", "510", "648", "12.96"),
    ("1.2", "3.5", "850", "613", "12.26"),
    ("1.2", "3.5", "1530", "457", "9.14"),
    ("1.2", "3.5", "2890", "401", "8.02"),
    ("2.4", "4.5", "292.5", "1108", "22.16"),
    ("2.4", "4.5", "520", "802", "16.04"),
    ("2.4", "4.5", "1300", "812", "16.24"),
    ("2.4", "4.5", "4420", "284", "5.68"),
)
SETTINGS_HEADER = (
    "Machine Setting",
    "Air pressure p [bar]",
    "Tip to Collector Distance Z [mm]",
    "Collector Speed U_c [mm/s]",
    "Number of frames",
    "Duration [sec]",
)


def list_settings() -> list[MachineSetting]:
    return [
        MachineSetting(i + 1, float(p), float(z), float(u), int(n), float(d))
        for i, (p, z, u, n, d) in enumerate(_SETTINGS_TABLE)
    ]


def settings_csv() -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SETTINGS_HEADER)
    for i, row in enumerate(_SETTINGS_TABLE):
        w.writerow([str(i + 1), *row])
    return buf.getvalue()


@dataclass(frozen=True)
class MachineConfig:
    bump_amplitude: float = 0.08
    bump_width: float = 2.0  # z_c, units of R0
    sigma_R: float = 0.01
    sigma_L: float = 0.02  # mm
    V_jm: float = 300.0  # jet impact speed, mm/s
    lag_offset_mm: float = 0.3
    lag_scale_mm: float = 0.05  # mm per unit of the low-fidelity lag (R_c)
    lag_slope_mm: float = 0.01  # keeps the truth strictly increasing
    ratio_max: float = 15.0

    def __post_init__(self):
        if self.sigma_R < 0 or self.sigma_L < 0:
            raise ValueError("noise levels must be >= 0")
        if self.V_jm <= 0 or self.bump_width <= 0:
            raise ValueError("V_jm and bump_width must be > 0")
        if self.lag_scale_mm < 0 or self.lag_slope_mm <= 0:
            raise ValueError("lag_scale_mm must be >= 0 and lag_slope_mm > 0")

    @classmethod
    def from_mapping(cls, m: dict) -> "MachineConfig":
        unknown = set(m) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown machine keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in m.items()})


@lru_cache(maxsize=4)
def _physics_solution(groups: physics_jet.DimensionlessGroups):
    return physics_jet.solve_jet_profile(groups)


@lru_cache(maxsize=1)
def _monotone_lag_table():
    ratios, lag = sewing_machine.lag_table()
    return np.log(ratios), np.maximum.accumulate(lag)


@dataclass
class VirtualMachine:
    """Oracle for radius-profile and lag-distance observations."""

    config: MachineConfig = field(default_factory=MachineConfig)
    groups: physics_jet.DimensionlessGroups = field(default_factory=physics_jet.default_pcl_groups)

    @property
    def chi(self) -> float:
        return self.groups.chi

    # -- radius ------------------------------------------------------------

    def low_fidelity_radius(self, z) -> np.ndarray:
        """Jet-model radius, the low-fidelity source."""
        return _physics_solution(self.groups).radius_at(self._check_z(z))

    def radius_truth(self, z) -> np.ndarray:
        z = self._check_z(z)
        c = self.config
        bump = 1.0 + c.bump_amplitude * np.exp(-((z / c.bump_width) ** 2))
        return self.low_fidelity_radius(z) * bump

    def observe_radius(self, z_points, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Noisy radius observations ``(z, R)`` at ``z_points``."""
        z = self._check_z(np.atleast_1d(np.asarray(z_points, dtype=float)))
        rng = np.random.default_rng(seed)
        noise = rng.normal(0.0, 1.0, z.shape) * self.config.sigma_R
        return z, self.radius_truth(z) + noise

    def _check_z(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z < 0) or np.any(z > self.chi * (1 + 1e-12)) or not np.all(np.isfinite(z)):
            raise OutOfDomain(f"z must lie in [0, {self.chi}]")
        return z

    # -- lag ---------------------------------------------------------------

    def speed_ratio(self, collector_speed) -> np.ndarray:
        return np.asarray(collector_speed, dtype=float) / self.config.V_jm

    def setting_ratios(self) -> np.ndarray:
        return self.speed_ratio([s.collector_speed for s in list_settings()])

    def lag_truth(self, ratio):
        """Noise-free lag distance in mm for ``1 <= ratio <= ratio_max``."""
        r = np.asarray(ratio, dtype=float)
        if np.any(r <= 0):
            raise NonPositiveRatio("speed ratio must be > 0")
        if np.any(r < 1.0):
            raise UnstableRegime("no straight deposit below speed ratio 1")
        if np.any(r > self.config.ratio_max * (1 + 1e-12)):
            raise OutOfDomain(f"speed ratio above {self.config.ratio_max}")
        c = self.config
        log_r, lag = _monotone_lag_table()
        low = np.interp(np.log(r), log_r, lag)
        out = c.lag_offset_mm + c.lag_scale_mm * low + c.lag_slope_mm * (r - 1.0)
        return float(out) if out.ndim == 0 else out

    def observe_lag(self, ratio: float, seed: int = 0) -> float:
        """One noisy lag measurement at a speed ratio (mm).

        Raises
        ------
        UnstableRegime
            For ``ratio < 1``, where no straight line is deposited.
        NonPositiveRatio
            For ``ratio <= 0``.
        """
        truth = self.lag_truth(float(ratio))
        # the noise stream depends on both seed and query
        key = np.frombuffer(np.float64(ratio).tobytes(), dtype=np.uint32)
        rng = np.random.default_rng([int(seed), *map(int, key)])
        return float(truth + self.config.sigma_L * rng.normal())
