import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpjet import virtual_machine as vmod
from gpjet.cli import ratio_grid
from gpjet.errors import NonPositiveRatio, OutOfDomain, UnstableRegime
from gpjet.virtual_machine import MachineConfig, VirtualMachine

from conftest import DATA


def test_settings_match_frozen_csv():
    assert vmod.settings_csv() == (DATA / "machine_settings.csv").read_text()


def test_settings_entries():
    s = vmod.list_settings()
    assert len(s) == 12 and len({x.id for x in s}) == 12
    first, last = s[0], s[-1]
    assert (first.air_pressure, first.tip_to_collector, first.collector_speed, first.frames,
            first.duration) == (1.2, 3.5, 191.2, 1341, 26.82)
    assert (last.air_pressure, last.tip_to_collector, last.collector_speed) == (2.4, 4.5, 4420)


def test_setting_ratios_use_configured_speed():
    vm = VirtualMachine(MachineConfig(V_jm=200.0))
    speeds = np.array([s.collector_speed for s in vmod.list_settings()])
    np.testing.assert_array_equal(vm.setting_ratios(), speeds / 200.0)


def test_noise_free_radius_is_truth(vm):
    quiet = VirtualMachine(MachineConfig(sigma_R=0.0))
    z = np.linspace(0, quiet.chi, 20)
    np.testing.assert_array_equal(quiet.observe_radius(z, seed=3)[1], quiet.radius_truth(z))
    assert quiet.observe_radius([0.0])[1][0] == pytest.approx(1.08, abs=1e-12)


def test_low_fidelity_is_plain_physics(vm, jet):
    z = jet.states[:, 0]
    np.testing.assert_allclose(vm.low_fidelity_radius(z), jet.profile.radii, atol=1e-12)
    d = vm.radius_truth(z) - vm.low_fidelity_radius(z)
    assert np.all(d >= 0) and d[z < 2].min() > 0 and d[z > 8].max() < 1e-6


def test_radius_determinism_and_domain(vm):
    z = [0.0, 3.0, 10.0]
    a, b = vm.observe_radius(z, seed=5), vm.observe_radius(z, seed=5)
    assert a[1].tobytes() == b[1].tobytes()
    with pytest.raises(OutOfDomain):
        vm.observe_radius([-0.1])
    with pytest.raises(OutOfDomain):
        vm.observe_radius([vm.chi + 1])


def test_lag_regimes(vm):
    with pytest.raises(UnstableRegime):
        vm.observe_lag(0.5)
    with pytest.raises(NonPositiveRatio):
        vm.observe_lag(0.0)
    with pytest.raises(OutOfDomain):
        vm.observe_lag(20.0)


def test_lag_truth_increasing_without_noise():
    quiet = VirtualMachine(MachineConfig(sigma_L=0.0))
    assert quiet.observe_lag(1.0) < quiet.observe_lag(2.0) < quiet.observe_lag(5.0)


def test_lag_minimizer_is_grid_point_nearest_one(vm):
    grid = ratio_grid()
    stable = grid[grid >= 1.0]
    best = stable[np.argmin(vm.lag_truth(stable))]
    assert best == grid[np.argmin(np.abs(grid - 1.0))]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), r=st.floats(1.0, 15.0))
def test_lag_observation_deterministic(vm, seed, r):
    assert vm.observe_lag(r, seed) == vm.observe_lag(r, seed)


def test_config_validation():
    with pytest.raises(ValueError):
        MachineConfig(sigma_R=-1)
    with pytest.raises(ValueError):
        MachineConfig.from_mapping({"speed": 1})
    assert MachineConfig.from_mapping({"V_jm": 250}).V_jm == 250.0
