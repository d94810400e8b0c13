import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpjet.pso import SwarmConfig, fit_parameters_pso


def test_convex_scalar():
    res = fit_parameters_pso(lambda x: (x[0] - 3.0) ** 2, [(0.0, 10.0)],
                             SwarmConfig(particles=16, iterations=50), seed=0)
    assert abs(res.best_x[0] - 3.0) < 1e-3
    assert res.n_evals == 16 * 51


def test_same_seed_is_bit_identical():
    f = lambda x: float(np.sum((x - [1.0, -2.0]) ** 2) + np.sin(5 * x[0]))
    a = fit_parameters_pso(f, [(-5, 5), (-5, 5)], seed=4)
    b = fit_parameters_pso(f, [(-5, 5), (-5, 5)], seed=4)
    assert a.best_x.tobytes() == b.best_x.tobytes()
    np.testing.assert_array_equal(a.trace, b.trace)


def test_nonfinite_objective_is_ignored():
    f = lambda x: np.nan if x[0] < 5 else (x[0] - 7.0) ** 2
    res = fit_parameters_pso(f, [(0.0, 10.0)], seed=2)
    assert abs(res.best_x[0] - 7.0) < 1e-2


@pytest.mark.parametrize("bounds", [[(1.0, 1.0)], [(0.0, np.inf)], []])
def test_bad_bounds(bounds):
    with pytest.raises(ValueError):
        fit_parameters_pso(lambda x: 0.0, bounds)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), lo=st.floats(-10, 0), w=st.floats(0.1, 10))
def test_trace_monotone_and_inside_box(seed, lo, w):
    seen = []

    def f(x):
        seen.append(x.copy())
        return float(np.cos(3 * x[0]) + 0.1 * x[0] ** 2)

    res = fit_parameters_pso(f, [(lo, lo + w)], SwarmConfig(particles=6, iterations=8), seed=seed)
    assert np.all(np.diff(res.trace) <= 0)
    pts = np.array(seen)
    assert np.all(pts >= lo) and np.all(pts <= lo + w)
    assert res.best_f == res.trace[-1]
