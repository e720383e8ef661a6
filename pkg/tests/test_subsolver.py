import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probfw.errors import OracleError
from probfw.measure import BoxDomain
from probfw.subsolver import SubsolverConfig, as_vectorized, minimize_over_box

UNIT = BoxDomain([0.0], [1.0])
SYM = BoxDomain([-1.0], [1.0])
SQUARE = BoxDomain([0.0, 0.0], [1.0, 1.0])


def test_linear_function_minimized_at_edge():
    res = minimize_over_box(lambda x: -0.6 * x[:, 0], UNIT)
    assert res.minimizer.tolist() == [1.0]
    assert res.min_value == pytest.approx(-0.6, abs=1e-15)


def test_convex_quadratic():
    res = minimize_over_box(lambda x: (x[:, 0] - 0.25) ** 2, UNIT)
    assert abs(res.minimizer[0] - 0.25) <= 1e-6
    assert res.min_value == pytest.approx(0.0, abs=1e-12)


def test_tie_broken_lexicographically():
    res = minimize_over_box(lambda x: 1.0 - x[:, 0] ** 2, SYM)
    assert res.minimizer.tolist() == [-1.0]
    assert res.min_value == 0.0


def test_two_dimensional_refinement():
    f = lambda p: (p[:, 0] - 0.3) ** 2 + 2 * (p[:, 1] - 0.71) ** 2
    res = minimize_over_box(f, SQUARE)
    assert np.allclose(res.minimizer, [0.3, 0.71], atol=1e-6)


def test_non_finite_value_reports_point():
    def f(x):
        out = x[:, 0].copy()
        out[x[:, 0] > 0.5] = np.nan
        return out

    with pytest.raises(OracleError) as info:
        minimize_over_box(f, UNIT)
    assert info.value.point is not None and info.value.point[0] > 0.5


def test_config_validation_and_defaults():
    with pytest.raises(ValueError):
        SubsolverConfig(grid_points_per_dim=1)
    with pytest.raises(ValueError):
        SubsolverConfig(refine_candidates=0)
    cfg = SubsolverConfig()
    assert cfg.points_per_dim(1) == 64 and cfg.points_per_dim(2) == 32 and cfg.points_per_dim(3) == 32


def test_unrefined_returns_best_grid_point():
    cfg = SubsolverConfig(grid_points_per_dim=11, refine=False)
    res = minimize_over_box(lambda x: (x[:, 0] - 0.33) ** 2, UNIT, cfg)
    assert res.minimizer[0] == pytest.approx(0.3)


def test_as_vectorized():
    g = as_vectorized(lambda p: float(p[0] * p[1]), 2)
    assert g(np.array([[2.0, 3.0], [1.0, 1.0]])).tolist() == [6.0, 1.0]


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.5, 1.5), st.floats(0.1, 10.0), st.integers(2, 40))
def test_never_worse_than_grid(c, a, n):
    f = lambda x: a * np.abs(x[:, 0] - c) + np.sin(7 * x[:, 0])
    cfg = SubsolverConfig(grid_points_per_dim=n)
    res = minimize_over_box(f, UNIT, cfg)
    grid = np.linspace(0.0, 1.0, n)[:, None]
    assert res.min_value <= f(grid).min()
    assert UNIT.contains(res.minimizer[None, :])[0]
    assert res.min_value == pytest.approx(float(f(res.minimizer[None, :])[0]), abs=0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.5, 1.5), st.floats(0.1, 10.0))
def test_convex_minimizer_within_ten_xtol(c, a):
    cfg = SubsolverConfig()
    res = minimize_over_box(lambda x: a * (x[:, 0] - c) ** 2, UNIT, cfg)
    assert abs(res.minimizer[0] - np.clip(c, 0.0, 1.0)) <= 10 * cfg.refine_xtol


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_deterministic(c1, c2):
    f = lambda p: np.cos(5 * p[:, 0] - c1) + (p[:, 1] - c2) ** 2
    a = minimize_over_box(f, SQUARE)
    b = minimize_over_box(f, SQUARE)
    assert a.minimizer.tobytes() == b.minimizer.tobytes() and a.min_value == b.min_value
