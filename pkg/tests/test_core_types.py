import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coulomblab.core_types import (RadialGrid, ReducedState, ScenarioConfig, Trajectory, energy_window, lift,
                                   reduce, sphere_area)


def test_grid_is_staggered():
    g = RadialGrid(3, 0.1, 10)
    assert g.r[0] == pytest.approx(0.05)
    assert np.allclose(np.diff(g.r), 0.1)
    assert g.edge == pytest.approx(1.0)


@pytest.mark.parametrize("d,lam", [(3, 0.0), (4, 0.75), (5, 2.0)])
def test_lambda_exact(d, lam):
    assert RadialGrid(d, 0.1, 8).lam == lam


@pytest.mark.parametrize("kw", [dict(d=2, dr=0.1, n=8), dict(d=3, dr=0.0, n=8), dict(d=3, dr=0.1, n=7)])
def test_grid_rejects_bad_parameters(kw):
    with pytest.raises(ValueError):
        RadialGrid(**kw)


def test_sphere_area_and_window():
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert energy_window(3) == (3.0, 5.0)


def test_reduce_examples():
    g3 = RadialGrid(3, 0.01, 100)
    assert np.all(reduce(np.zeros(100), g3) == 0)
    assert np.allclose(reduce(1 / g3.r, g3), 1.0, rtol=1e-15)
    g5 = RadialGrid(5, 0.01, 100)
    assert np.allclose(lift(g5.r**2, g5), 1.0, rtol=1e-15)


def test_reduce_length_mismatch():
    with pytest.raises(ValueError):
        reduce(np.zeros(5), RadialGrid(3, 0.1, 10))


@settings(max_examples=40, deadline=None)
@given(d=st.integers(3, 7), seed=st.integers(0, 10_000))
def test_round_trip(d, seed):
    g = RadialGrid(d, 0.05, 64)
    u = np.random.default_rng(seed).normal(size=64)
    assert np.max(np.abs(lift(reduce(u, g), g) - u) / np.maximum(np.abs(u), 1e-300)) <= 1e-14


def test_state_invariants():
    g = RadialGrid(3, 0.1, 10)
    with pytest.raises(ValueError):
        ReducedState(g, 0.0, np.zeros(9), np.zeros(10))
    with pytest.raises(FloatingPointError):
        ReducedState(g, 0.0, np.full(10, np.nan), np.zeros(10))
    with pytest.raises(ValueError):
        ReducedState(g, 0.0, np.zeros(10), np.zeros(10), zeta=1, p=6.0)


def test_trajectory_spacing():
    g = RadialGrid(3, 0.1, 10)
    s = [ReducedState(g, t, np.zeros(10), np.zeros(10)) for t in (0.0, 0.2, 0.4, 0.5)]
    assert len(Trajectory(s, 2, 0.1)) == 4
    bad = [ReducedState(g, t, np.zeros(10), np.zeros(10)) for t in (0.0, 0.2, 0.5, 0.6)]
    with pytest.raises(ValueError):
        Trajectory(bad, 2, 0.1)


def test_scenario_invariants():
    ScenarioConfig().validate()
    with pytest.raises(ValueError, match="light cone"):
        ScenarioConfig(n=100).validate()
    with pytest.raises(ValueError, match="cfl"):
        ScenarioConfig(cfl=1.2).validate()
    with pytest.raises(ValueError, match="p in"):
        ScenarioConfig(zeta=1, p=7.0).validate()
