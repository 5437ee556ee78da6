import math
import warnings
from fractions import Fraction as F

import numpy as np
import pytest

from coulomblab import norm_suite as ns
from coulomblab.core_types import RadialGrid, ReducedState, Trajectory
from coulomblab.energy_ledger import densities
from coulomblab.radial_evolver import DataSpec

SHELL = DataSpec("gaussian_shell", r_c=2, sigma=0.2)


@pytest.mark.parametrize("d", [3, 4, 5])
def test_vertices_classified(d):
    v = ns.vertices(d)
    assert ns.classify(v["A"]) == "interior branch"
    assert ns.classify(v["B"]) == "equality branch"
    assert ns.classify(v["C"]) == "equality branch"
    assert ns.classify(v["D"]) == "not allowed"
    assert ns.classify(v["E"]) == "not allowed"


def test_named_examples():
    assert ns.is_coulomb_allowed(ns.PairPQ("inf", 6, 3))
    assert ns.classify(ns.PairPQ(F(14, 3), F(14, 3), 3)) == "equality branch"
    for q in (2, 4, 10, "inf"):
        assert not ns.is_coulomb_allowed(ns.PairPQ(2, q, 3))


def test_equality_line_below_threshold_excluded():
    # on the upper line with p < 14/3 (d = 3): 2/p + 5/q = 3/2 at p = 4 gives q = 5
    assert ns.classify(ns.PairPQ(4, 5, 3)) == "not allowed"


def test_float_band_warning():
    with pytest.warns(RuntimeWarning, match="band"):
        assert ns.classify(ns.PairPQ(14 / 3, 14 / 3, 3)) == "equality branch"


def test_pair_validation():
    with pytest.raises(ValueError):
        ns.PairPQ(0.5, 2, 3)
    with pytest.raises(ValueError):
        ns.PairPQ(3, 3, 2)


@pytest.fixture(scope="module")
def run3():
    return ns._run(SHELL, 3, 0.01, 40.0, 10)


def test_zero_trajectory():
    g = RadialGrid(3, 0.1, 50)
    z = ReducedState(g, 0.0, np.zeros(50), np.zeros(50))
    traj = Trajectory([z, z.copy(t=0.1)], 1, 0.1)
    assert ns.lpq_norm(traj, (4, 4)) == 0.0
    assert ns.pointwise_decay_check(z) == 0.0


def test_constant_snapshot_sup(run3):
    s = run3[5]
    traj = Trajectory([s.copy(t=0.0), s.copy(t=0.5), s.copy(t=1.0)], 1, 0.5)
    assert ns.lpq_norm(traj, ("inf", 3)) == pytest.approx(ns.lq_norm(s, 3), rel=1e-15)


def test_l2_sup_matches_ledger_quadrature(run3):
    # int u^2 dx through the density module's weights
    ref = max(math.sqrt(float(np.dot(s.u**2, densities(s).grid.weights))) for s in run3)
    assert abs(ns.lpq_norm(run3, ("inf", 2)) - ref) <= 1e-12 * ref


def test_homogeneity(run3):
    pair = ns.PairPQ(F(14, 3), F(14, 3), 3)
    base = ns.lpq_norm(run3, pair)
    assert ns.lpq_norm(run3.scaled(-2.5), pair) == pytest.approx(2.5 * base, rel=1e-12)


def test_pointwise_and_sobolev(run3):
    pw = [ns.pointwise_decay_check(s) for s in run3]
    sob = [ns.sobolev_ratio(s) for s in run3]
    assert max(pw) <= 3 and max(sob) <= 2
    s = run3[-1]
    assert ns.pointwise_decay_check(s.scaled(2.0)) == pytest.approx(ns.pointwise_decay_check(s), rel=1e-13)


def test_slow_growth_range():
    assert ns.slow_growth_range(4) == (14 / 3, 8.0)
    with pytest.raises(ValueError):
        ns.slow_growth_experiment(SHELL, 3.0, [10, 20], d=4)


def test_slow_growth_zero():
    rep = ns.slow_growth_experiment(DataSpec("zero"), 14 / 3, [2, 4], d=4, dr=0.05)
    assert rep.norms == [0.0, 0.0]


def test_slow_growth_d4():
    rep = ns.slow_growth_experiment(SHELL, 14 / 3, [10, 20, 40, 80], d=4, dr=0.01)
    assert rep.alpha <= 0.25


def test_saturation():
    traj = ns._run(SHELL, 3, 0.02, 160.0, 10)
    qc = F(14, 3)
    assert ns.saturation_ratio(traj, (qc, qc), 80.0) <= 1.05
