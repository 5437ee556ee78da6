import math

import numpy as np
import pytest

from coulomblab import harmonics as hm
from coulomblab.core_types import RadialGrid, ReducedState
from coulomblab.energy_ledger import retraction_shell
from coulomblab.radial_evolver import cfl_limit, evolve


def _spherical(x, y, z):
    r = np.sqrt(x * x + y * y + z * z)
    th = np.arccos(np.clip(z / np.where(r > 0, r, 1.0), -1.0, 1.0))
    return r, th, np.arctan2(y, x)


def _bump(r, rc=2.0, s=1.0):
    x = (r - rc) / s
    out = np.zeros_like(r)
    m = np.abs(x) < 1
    out[m] = np.exp(-1 / (1 - x[m] ** 2))
    return out


def _field(basis, coef, radial):
    def u(x, y, z):
        r, th, ph = _spherical(x, y, z)
        ang = sum(c * hm._real_harmonic(ell, m, th, ph) for c, (ell, m) in zip(coef, basis.labels) if c)
        return ang * radial(r)
    return u


def _zero(x, y, z):
    return 0.0 * x


def _sparse(basis, entries):
    coef = np.zeros(len(basis.labels))
    for lab, c in entries:
        coef[basis.labels.index(lab)] = c
    return coef


@pytest.mark.parametrize("L", [0, 2, 5])
def test_orthonormal(L):
    b = hm.AngularBasis(L)
    assert np.max(np.abs(b.gram() - np.eye(len(b.labels)))) <= 1e-13


def test_basis_validation():
    with pytest.raises(ValueError):
        hm.AngularBasis(-1)
    with pytest.raises(ValueError):
        hm.AngularBasis(4, n_theta=3)


def test_radial_input():
    b = hm.AngularBasis(3)
    r = np.linspace(0.1, 5, 50)
    samples = np.repeat(np.exp(-r)[:, None], b.weights.size, axis=1)
    comps = hm.decompose(samples, b, r)
    assert np.allclose(comps[0], math.sqrt(4 * math.pi) * np.exp(-r), rtol=1e-13)
    assert np.max(np.abs(b.project(samples)[1:])) <= 1e-14


def test_single_harmonic():
    b = hm.AngularBasis(3)
    r = np.linspace(0.1, 5, 50)
    th = np.arccos(b.directions[:, 2])
    y10 = math.sqrt(3 / (4 * math.pi)) * np.cos(th)
    samples = (np.exp(-r)[:, None]) * y10[None, :]
    comps = hm.decompose(samples, b, r)
    k = b.labels.index((1, 0))
    assert np.allclose(comps[k], np.exp(-r) / r, rtol=1e-12)
    assert np.max(np.abs(np.delete(b.project(samples), k, axis=0))) <= 1e-14


def test_round_trip_band_limited():
    b = hm.AngularBasis(4)
    rng = np.random.default_rng(0)
    r = np.linspace(0.2, 4, 30)
    comps = rng.normal(size=(len(b.labels), r.size))
    samples = hm.reconstruct(comps, b, r)
    assert np.max(np.abs(hm.reconstruct(hm.decompose(samples, b, r), b, r) - samples)) <= 1e-10
    assert np.max(np.abs(hm.decompose(samples, b, r) - comps)) <= 1e-10


def test_aliasing_warning():
    b = hm.AngularBasis(2)
    r = np.linspace(0.2, 4, 10)
    th = np.arccos(b.directions[:, 2])
    samples = np.outer(np.ones(r.size), np.cos(th) ** 5)
    with pytest.warns(RuntimeWarning, match="band-limited"):
        hm.decompose(samples, b, r)


def test_energy_identity_zero():
    chk = hm.energy_identity_check(_zero, _zero, hm.AngularBasis(2))
    assert (chk.total, chk.summed, chk.defect) == (0.0, 0.0, 0.0)


def test_energy_identity_random_L4():
    b = hm.AngularBasis(4)
    coef = np.random.default_rng(1).normal(size=len(b.labels))
    u = _field(b, coef, lambda r: np.exp(-((r - 3) / 0.7) ** 2))
    ut = _field(b, coef[::-1], lambda r: np.exp(-((r - 3.5) / 0.6) ** 2))
    assert hm.energy_identity_check(u, ut, b).defect <= 1e-6


def test_energy_identity_single_harmonic():
    b = hm.AngularBasis(3)
    coef = _sparse(b, [((2, -1), 1.0)])
    chk = hm.energy_identity_check(_field(b, coef, lambda r: np.exp(-((r - 3) / 0.7) ** 2)), _zero, b)
    assert chk.defect <= 1e-8
    assert np.count_nonzero(np.abs(chk.per_component) > 1e-12 * chk.total) == 1


def test_single_radial_component_matches_direct_run():
    b = hm.AngularBasis(1)
    g = RadialGrid.covering(3, 0.01, 14.0)
    u = _field(b, _sparse(b, [((0, 0), 1.0)]), _bump)
    run = hm.decompose_and_evolve(u, _zero, b, g, 10.0, store_every=100)
    assert len(run.components) == 1
    comp = run.components[0].trajectory
    # the field is Y_00 * bump, so its l = 0 coefficient is the bump itself
    w0 = g.r * _bump(g.r)
    direct = evolve(ReducedState(g, 0.0, w0, np.zeros(g.n)), 10.0, 0.9 * cfl_limit(g), store_every=100)
    assert len(direct) == len(comp)
    for a, c in zip(direct, comp):
        assert np.max(np.abs(a.w - c.w)) <= 1e-14 * np.max(np.abs(w0))


def test_degree_shift():
    b = hm.AngularBasis(2)
    g = RadialGrid.covering(3, 0.01, 14.0)
    U, Ut = hm.sample_components(_field(b, _sparse(b, [((2, 1), 1.0)]), _bump), _zero, b, g)
    k = b.labels.index((2, 1))
    st = hm.component_state(U[k], Ut[k], 2, g)
    assert st.grid.d == 7 and st.grid.lam == 2 * 3
    run = hm.evolve_components([((2, 1), 2, U[k], Ut[k])], g, 8.0, store_every=100)
    direct = RadialGrid(3 + 2 * 2, g.dr, g.n)
    ref = evolve(ReducedState(direct, 0.0, direct.r * U[k], direct.r * Ut[k]), 8.0,
                 0.9 * cfl_limit(direct), store_every=100)
    assert np.array_equal(ref[-1].w, run.components[0].trajectory[-1].w)


def test_all_zero_components():
    with pytest.raises(ValueError):
        hm.evolve_components([((0, 0), 0, np.zeros(100), np.zeros(100))], RadialGrid(3, 0.1, 100), 1.0)


L2_DATA = [((0, 0), 0.8), ((1, -1), -0.6), ((2, 1), 1.1)]


def test_L2_energy_conserved():
    b = hm.AngularBasis(2)
    g = RadialGrid.covering(3, 5e-3, 44.0)
    run = hm.decompose_and_evolve(_field(b, _sparse(b, L2_DATA), _bump), _zero, b, g, 40.0, store_every=200)
    E = run.total_energy()
    assert np.max(np.abs(E - E[0])) / E[0] <= 1e-4


@pytest.fixture(scope="module")
def long_L2_run():
    b = hm.AngularBasis(2)
    g = RadialGrid.covering(3, 0.02, 204.0)
    return hm.decompose_and_evolve(_field(b, _sparse(b, L2_DATA), _bump), _zero, b, g, 200.0, store_every=500)


def _shell(t):
    return retraction_shell(t)[0]


def test_shell_fraction_bounds(long_L2_run):
    f = long_L2_run.shell_fraction(lambda t: 0.0, lambda t: 1e9)
    assert np.allclose(f, 1.0, atol=1e-14)
    with_surface = long_L2_run.shell_fraction(_shell, lambda t: t, boundary_terms=True)
    assert np.all((with_surface >= 0) & (with_surface <= 1))


@pytest.mark.xfail(strict=True, reason="the outgoing half still lags the shell by the initial radius at t = 200")
def test_nonradial_retraction_at_200(long_L2_run):
    frac = long_L2_run.shell_fraction(_shell, lambda t: t, boundary_terms=True)
    assert frac[-1] >= 0.85
