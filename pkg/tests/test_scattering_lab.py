import warnings

import numpy as np
import pytest

from coulomblab import scattering_lab as sl
from coulomblab.radial_evolver import DataSpec

SHELL = DataSpec("gaussian_shell", r_c=2, sigma=0.2)


def test_zero_data_scatters():
    assert sl.zero_data_report().scattering


@pytest.mark.parametrize("d,p", [(3, 3.0), (3, 5.5), (4, 2.0), (6, 2.0)])
def test_defocusing_exponent_window(d, p):
    with pytest.raises(ValueError):
        sl.defocusing_scatter_experiment(SHELL, p=p, d=d, T=1.0)


def test_small_data_rejects_bad_input():
    with pytest.raises(ValueError):
        sl.small_data_experiment(SHELL, f_kind="cubic")
    with pytest.raises(ValueError, match="positive"):
        sl.small_data_experiment(SHELL, amplitudes=(0.0, 1e-4))


def test_left_endpoint_warns():
    with pytest.warns(RuntimeWarning, match="left end"):
        sl.small_data_experiment(SHELL, p=3.0, amplitudes=(1e-4,), T=1.0, dr=0.02)


@pytest.fixture(scope="module")
def defocusing():
    return sl.defocusing_scatter_experiment(DataSpec("gaussian_shell", r_c=2, sigma=0.2, amp=0.5),
                                            p=5.0, T=80.0, dr=0.01)


def test_defocusing_scatters(defocusing):
    assert defocusing.potential_ratio <= 0.01
    assert defocusing.saturation - 1 <= 0.05
    assert defocusing.scattering


def test_defocusing_energy(defocusing):
    assert defocusing.energy_drift <= 1e-3


def test_potential_decay_monotone(defocusing):
    assert defocusing.potential_monotone_after <= 1e-4


@pytest.fixture(scope="module")
def small():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return sl.small_data_experiment(SHELL, p=3.0, f_kind="focusing", amplitudes=(1e-4, 2e-4, 40.0),
                                        T=40.0, dr=0.01)


def test_small_data_ladder(small):
    assert small.small_end_variation <= 0.2 and small.verdict
    assert small.linear_gap <= 0.02


def test_large_focusing_aborts(small):
    big = small.rows[-1]
    assert big.amplitude == 40.0 and big.aborted and np.isnan(big.ratio)
    assert "grew beyond" in big.message


def test_small_kinds_agree_at_small_amplitude():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ratios = [sl.small_data_experiment(SHELL, f_kind=k, amplitudes=(1e-4,), T=10.0, dr=0.02).rows[0].ratio
                  for k in ("defocusing", "focusing", "absolute")]
    assert max(ratios) - min(ratios) <= 1e-6 * ratios[0]
