"""Finite-time scattering indicators for the nonlinear radial equation.

A run is called scattering here when the L^p L^(2p) norm has stopped growing
over the last doubling of the time interval and the potential energy has
drained away. These are operational thresholds, not a proof.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core_types import RadialGrid, ReducedState, Trajectory, energy_window
from .energy_ledger import total_energies
from .norm_suite import PairPQ, data_norm, lpq_partial_norms
from .radial_evolver import DataSpec, cfl_limit, evolve, make_state

SATURATION_TOL = 0.05
POTENTIAL_TOL = 0.01


def potential_energy(state: ReducedState, p: Optional[float] = None) -> float:
    """int |u|^(p+1) dx."""
    p = state.p if p is None else p
    return float(np.dot(np.abs(state.u) ** (p + 1.0), state.grid.weights))


def _check_exponent(d: int, p: float, strict_left: bool):
    if not 3 <= d <= 5:
        raise ValueError("scattering experiments need 3 <= d <= 5")
    lo, hi = energy_window(d)
    ok = (lo < p if strict_left else lo - 1e-12 <= p) and p <= hi + 1e-12
    if not ok:
        raise ValueError(f"p={p} outside ({lo}, {hi}] for d={d}")
    if abs(p - lo) < 1e-12:
        warnings.warn("p sits at the left end of the exponent window", RuntimeWarning, stacklevel=3)


def _grid_for(data: DataSpec, d: int, dr: float, T: float) -> RadialGrid:
    return RadialGrid.covering(d, dr, data.support()[1] + T + 10 * dr)


@dataclass
class ScatterReport:
    d: int
    p: float
    times: np.ndarray
    potential: np.ndarray
    energy: np.ndarray
    norm_T: List[float]
    norm_values: List[float]
    energy_drift: float
    potential_ratio: float
    saturation: float
    scattering: bool
    potential_monotone_after: float = float("nan")


def defocusing_scatter_experiment(data: DataSpec, p: float = 5.0, T: float = 80.0, d: int = 3,
                                  dr: float = 5e-3, cfl: float = 0.9, store_every: int = 20,
                                  n_doublings: int = 4, transient: Optional[float] = None) -> ScatterReport:
    """Evolve the defocusing equation and collect the scattering indicators.

    ``transient`` (default: twice the outer data radius plus 2) is the time after
    which the inward part has passed the origin; the largest snapshot-to-snapshot
    rise of the potential energy after it is reported relative to E.
    """
    _check_exponent(d, p, strict_left=True)
    grid = _grid_for(data, d, dr, T)
    state = make_state(data, grid, zeta=1, p=p)
    dt = cfl * cfl_limit(grid)
    traj = evolve(state, T, dt, store_every=store_every)
    times = traj.times
    pot = np.array([potential_energy(s) for s in traj])
    energy = np.array([total_energies(s).E_total for s in traj])
    e0 = energy[0]
    drift = float(np.max(np.abs(energy - e0)) / e0) if e0 > 0 else 0.0
    t_list = [T / 2**k for k in range(n_doublings, -1, -1)]
    norms = lpq_partial_norms(traj, PairPQ(float(p), float(2 * p), d), t_list)
    sat = norms[-1] / norms[-2] if norms[-2] > 0 else 1.0
    pr = float(pot[-1] / pot[0]) if pot[0] > 0 else 0.0
    t_tr = 2.0 * data.support()[1] + 2.0 if transient is None else transient
    tail = pot[times >= t_tr]
    rise = float(np.max(np.diff(tail), initial=0.0) / e0) if e0 > 0 and tail.size > 1 else 0.0
    scat = (sat - 1.0 <= SATURATION_TOL) and pr <= POTENTIAL_TOL
    return ScatterReport(d, p, times, pot, energy, t_list, norms, drift, pr, sat, bool(scat), rise)


def zero_data_report(d: int = 3, p: float = 5.0) -> ScatterReport:
    z = np.zeros(1)
    return ScatterReport(d, p, z, z, z, [0.0], [0.0], 0.0, 0.0, 1.0, True)


@dataclass
class SmallDataRow:
    amplitude: float
    data_norm: float
    norm: float
    ratio: float
    aborted: bool = False
    message: str = ""


@dataclass
class SmallDataReport:
    kind: str
    p: float
    T: float
    rows: List[SmallDataRow]
    linear_ratio: float

    @property
    def small_end_variation(self) -> float:
        good = [r for r in self.rows if not r.aborted]
        if len(good) < 2:
            return float("nan")
        a, b = good[0].ratio, good[1].ratio
        return abs(a - b) / max(abs(a), abs(b))

    @property
    def linear_gap(self) -> float:
        first = self.rows[0]
        return abs(first.ratio - self.linear_ratio) / self.linear_ratio

    @property
    def verdict(self) -> bool:
        return self.small_end_variation <= 0.2


_KINDS = {"defocusing": (1, "odd"), "focusing": (-1, "odd"), "absolute": (1, "absolute")}


def small_data_experiment(data: DataSpec, p: float = 3.0, f_kind: str = "focusing",
                          amplitudes: Sequence[float] = (1e-4, 2e-4, 4e-4), T: float = 40.0, d: int = 3,
                          dr: float = 5e-3, cfl: float = 0.9, store_every: int = 20) -> SmallDataReport:
    """Norm ratio ||u||_{L^p L^2p([0, T])} / ||data|| along a ladder of amplitudes.

    ``data`` fixes the profile; each ladder entry multiplies it by the amplitude.
    The zeta = 0 run at unit amplitude gives the linear reference ratio.
    """
    if f_kind not in _KINDS:
        raise ValueError(f"f_kind must be one of {sorted(_KINDS)}")
    amps = list(amplitudes)
    if any(a <= 0 for a in amps):
        raise ValueError("amplitudes must be positive (the ladder starts above zero)")
    _check_exponent(d, p, strict_left=False)
    zeta, kind = _KINDS[f_kind]
    grid = _grid_for(data, d, dr, T)
    base = make_state(data, grid)
    dt = cfl * cfl_limit(grid)
    pair = PairPQ(float(p), float(2 * p), d)

    def ratio_for(state: ReducedState):
        traj = evolve(state, T, dt, store_every=store_every, monitor_blowup=True)
        nrm = lpq_partial_norms(traj, pair, [T])[0]
        dn = data_norm(state)
        return dn, nrm, nrm / dn

    lin = ratio_for(base)[2]
    rows = []
    for a in sorted(amps):
        st = ReducedState(grid, 0.0, a * base.w, a * base.wt, zeta, p, kind)
        try:
            dn, nrm, rat = ratio_for(st)
            rows.append(SmallDataRow(a, dn, nrm, rat))
        except FloatingPointError as exc:
            rows.append(SmallDataRow(a, data_norm(st), float("nan"), float("nan"), True, str(exc)))
    return SmallDataReport(f_kind, p, T, rows, lin)
