"""Space-time Lebesgue norms of radial trajectories and the radial Coulomb exponent region.

Exponent pairs live in the (1/p, 1/q) plane. For dimension d the allowed region
is bounded by the energy line 1/p + d/q = d/2 - 1 from below and the line
2/p + (2d-1)/q = d - 3/2 from above, with p > 2. The upper line itself belongs to
the region only for p >= 2(2d+1)/(2d-3).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from .core_types import ReducedState, Trajectory
from .energy_ledger import radial_derivative
from .radial_evolver import DataSpec, cfl_limit, evolve, make_state

Number = Union[int, float, Fraction, str]
FLOAT_BAND = 1e-12


def _recip(x: Number) -> Union[Fraction, float]:
    """1/x as an exact Fraction when possible; 1/inf = 0."""
    if isinstance(x, str):
        if x.strip().lower() in ("inf", "infinity", "oo"):
            return Fraction(0)
        x = Fraction(x.strip())
    if isinstance(x, float):
        if math.isinf(x):
            return Fraction(0)
        if x <= 0:
            raise ValueError("exponents must be positive")
        return 1.0 / x
    x = Fraction(x)
    if x <= 0:
        raise ValueError("exponents must be positive")
    return 1 / x


@dataclass(frozen=True)
class PairPQ:
    p: Number
    q: Number
    d: int = 3

    def __post_init__(self):
        if self.d < 3:
            raise ValueError("d must be >= 3")
        for x in (self.inv_p, self.inv_q):
            if x > 1:
                raise ValueError("exponents must satisfy p, q >= 1")

    @property
    def inv_p(self):
        return _recip(self.p)

    @property
    def inv_q(self):
        return _recip(self.q)

    @property
    def exact(self) -> bool:
        return isinstance(self.inv_p, Fraction) and isinstance(self.inv_q, Fraction)

    def as_floats(self) -> Tuple[float, float]:
        """(p, q) as floats with inf for 1/x = 0."""
        ip, iq = float(self.inv_p), float(self.inv_q)
        return (math.inf if ip == 0 else 1 / ip, math.inf if iq == 0 else 1 / iq)


def vertices(d: int) -> Dict[str, PairPQ]:
    """The labelled corners of the allowed region as exact pairs (p, q)."""
    d = int(d)
    inf = "inf"
    q_c = Fraction(2 * (2 * d + 1), 2 * d - 3)
    e_inv_q = Fraction(d - 3, 2 * d)
    return {
        "A": PairPQ(inf, Fraction(2 * d, d - 2), d),
        "B": PairPQ(inf, 2 + Fraction(4, 2 * d - 3), d),
        "C": PairPQ(q_c, q_c, d),
        "D": PairPQ(2, Fraction(2 * (2 * d - 1), 2 * d - 5), d),
        "E": PairPQ(2, inf if e_inv_q == 0 else 1 / e_inv_q, d),
    }


def classify(pair: PairPQ) -> str:
    """'interior branch', 'equality branch' or 'not allowed'."""
    d = pair.d
    ip, iq = pair.inv_p, pair.inv_q
    exact = pair.exact
    if not exact:
        warnings.warn("float exponents: equality branch decided within a 1e-12 band", RuntimeWarning,
                      stacklevel=2)
        ip, iq = float(ip), float(iq)
    tol = 0 if exact else FLOAT_BAND
    half = Fraction(1, 2) if exact else 0.5
    energy = ip + d * iq - (Fraction(d, 2) - 1 if exact else d / 2 - 1)
    upper = 2 * ip + (2 * d - 1) * iq - (Fraction(2 * d - 3, 2) if exact else d - 1.5)
    p_threshold_inv = Fraction(2 * d - 3, 2 * (2 * d + 1))
    if not exact:
        p_threshold_inv = float(p_threshold_inv)
    if abs(upper) <= tol:
        if ip <= p_threshold_inv + tol:
            return "equality branch"
        return "not allowed"
    if ip < half - tol and energy >= -tol and upper < 0:
        return "interior branch"
    return "not allowed"


def is_coulomb_allowed(pair: PairPQ) -> bool:
    return classify(pair) != "not allowed"


# ---------------------------------------------------------------- norms

def _lq(u: np.ndarray, weights: np.ndarray, q: float) -> float:
    if math.isinf(q):
        return float(np.max(np.abs(u))) if u.size else 0.0
    return float(np.dot(np.abs(u) ** q, weights)) ** (1.0 / q)


def lq_norm(state: ReducedState, q: float) -> float:
    """L^q(R^d) norm of one radial snapshot (midpoint rule, weight sigma r^(d-1) dr)."""
    return _lq(state.u, state.grid.weights, float(q))


def lpq_norm(traj: Trajectory, pair: Union[PairPQ, Tuple[Number, Number]], t_max: float = None) -> float:
    """L^p_t L^q_x norm over the stored snapshots (trapezoid in t, sup for p = inf)."""
    if traj is None or len(traj) == 0:
        raise ValueError("empty trajectory")
    if not isinstance(pair, PairPQ):
        pair = PairPQ(pair[0], pair[1], traj.grid.d)
    p, q = pair.as_floats()
    times = traj.times
    keep = times <= t_max + 1e-12 if t_max is not None else np.ones(times.size, bool)
    inner = np.array([lq_norm(s, q) for s, k in zip(traj, keep) if k])
    t = times[keep]
    if math.isinf(p):
        return float(np.max(inner))
    vals = inner**p
    total = float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(t))) if t.size > 1 else 0.0
    return total ** (1.0 / p)


def lpq_partial_norms(traj: Trajectory, pair, t_list: Sequence[float]) -> List[float]:
    """lpq_norm over [t0, T] for each T, sharing one pass over the snapshots."""
    if not isinstance(pair, PairPQ):
        pair = PairPQ(pair[0], pair[1], traj.grid.d)
    p, q = pair.as_floats()
    times = traj.times
    inner = np.array([lq_norm(s, q) for s in traj])
    out = []
    for T in t_list:
        k = times <= T + 1e-9
        if math.isinf(p):
            out.append(float(np.max(inner[k])))
            continue
        vals = inner[k] ** p
        tt = times[k]
        total = float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(tt))) if tt.size > 1 else 0.0
        out.append(total ** (1.0 / p))
    return out


def h1_norm(state: ReducedState) -> float:
    """||u||_{H^1} with ||u||^2 = int |grad u|^2 + |u|^2/|x| dx."""
    g = state.grid
    w_r = radial_derivative(state.w, g.dr)
    u = state.w / g.rpow
    u_r = (w_r - g.c * state.w / g.r) / g.rpow
    return math.sqrt(float(np.dot(u_r**2 + u**2 / g.r, g.weights)))


def data_norm(state: ReducedState) -> float:
    """||(u, u_t)||_{H^1 x L^2}."""
    return math.sqrt(h1_norm(state) ** 2 + float(np.dot(state.ut**2, state.grid.weights)))


def pointwise_decay_check(state: ReducedState) -> float:
    """sup_j r_j^((2d-3)/4) |u_j| / ||u||_{H^1}; zero for the zero state."""
    nrm = h1_norm(state)
    if nrm == 0:
        return 0.0
    g = state.grid
    return float(np.max(g.r ** ((2 * g.d - 3) / 4.0) * np.abs(state.u))) / nrm


def sobolev_ratio(state: ReducedState) -> float:
    """||u||_{L^(2 + 4/(2d-3))} / ||u||_{H^1}."""
    nrm = h1_norm(state)
    if nrm == 0:
        return 0.0
    d = state.grid.d
    return lq_norm(state, 2.0 + 4.0 / (2 * d - 3)) / nrm


# ---------------------------------------------------------------- growth experiments

@dataclass
class GrowthReport:
    q: float
    T: List[float]
    norms: List[float]
    alpha: float


def slow_growth_range(d: int) -> Tuple[float, float]:
    lo = 2.0 * (2 * d - 1) / (2 * d - 5)
    hi = math.inf if d == 3 else 2.0 * d / (d - 3)
    return lo, hi


def _run(data: Union[DataSpec, ReducedState], d: int, dr: float, T: float, store_every: int,
         cfl: float = 0.9) -> Trajectory:
    if isinstance(data, ReducedState):
        state = data
    else:
        from .core_types import RadialGrid

        lo, hi = data.support()
        grid = RadialGrid.covering(d, dr, hi + T + 10 * dr)
        state = make_state(data, grid)
    return evolve(state, T, cfl * cfl_limit(state.grid), store_every=store_every)


def slow_growth_experiment(data: Union[DataSpec, ReducedState], q: float, T_list: Sequence[float],
                           d: int = 4, dr: float = 0.01, store_every: int = 10) -> GrowthReport:
    """||u||_{L^2 L^q([0, T])} for each T and the fitted exponent of T^alpha."""
    d = data.grid.d if isinstance(data, ReducedState) else d
    lo, hi = slow_growth_range(d)
    if not (lo - 1e-12 <= q <= hi + 1e-12):
        raise ValueError(f"q={q} outside the range [{lo}, {hi}] for d={d}")
    T_list = sorted(float(t) for t in T_list)
    traj = _run(data, d, dr, T_list[-1], store_every)
    norms = lpq_partial_norms(traj, PairPQ(2, q, d) if not isinstance(q, float) else PairPQ(2.0, q, d),
                              T_list)
    if max(norms) == 0:
        return GrowthReport(q, T_list, norms, 0.0)
    alpha = float(np.polyfit(np.log(T_list), np.log(norms), 1)[0])
    return GrowthReport(q, T_list, norms, alpha)


def saturation_ratio(traj: Trajectory, pair, T: float) -> float:
    """Norm over [0, 2T] divided by the norm over [0, T]."""
    a, b = lpq_partial_norms(traj, pair, [T, 2 * T])
    return b / a if a > 0 else 1.0
