"""Energy densities, inward/outward energies, cone fluxes and Morawetz diagnostics.

Densities are pointwise values at the staggered nodes; integrals use the
midpoint rule in r and the trapezoid rule in t. Radial derivatives of w are
fourth-order central differences with the odd ghost extension at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from .core_types import RadialGrid, ReducedState, Trajectory
from .radial_evolver import center_value


def radial_derivative(w: np.ndarray, dr: float) -> np.ndarray:
    """d/dr of w at the nodes (fourth order, odd ghosts on the left, zeros on the right)."""
    n = w.size
    wp = np.empty(n + 4)
    wp[2:-2] = w
    wp[1], wp[0] = -w[0], -w[1]
    wp[-2:] = 0.0
    return (wp[:-4] - 8.0 * wp[1:-3] + 8.0 * wp[3:-1] - wp[4:]) / (12.0 * dr)


def mu_constant(d: int, p: float, zeta: int) -> float:
    if zeta == 0:
        return 0.5
    return min(0.5, (d - 1) * (p - 1) / 4.0)


@dataclass
class DensityField:
    grid: RadialGrid
    t: float
    e: np.ndarray
    eprime: np.ndarray
    eminus: np.ndarray
    eplus: np.ndarray
    M: np.ndarray
    u0: float = float("nan")

    def integral(self, name: str) -> float:
        return float(np.dot(getattr(self, name), self.grid.weights))


@dataclass
class EnergyReport:
    t: float
    E_total: float
    E_minus: float
    E_plus: float
    Eprime_integral: float
    M_integral: float
    center_u0: float = float("nan")
    center_integral_accum: float = 0.0
    morawetz_accum: float = 0.0
    shell_frac_inner: float = float("nan")
    shell_frac_outer: float = float("nan")

    def row(self) -> Dict[str, float]:
        return {
            "t": self.t,
            "E": self.E_total,
            "E_minus": self.E_minus,
            "E_plus": self.E_plus,
            "Eprime_integral": self.Eprime_integral,
            "center_u0": self.center_u0,
            "morawetz_accum": self.morawetz_accum,
            "shell_frac_inner": self.shell_frac_inner,
            "shell_frac_outer": self.shell_frac_outer,
        }


def _potential_density(u: np.ndarray, state: ReducedState) -> np.ndarray:
    if not state.zeta:
        return np.zeros_like(u)
    return state.zeta * np.abs(u) ** (state.p + 1.0) / (state.p + 1.0)


def L_operators(state: ReducedState):
    """(L u, L+ u, L- u) with L u = r^-c w_r and L+- u = L u +- u_t."""
    g = state.grid
    lu = radial_derivative(state.w, g.dr) / g.rpow
    ut = state.wt / g.rpow
    return lu, lu + ut, lu - ut


def densities(state: ReducedState) -> DensityField:
    g = state.grid
    r, c, lam, d = g.r, g.c, g.lam, g.d
    w_r = radial_derivative(state.w, g.dr)
    u = state.w / g.rpow
    ut = state.wt / g.rpow
    u_r = (w_r - c * state.w / r) / g.rpow
    lu = w_r / g.rpow
    pot = _potential_density(u, state)
    u2 = u * u
    e = 0.5 * u_r**2 + 0.5 * ut**2 + u2 / (2 * r) + pot
    ep = 0.5 * lam * u2 / r**2 + u2 / (2 * r) + pot
    eminus = 0.25 * (lu + ut) ** 2 + 0.5 * ep
    eplus = 0.25 * (lu - ut) ** 2 + 0.5 * ep
    M = 0.5 * lam * u2 / r**3 + u2 / (4 * r**2)
    if state.zeta:
        M = M + state.zeta * (d - 1) * (state.p - 1) / (4 * (state.p + 1)) * np.abs(u) ** (state.p + 1) / r
    u0 = center_value(state) if d == 3 else float("nan")
    return DensityField(g, state.t, e, ep, eminus, eplus, M, u0)


def total_energies(state: ReducedState) -> EnergyReport:
    df = densities(state)
    return EnergyReport(
        t=state.t,
        E_total=df.integral("e"),
        E_minus=df.integral("eminus"),
        E_plus=df.integral("eplus"),
        Eprime_integral=df.integral("eprime"),
        M_integral=df.integral("M"),
        center_u0=df.u0,
    )


def pointwise_checks(state: ReducedState) -> Dict[str, float]:
    """Smallest margins of the pointwise inequalities (all should be >= 0 up to rounding)."""
    df = densities(state)
    mu = mu_constant(state.grid.d, state.p, state.zeta)
    return {
        "min_e": float(df.e.min()),
        "min_eprime": float(df.eprime.min()),
        "min_eminus": float(df.eminus.min()),
        "min_eplus": float(df.eplus.min()),
        "min_M": float(df.M.min()),
        "min_M_minus_mu_eprime_over_r": float(np.min(df.M - mu * df.eprime / state.grid.r)),
    }


# ---------------------------------------------------------------- partial-cell radial integrals

def _cell_fraction(grid: RadialGrid, a: float, b: float) -> np.ndarray:
    """Fraction of each cell [r_j - dr/2, r_j + dr/2] lying inside [a, b]."""
    lo = np.arange(grid.n) * grid.dr
    hi = lo + grid.dr
    overlap = np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)
    return overlap / grid.dr


def ball_integral(values: np.ndarray, grid: RadialGrid, a: float = 0.0, b: float = math.inf) -> float:
    """int_{a<|x|<b} values dx with midpoint weights and partial end cells."""
    if b <= a:
        return 0.0
    if a <= 0.0 and b >= grid.edge:
        return float(np.dot(values, grid.weights))
    frac = _cell_fraction(grid, a, b)
    return float(np.dot(values * frac, grid.weights))


def _interp(values: np.ndarray, grid: RadialGrid, radius: float) -> float:
    return float(np.interp(radius, grid.r, values, left=values[0], right=0.0))


def lemma_L_check(state: ReducedState, a: float = 0.0, b: float = math.inf):
    """Both sides of int(|Lu|^2 + lam u^2/r^2) = int |u_r|^2 + boundary terms over a < |x| < b."""
    g = state.grid
    w_r = radial_derivative(state.w, g.dr)
    u = state.w / g.rpow
    u_r = (w_r - g.c * state.w / g.r) / g.rpow
    lu = w_r / g.rpow
    lhs = ball_integral(lu**2 + g.lam * u**2 / g.r**2, g, a, b)
    rhs = ball_integral(u_r**2, g, a, b)
    if math.isfinite(b) and b < g.edge:
        rhs += g.c * g.sigma * b ** (g.d - 2) * _interp(u, g, b) ** 2
    if a > 0:
        rhs -= g.c * g.sigma * a ** (g.d - 2) * _interp(u, g, a) ** 2
    return lhs, rhs


def shell_fraction(state: ReducedState, inner: float, outer: float, total: Optional[float] = None) -> float:
    """Share of the total energy carried by inner < |x| < outer."""
    if not (0 <= inner < outer):
        raise ValueError("need 0 <= inner < outer")
    df = densities(state)
    total = df.integral("e") if total is None else total
    if total == 0:
        return 0.0
    return ball_integral(df.e, state.grid, inner, outer) / total


def retraction_shell(t: float):
    """The log-width shell (t - (ln t)^2, t)."""
    lt = math.log(t) ** 2 if t > 1 else 0.0
    return max(0.0, t - lt), t


# ---------------------------------------------------------------- trajectory diagnostics

def _trapezoid(y, x) -> float:
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.size < 2:
        return 0.0
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def energy_series(traj: Trajectory, inner_c: float = 0.5) -> list:
    """EnergyReport rows for every snapshot, with running Morawetz and centre accumulators."""
    rows = []
    prev = None
    acc_m = acc_c = 0.0
    d = traj.grid.d
    for s in traj:
        rep = total_energies(s)
        if prev is not None:
            h = rep.t - prev.t
            acc_m += 0.5 * h * (rep.M_integral + prev.M_integral)
            if d == 3:
                acc_c += 0.5 * h * math.pi * (rep.center_u0**2 + prev.center_u0**2)
        rep.morawetz_accum = acc_m
        rep.center_integral_accum = acc_c
        if rep.E_total > 0:
            df = densities(s)
            rep.shell_frac_inner = ball_integral(df.e, s.grid, 0.0, inner_c * s.t) / rep.E_total
            lo, hi = retraction_shell(s.t)
            rep.shell_frac_outer = ball_integral(df.e, s.grid, lo, hi) / rep.E_total if hi > lo else 0.0
        else:
            rep.shell_frac_inner = rep.shell_frac_outer = 0.0
        rows.append(rep)
        prev = rep
    return rows


@dataclass
class Cone:
    """Truncated light cone: backward |x| + t = apex or forward t - |x| = apex, for t1 <= t <= t2."""

    direction: str
    apex: float
    t1: float
    t2: float

    def radius(self, t):
        if self.direction == "backward":
            return self.apex - t
        if self.direction == "forward":
            return t - self.apex
        raise ValueError("direction must be 'backward' or 'forward'")


_FLUX_KINDS = {"Qmm": "backward", "Qpm": "backward", "Qmp": "forward", "Qpp": "forward"}


def _flux_integrand(state: ReducedState, kind: str) -> np.ndarray:
    if kind in ("Qmm", "Qpp"):
        return densities(state).eprime
    _, lp, lm = L_operators(state)
    return 0.5 * (lm**2 if kind == "Qpm" else lp**2)


def _time_nodes(traj: Trajectory, t1: float, t2: float):
    times = traj.times
    if t1 < times[0] - 1e-9 or t2 > times[-1] + 1e-9:
        raise ValueError("cone leaves the stored time window")
    inner = [k for k, t in enumerate(times) if t1 + 1e-12 < t < t2 - 1e-12]
    return inner


def _value_at(traj: Trajectory, t: float, fn):
    """fn(snapshot) interpolated linearly between the two snapshots bracketing t."""
    times = traj.times
    k = int(np.searchsorted(times, t))
    if k < len(times) and abs(times[k] - t) < 1e-9:
        return fn(traj[k])
    if k > 0 and abs(times[k - 1] - t) < 1e-9:
        return fn(traj[k - 1])
    k = min(max(k, 1), len(times) - 1)
    t0, t1 = times[k - 1], times[k]
    a = (t - t0) / (t1 - t0)
    return (1 - a) * fn(traj[k - 1]) + a * fn(traj[k])


def cone_flux(traj: Trajectory, cone: Cone, kind: str) -> float:
    """Energy flux through a truncated cone; kind in {Qmm, Qpm, Qmp, Qpp}.

    With dS = sqrt(2) sigma r^(d-1) dt on the cone, the 1/sqrt(2) surface factor
    reduces every flux to a time integral of (integrand * sigma r^(d-1)) along r(t).
    """
    if kind not in _FLUX_KINDS:
        raise ValueError(f"unknown flux kind {kind!r}")
    if _FLUX_KINDS[kind] != cone.direction:
        raise ValueError(f"{kind} is a flux through a {_FLUX_KINDS[kind]} cone")
    if cone.t2 < cone.t1:
        raise ValueError("need t1 <= t2")
    g = traj.grid
    inner = _time_nodes(traj, cone.t1, cone.t2)

    def sample(state, t):
        rad = cone.radius(t)
        if rad < 0:
            raise ValueError("cone radius negative inside [t1, t2]")
        if rad > g.edge:
            raise ValueError("cone leaves the grid")
        vals = _flux_integrand(state, kind)
        return _interp(vals, g, rad) * g.sigma * rad ** (g.d - 1)

    ts = [cone.t1] + [traj.times[k] for k in inner] + [cone.t2]
    ys = [_value_at(traj, cone.t1, lambda s: sample(s, cone.t1))]
    ys += [sample(traj[k], traj.times[k]) for k in inner]
    ys.append(_value_at(traj, cone.t2, lambda s: sample(s, cone.t2)))
    return _trapezoid(ys, ts)


@dataclass
class ConeLaw:
    lhs: float
    morawetz: float
    flux: float
    center: float
    energy: float

    @property
    def residual(self) -> float:
        if self.energy == 0:
            return 0.0
        return abs(self.lhs - (self.morawetz + self.flux + self.center)) / self.energy


def cone_law_terms(traj: Trajectory, s: float, t0: float) -> ConeLaw:
    if not t0 <= s:
        raise ValueError("need t0 <= s")
    g = traj.grid
    st0 = traj.nearest(t0)
    if abs(st0.t - t0) > 1e-9:
        lhs = _value_at(traj, t0, lambda x: ball_integral(densities(x).eminus, g, 0.0, s - t0))
        energy = _value_at(traj, t0, lambda x: densities(x).integral("e"))
    else:
        df = densities(st0)
        lhs = ball_integral(df.eminus, g, 0.0, s - t0)
        energy = df.integral("e")
    inner = _time_nodes(traj, t0, s)
    ts = [t0] + [traj.times[k] for k in inner] + [s]

    def m_in_cone(state, t):
        return ball_integral(densities(state).M, g, 0.0, s - t)

    ms = [_value_at(traj, t0, lambda x: m_in_cone(x, t0))]
    ms += [m_in_cone(traj[k], traj.times[k]) for k in inner]
    ms.append(0.0)
    morawetz = _trapezoid(ms, ts)
    flux = cone_flux(traj, Cone("backward", s, t0, s), "Qmm")
    center = 0.0
    if g.d == 3:
        cs = [_value_at(traj, t, lambda x: center_value(x) ** 2) for t in ts]
        center = math.pi * _trapezoid(cs, ts)
    return ConeLaw(lhs, morawetz, flux, center, energy)


def cone_law_check(traj: Trajectory, s: float, t0: float) -> float:
    """Relative residual of the cone law over the backward cone |x| + t = s, t0 <= t <= s."""
    return cone_law_terms(traj, s, t0).residual


@dataclass
class MorawetzCheck:
    lhs: float
    E_minus_0: float
    E_minus_T: float
    energy: float

    @property
    def defect(self) -> float:
        if self.energy == 0:
            return 0.0
        return abs(self.lhs + self.E_minus_T - self.E_minus_0) / self.energy


def morawetz_identity_check(traj: Trajectory, rows: Optional[list] = None) -> MorawetzCheck:
    """int_0^T int M (+ pi int |u(0,t)|^2 in d = 3) against E_-(0) - E_-(T)."""
    rows = rows if rows is not None else energy_series(traj)
    lhs = rows[-1].morawetz_accum + rows[-1].center_integral_accum
    return MorawetzCheck(lhs, rows[0].E_minus, rows[-1].E_minus, rows[0].E_total)


@dataclass
class HalfEnergy:
    t: np.ndarray
    kinetic: np.ndarray
    h1_coulomb: np.ndarray
    h1_dot: np.ndarray
    energy: float

    def deviation(self, which: str, fraction: float = 0.25) -> float:
        """max |value/E - 1| over the final ``fraction`` of the run."""
        vals = getattr(self, which)
        keep = self.t >= self.t[-1] - fraction * (self.t[-1] - self.t[0])
        if self.energy == 0:
            return 0.0
        return float(np.max(np.abs(vals[keep] / self.energy - 1.0)))


def half_energy_check(traj: Trajectory) -> HalfEnergy:
    """Curves of ||u_t||^2, ||u||^2 in the Coulomb H^1 norm and ||u||^2 in dot-H^1."""
    if traj[0].zeta != 0:
        raise ValueError("half-energy diagnostics apply to linear runs")
    g = traj.grid
    ts, kin, hc, hd = [], [], [], []
    for s in traj:
        w_r = radial_derivative(s.w, g.dr)
        u = s.w / g.rpow
        u_r = (w_r - g.c * s.w / g.r) / g.rpow
        grad = float(np.dot(u_r**2, g.weights))
        pot = float(np.dot(u * u / g.r, g.weights))
        ts.append(s.t)
        kin.append(float(np.dot((s.wt / g.rpow) ** 2, g.weights)))
        hc.append(grad + pot)
        hd.append(grad)
    energy = total_energies(traj[0]).E_total
    return HalfEnergy(np.array(ts), np.array(kin), np.array(hc), np.array(hd), energy)


@dataclass
class DecayFit:
    slope: float
    kappa: float
    expected_max: float

    @property
    def passed(self) -> bool:
        return self.slope <= self.expected_max


def weighted_morawetz_fit(traj_or_series, kappa: float = 1.0, times=None, noise_floor: float = 1e-10) -> DecayFit:
    """Least-squares slope of log E_-(t) against log t over [T/4, T].

    Accepts a Trajectory or a precomputed sequence of E_- values with ``times``.
    """
    if isinstance(traj_or_series, Trajectory):
        if traj_or_series[0].zeta != 0:
            raise ValueError("weighted Morawetz fit applies to linear runs")
        reps = [total_energies(s) for s in traj_or_series]
        times = np.array([r.t for r in reps])
        em = np.array([r.E_minus for r in reps])
        energy = reps[0].E_total
    else:
        em = np.asarray(traj_or_series, dtype=float)
        times = np.asarray(times, dtype=float)
        energy = float(np.max(em)) if em.size else 0.0
    if energy <= 0:
        raise ValueError("zero energy: decay fit undefined")
    T = times[-1]
    keep = (times >= T / 4) & (times > 0)
    if keep.sum() < 3:
        raise ValueError("not enough samples in [T/4, T]")
    if np.any(em[keep] < noise_floor * energy):
        raise ValueError("E_- below the noise floor: fit aborted")
    slope = float(np.polyfit(np.log(times[keep]), np.log(em[keep]), 1)[0])
    expected = -0.8 if kappa >= 1 else -kappa + 0.1
    return DecayFit(slope, kappa, expected)


def summation_constant(traj: Trajectory, radius: float = 4.0, t_prime: float = 1.0) -> float:
    """Measured C in sum_k int_{|x|<R} e(x, k T') <= C R E / T'."""
    times = traj.times
    k_max = int(math.floor((times[-1] + 1e-9) / t_prime))
    total = 0.0
    energy = total_energies(traj[0]).E_total
    for k in range(0, k_max + 1):
        total += _value_at(traj, k * t_prime, lambda s: ball_integral(densities(s).e, s.grid, 0.0, radius))
    return total * t_prime / (radius * energy) if energy else 0.0
