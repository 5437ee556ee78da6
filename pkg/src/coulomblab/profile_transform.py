"""Klein-Gordon profiles and Coulomb waves near the light cone.

The change of variables

    y = (r - t + ln(t + r)) / 2,    tau = (t - r + ln(t + r)) / 2

turns a Klein-Gordon solution v(y, tau) with mass^2 = 2 into an approximate
solution w(r, t) = rho((t - r)/sqrt t) v(y, tau) of w_tt - w_rr + w/r = f, with an
explicitly computable defect f. Running the Coulomb evolver with f as a source
produces a Coulomb wave whose norm is tied to the Klein-Gordon norm of v.
The reverse direction cuts a Coulomb wave off with chi and reads it in (y, tau).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import ndimage
from scipy.interpolate import CubicSpline

from . import kg_engine
from .core_types import RadialGrid, ReducedState, Trajectory
from .energy_ledger import radial_derivative, total_energies
from .kg_engine import KgWave
from .radial_evolver import cfl_limit, evolve

T0_DEFAULT = 100.0


# ---------------------------------------------------------------- coordinates

def map_rt_to_ytau(r, t):
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    s = t + r
    if np.any(s <= 0):
        raise ValueError("the map needs t + r > 0")
    lg = np.log(s)
    return 0.5 * (r - t + lg), 0.5 * (t - r + lg)


def map_ytau_to_rt(y, tau):
    y = np.asarray(y, dtype=float)
    tau = np.asarray(tau, dtype=float)
    e = np.exp(y + tau)
    return 0.5 * (e + y - tau), 0.5 * (e - y + tau)


# ---------------------------------------------------------------- smooth cutoffs

def smooth_step(x, order: int = 0):
    """C-infinity step S(x): 0 for x <= 0, 1 for x >= 1, built from exp(-1/x).

    S = f(x) / (f(x) + f(1 - x)) with f(x) = exp(-1/x); ``order`` 1 or 2 gives the
    analytic derivatives.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inner = (x > 0) & (x < 1)
    if order == 0:
        out[x >= 1] = 1.0
    if not np.any(inner):
        return out[()] if out.ndim == 0 else out
    xi = x[inner]
    q = 1.0 / xi - 1.0 / (1.0 - xi)  # S = 1/(1 + e^q)
    with np.errstate(over="ignore"):
        s = 0.5 * (1.0 - np.tanh(0.5 * q))
        ss = 0.25 / np.cosh(0.5 * q) ** 2  # S (1 - S)
    dq = -1.0 / xi**2 - 1.0 / (1.0 - xi) ** 2
    if order == 0:
        out[inner] = s
    elif order == 1:
        out[inner] = -ss * dq
    elif order == 2:
        d2q = 2.0 / xi**3 - 2.0 / (1.0 - xi) ** 3
        s1 = -ss * dq
        out[inner] = -s1 * (1.0 - 2.0 * s) * dq - ss * d2q
    else:
        raise ValueError("order must be 0, 1 or 2")
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class CutoffRho:
    """Decreasing cutoff: 1 for s <= 1/2, 0 for s >= 2."""

    lo: float = 0.5
    hi: float = 2.0

    def __call__(self, s, order: int = 0):
        width = self.hi - self.lo
        x = (np.asarray(s, dtype=float) - self.lo) / width
        if order == 0:
            return 1.0 - smooth_step(x, 0)
        return -smooth_step(x, order) / width**order


@dataclass(frozen=True)
class CutoffChi:
    """Increasing cutoff: 0 for s <= 1, 1 for s >= 2."""

    lo: float = 1.0
    hi: float = 2.0

    def __call__(self, s, order: int = 0):
        width = self.hi - self.lo
        x = (np.asarray(s, dtype=float) - self.lo) / width
        return smooth_step(x, order) / width**order


RHO = CutoffRho()
CHI = CutoffChi()


# ---------------------------------------------------------------- v samplers

class _ExactSampler:
    def __init__(self, wave: KgWave):
        self.wave = wave

    def __call__(self, y, tau):
        return kg_engine.eval(self.wave, y, tau)


class ProfileTable:
    """Cubic B-spline table of (v, v_y, v_tau) on a rectangle of the (y, tau) plane.

    Each tau row comes from one FFT; outside the rectangle the samples are zero,
    so the rectangle has to contain every point where v matters.
    """

    def __init__(self, wave: KgWave, y_range, tau_range, d_tau: float = 0.02, dy: float = 0.02):
        self.wave = wave
        ylo, yhi = y_range
        tlo, thi = tau_range
        self.y_range = (ylo, yhi)
        self.tau_range = (tlo, thi)
        taus = np.linspace(tlo, thi, max(4, int(math.ceil((thi - tlo) / d_tau)) + 1))
        half = max(abs(ylo), abs(yhi)) + abs(thi) + wave.reach() + 20.0
        rows = [kg_engine.profile(wave, tau, half_width=half, dy=dy) for tau in taus]
        y = rows[0][0]
        keep = (y >= ylo - 4 * dy) & (y <= yhi + 4 * dy)
        y = y[keep]
        # cubic B-spline coefficients, evaluated later with map_coordinates
        self._coef = [ndimage.spline_filter(np.array([row[k][keep] for row in rows]), order=3, mode="mirror")
                      for k in (1, 2, 3)]
        self._origin = (taus[0], y[0])
        self._step = (taus[1] - taus[0], y[1] - y[0])
        self._bounds = (y[0], y[-1], taus[0], taus[-1])

    def __call__(self, y, tau):
        y, tau = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(tau, dtype=float))
        out = [np.zeros(y.shape) for _ in range(3)]
        y0, y1, t0, t1 = self._bounds
        inside = (y >= y0) & (y <= y1) & (tau >= t0) & (tau <= t1)
        if np.any(inside):
            coords = np.stack([(tau[inside] - self._origin[0]) / self._step[0],
                               (y[inside] - self._origin[1]) / self._step[1]])
            for k, coef in enumerate(self._coef):
                out[k][inside] = ndimage.map_coordinates(coef, coords, order=3, mode="mirror", prefilter=False)
        return tuple(out)


def _sampler(v):
    return v if callable(v) and not isinstance(v, KgWave) else _ExactSampler(v)


# ---------------------------------------------------------------- w and f

def _active(r, t, tail: float):
    """Points where rho > 0 and v may matter: t - 2 sqrt t < r < t + tail."""
    return (r > t - 2.0 * np.sqrt(t)) & (r < t + tail) & (r > 0)


def build_w(v, r, t, d: int = 3, tail: float = np.inf):
    """w = rho((t - r)/sqrt t) v(y, tau) with its first derivatives (w, w_r, w_t).

    ``v`` is a :class:`KgWave` (evaluated exactly) or a sampler such as
    :class:`ProfileTable`. Points with r > t + ``tail`` are treated as zero.
    """
    if d < 3:
        raise ValueError("d must be >= 3")
    r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    w = np.zeros(r.shape)
    wr = np.zeros(r.shape)
    wt = np.zeros(r.shape)
    m = _active(r, t, tail)
    if not np.any(m) or (isinstance(v, KgWave) and v.is_zero()):
        return w, wr, wt
    rr, tt = r[m], t[m]
    y, tau = map_rt_to_ytau(rr, tt)
    val, vy, vt = _sampler(v)(y, tau)
    sq = np.sqrt(tt)
    s = (tt - rr) / sq
    rho, rho1 = RHO(s), RHO(s, 1)
    inv = 0.5 / (tt + rr)
    w[m] = rho * val
    wr[m] = -rho1 * val / sq + rho * (vy * (0.5 + inv) + vt * (-0.5 + inv))
    wt[m] = (tt + rr) / (2.0 * tt * sq) * rho1 * val + rho * (vy * (-0.5 + inv) + vt * (0.5 + inv))
    return w, wr, wt


def error_term_f(v, r, t, d: int = 3, tail: float = np.inf):
    """Defect f = w_tt - w_rr + w/r of :func:`build_w`, with its five pieces.

    Returns (f, parts) where ``parts`` maps J1..J5 to arrays. For d >= 4 the
    reduced equation carries lam/r^2 as well; that contribution is returned as
    ``parts["lam"]`` and included in f, so f is always the source for the reduced
    evolver.
    """
    r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    parts = {k: np.zeros(r.shape) for k in ("J1", "J2", "J3", "J4", "J5")}
    lam = 0.25 * (d - 1) * (d - 3)
    if lam:
        parts["lam"] = np.zeros(r.shape)
    m = _active(r, t, tail)
    if np.any(m) and not (isinstance(v, KgWave) and v.is_zero()):
        rr, tt = r[m], t[m]
        y, tau = map_rt_to_ytau(rr, tt)
        val, vy, vt = _sampler(v)(y, tau)
        sq = np.sqrt(tt)
        s = (tt - rr) / sq
        rho, rho1, rho2 = RHO(s), RHO(s, 1), RHO(s, 2)
        parts["J1"][m] = -(tt + 3 * rr) / (4 * tt**2 * sq) * rho1 * val
        parts["J2"][m] = (rr - tt) * (rr + 3 * tt) / (4 * tt**3) * rho2 * val
        parts["J3"][m] = (tt - rr) / (2 * tt * sq) * rho1 * (vy - vt)
        parts["J4"][m] = (3 * tt + rr) * rho1 * (vy + vt) / (2 * tt * sq * (tt + rr))
        parts["J5"][m] = rho * (tt - rr) * val / (rr * (tt + rr))
        if lam:
            parts["lam"][m] = lam * rho * val / rr**2
    f = sum(parts.values())
    return f, parts


# ---------------------------------------------------------------- forward direction

@dataclass
class ForwardReport:
    T0: float
    T1: float
    k_norm: float
    c_norm_sq: float
    ratio: float
    energy_sourced: float
    energy_free: float
    l2_sourced: float
    duhamel_integral: float
    duhamel_bound: float
    energy_gap: float
    match_error: float
    extra: Dict[str, float] = field(default_factory=dict)

    @property
    def duhamel_ok(self) -> bool:
        return self.energy_gap <= self.duhamel_bound * (1 + 1e-9) + 1e-300

    def row(self) -> Dict[str, float]:
        out = {k: getattr(self, k) for k in ("T0", "T1", "k_norm", "c_norm_sq", "ratio", "energy_sourced",
                                             "energy_free", "l2_sourced", "duhamel_integral",
                                             "duhamel_bound", "energy_gap", "match_error")}
        out.update(self.extra)
        return out


def reference_packet(center: float = -6.0, width: float = 1.0, xi0: float = 4.0) -> KgWave:
    """Right-moving packet that reaches r ~ t well inside the rho = 1 zone."""
    return KgWave.packet(center, width, xi0, m2=2.0, direction=1)


def _table_for(wave: KgWave, T0: float, T1: float, tail: float, d_tau: float) -> ProfileTable:
    lo_log = math.log(max(2 * T0 - 2 * math.sqrt(T0), 1.0))
    hi_log = math.log(2 * T1 + tail)
    delta_hi = 2 * math.sqrt(T1)
    tau_range = (0.5 * (-tail + lo_log) - 0.1, 0.5 * (delta_hi + hi_log) + 0.1)
    y_range = (0.5 * (-delta_hi + lo_log) - 0.1, 0.5 * (tail + hi_log) + 0.1)
    return ProfileTable(wave, y_range, tau_range, d_tau=d_tau, dy=d_tau)


def forward_transform_experiment(v: KgWave, d: int = 3, T0: float = T0_DEFAULT, T1: float = 400.0,
                                 dr: float = 0.02, cfl: float = 0.9, tail: float = 12.0,
                                 margin: float = 10.0, table_step: float = 0.02) -> ForwardReport:
    """Run the Coulomb evolver from the constructed data at T0 to T1, with and without f.

    The squared C-norm is taken from the large-time surrogate 2E + ||u||^2 of the
    sourced run and compared with sigma_{d-1} ||v||_K^2.
    """
    if not T1 > T0 > 0:
        raise ValueError("need T1 > T0 > 0")
    if T0 - 2 * math.sqrt(T0) <= 0:
        raise ValueError("T0 too small: the cutoff window reaches the origin")
    grid = RadialGrid.covering(d, dr, T1 + tail + margin)
    if grid.edge < T1 + tail + 4 * dr:
        raise ValueError("grid does not contain the transformed wave")
    sigma = grid.sigma
    if v.is_zero():
        return ForwardReport(T0, T1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    kn = kg_engine.k_norm(v)
    table = _table_for(v, T0, T1, tail, table_step)
    r = grid.r
    w0, _, wt0 = build_w(table, r, T0, d, tail)
    state = ReducedState(grid, T0, w0, wt0)
    dt = cfl * cfl_limit(grid)

    f_norms: List[tuple] = []

    def source(t, g):
        f, _ = error_term_f(table, r, t, d, tail)
        return f

    def watch(t, w, wt):
        f, _ = error_term_f(table, r, t, d, tail)
        f_norms.append((t, math.sqrt(sigma * float(np.dot(f, f)) * dr)))

    steps = int(math.ceil((T1 - T0) / dt))
    src = evolve(state, T1, dt, store_every=steps + 1, source=source)
    free = evolve(state, T1, dt, store_every=steps + 1)
    end_s, end_f = src[-1], free[-1]
    e_s = total_energies(end_s).E_total
    e_f = total_energies(end_f).E_total
    l2 = sigma * float(np.dot(end_s.w, end_s.w)) * dr
    c_norm = 2.0 * e_s + l2
    # the source norms are sampled on a coarser time mesh, enough for a bound
    ts = np.linspace(T0, T1, 401)
    for t in ts:
        watch(t, None, None)
    tt = np.array([a for a, _ in f_norms])
    ff = np.array([b for _, b in f_norms])
    integral = float(np.sum(0.5 * (ff[1:] + ff[:-1]) * np.diff(tt)))
    bound = 2.0 * integral * math.sqrt(2.0 * max(e_s, e_f))
    w1, _, _ = build_w(table, r, T1, d, tail)
    match = float(np.linalg.norm(end_s.w - w1) / max(np.linalg.norm(w1), 1e-300))
    return ForwardReport(T0, T1, kn, c_norm, c_norm / (sigma * kn), e_s, e_f, l2, integral, bound,
                         abs(e_s - e_f), match, {"dt": dt, "dr": dr})


def f_norm_series(v, times: Sequence[float], d: int = 3, dr: float = 0.01, tail: float = 12.0):
    """Rows (t, ||f(., t)||_{L^2(R+)}) computed on the cutoff window at each time."""
    rows = []
    for t in times:
        a = max(t - 2.0 * math.sqrt(t), dr)
        r = np.arange(a, t + tail, dr)
        f, _ = error_term_f(v, r, t, d, tail)
        rows.append((float(t), math.sqrt(float(np.sum(f * f)) * dr)))
    return rows


def loglog_slope(rows) -> float:
    x = np.log([a for a, _ in rows])
    y = np.log([b for _, b in rows])
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------- inverse direction

@dataclass
class InverseSamples:
    tau: float
    y: np.ndarray
    v: np.ndarray
    residual: np.ndarray
    predicted: np.ndarray
    terms: Dict[str, np.ndarray]

    @property
    def residual_l2(self) -> float:
        return _l2(self.residual, self.y)

    @property
    def predicted_l2(self) -> float:
        return _l2(self.predicted, self.y)

    @property
    def mismatch_l2(self) -> float:
        return _l2(self.residual - self.predicted, self.y)


def _l2(a, y) -> float:
    if a.size < 2:
        return 0.0
    return math.sqrt(float(np.sum(a * a)) * (y[1] - y[0]))


def _lagrange_interp(values: np.ndarray, grid: RadialGrid, r: np.ndarray, order: int = 8) -> np.ndarray:
    """Local Lagrange interpolation of grid samples (odd extension below r = 0)."""
    x = r / grid.dr - 0.5
    base = np.floor(x).astype(int) - (order // 2 - 1)
    out = np.zeros_like(r)
    offs = np.arange(order)
    idx = base[:, None] + offs[None, :]
    frac = x[:, None] - idx
    # ghost cells: w(-r) = -w(r) mirrors index j to -1-j
    sign = np.where(idx < 0, -1.0, 1.0)
    safe = np.where(idx < 0, -1 - idx, idx)
    safe = np.minimum(safe, grid.n - 1)
    vals = sign * values[safe]
    vals[idx >= grid.n] = 0.0
    for k in range(order):
        wk = np.ones_like(r)
        for j in range(order):
            if j != k:
                wk *= (frac[:, j]) / (offs[k] - offs[j])
        out += wk * vals[:, k]
    return out


class _CurveCollector:
    """Collects w, w_r, w_t along the curves tau = const as the solution advances."""

    def __init__(self, grid: RadialGrid, taus: np.ndarray):
        self.grid = grid
        self.taus = taus
        self.rows: List[np.ndarray] = []

    def _radius(self, t: float) -> np.ndarray:
        """Solve r - ln(t + r) = t - 2 tau; NaN where the root has t + r <= 1 or r <= 0."""
        # the left side is convex and increasing for t + r > 1: Newton from above is monotone
        r = np.full(self.taus.shape, t + 10.0 + math.log(2.0 * t + 20.0))
        target = t - 2 * self.taus
        for _ in range(60):
            g = r - np.log(t + r) - target
            r = r - g / (1.0 - 1.0 / (t + r))
            r = np.where(t + r > 1.0 + 1e-12, r, 1.0 - t + 1e-12)
        g = r - np.log(t + r) - target
        bad = (np.abs(g) > 1e-9 * max(1.0, t)) | (r <= 0)
        return np.where(bad, np.nan, r)

    def __call__(self, t, w, wt):
        if t <= 0:
            return
        r = self._radius(t)
        with np.errstate(invalid="ignore"):
            ok = (r > 0.5 * self.grid.dr) & (r < self.grid.edge - 8 * self.grid.dr)
        vals = np.full((len(self.taus), 5), np.nan)
        vals[:, 0] = t
        vals[:, 1] = r
        if np.any(ok):
            wr = radial_derivative(w, self.grid.dr)
            vals[ok, 2] = _lagrange_interp(w, self.grid, r[ok])
            vals[ok, 3] = _lagrange_interp(wr, self.grid, r[ok])
            vals[ok, 4] = _lagrange_interp(wt, self.grid, r[ok])
        self.rows.append(vals)


def _d2(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order second difference on the interior (two cells trimmed each side)."""
    a = np.moveaxis(a, axis, 0)
    out = (-a[4:] + 16 * a[3:-1] - 30 * a[2:-2] + 16 * a[1:-3] - a[:-4]) / (12 * h * h)
    return np.moveaxis(out, 0, axis)


def inverse_construction(source: Union[Trajectory, ReducedState], tau_list: Sequence[float],
                         dy: float = 0.02, dtau: float = 0.02, t_final: Optional[float] = None,
                         dt: Optional[float] = None, tol: float = 1e-6,
                         allow_partial: bool = False) -> List[InverseSamples]:
    """Sample v(y, tau) = chi(y + tau - 2 ln tau) w(r, t) and its Klein-Gordon residual.

    ``source`` is either a stored trajectory (every snapshot is used as a time
    sample, so it must be dense) or an initial state, which is then evolved to
    ``t_final`` while the samples are collected on the fly.
    For each tau the residual v_tautau - v_yy + 2 v is formed by finite
    differences and compared with the prediction from the cutoff and potential
    terms. With ``allow_partial`` the y-range simply stops where the run ends
    instead of raising when w is still non-zero there.
    """
    taus = np.asarray(sorted(tau_list), dtype=float)
    if np.any(taus <= 1.0):
        raise ValueError("tau values must exceed 1")
    offsets = dtau * np.arange(-2, 3)
    levels = (taus[:, None] + offsets[None, :]).ravel()
    grid = source.grid
    col = _CurveCollector(grid, levels)
    if isinstance(source, Trajectory):
        for s in source:
            col(s.t, s.w, s.wt)
        t_end = source.times[-1]
        peak = max(float(np.max(np.abs(s.w))) for s in source)
    else:
        if t_final is None:
            raise ValueError("t_final is required when starting from a state")
        step = dt if dt is not None else 0.9 * cfl_limit(grid)
        peak_box = [float(np.max(np.abs(source.w)))]

        def obs(t, w, wt):
            col(t, w, wt)
            peak_box[0] = max(peak_box[0], float(np.max(np.abs(w))))

        evolve(source, t_final, step, store_every=10**9, observer=obs)
        t_end = t_final
        peak = peak_box[0]
    data = np.stack(col.rows)  # (time, level, 5)
    out = []
    for i, tau in enumerate(taus):
        lv = data[:, 5 * i:5 * i + 5, :]
        t_arr, r_arr = lv[:, :, 0], lv[:, :, 1]
        good = np.all(np.isfinite(lv[:, :, 2]), axis=1)
        y_arr = 0.5 * (r_arr - t_arr + np.log(t_arr + r_arr))
        if not np.any(good):
            raise ValueError(f"window violation: no samples for tau={tau}")
        first, last = np.argmax(good), len(good) - 1 - np.argmax(good[::-1])
        if not np.all(good[first:last + 1]):
            raise ValueError(f"window violation: gap in the samples for tau={tau}")
        y_lo = -(tau + 2 * dtau) + 2 * math.log(tau - 2 * dtau) + 1.0
        y_start = float(np.max(y_arr[first]))
        y_stop = float(np.min(y_arr[last]))
        if y_start > y_lo - 4 * dy:
            raise ValueError(f"window violation: the trajectory starts too late for tau={tau}")
        tail_w = float(np.max(np.abs(lv[last, :, 2])))
        if tail_w > tol * max(peak, 1e-300) and t_end > 0 and not allow_partial:
            raise ValueError(f"window violation: w still non-zero where tau={tau} leaves the run")
        y = np.arange(y_lo - 4 * dy, y_stop, dy)
        vs = np.zeros((5, y.size))
        comp = np.zeros((5, 3, y.size))  # w, w_r, w_t along each level
        for j in range(5):
            yy = y_arr[first:last + 1, j]
            for k in range(3):
                comp[j, k] = CubicSpline(yy, lv[first:last + 1, j, 2 + k])(y)
            ta = taus[i] + offsets[j]
            arg = y + ta - 2 * math.log(ta)
            vs[j] = CHI(arg) * comp[j, 0]
        res = _d2(vs, dtau, 0)[0, 2:-2] - _d2(vs[2], dy, 0) + 2 * vs[2, 2:-2]
        yc = y[2:-2]
        w, wr, wt = (comp[2, k, 2:-2] for k in range(3))
        e = np.exp(yc + tau)
        arg = yc + tau - 2 * math.log(tau)
        c0, c1, c2 = CHI(arg), CHI(arg, 1), CHI(arg, 2)
        terms = {
            "J1": ((4 - 4 * tau) / tau**2 * c2 + 2 / tau**2 * c1) * w,
            "J2": -2 / tau * c1 * e * (wr + wt),
            "J3": (2 - 2 / tau) * c1 * (wt - wr),
            "J4": c0 * (2 * yc - 2 * tau) / (e + yc - tau) * w,
        }
        lam = grid.lam
        if lam:
            rr = 0.5 * (e + yc - tau)
            terms["J5"] = -c0 * e * lam * w / rr**2
        pred = sum(terms.values())
        out.append(InverseSamples(float(tau), yc, vs[2, 2:-2], res, pred, terms))
    return out
