"""Exact one-dimensional Klein-Gordon waves v_tt - v_yy + m2 v = 0 in Fourier space.

Data are finite sums of Gaussian x polynomial x plane-wave terms, whose
transforms are closed form (transform convention u^(xi) = int u(y) e^{-i xi y} dy):

    FT[(y-c)^n e^{-a (y-c)^2} e^{i k y}](xi)
        = e^{-i (xi-k) c} sqrt(pi/a) (-i/(2 sqrt a))^n H_n((xi-k)/(2 sqrt a)) e^{-(xi-k)^2/(4a)}.

The solution is v = (1/2pi) int [u0^ cos(w t) + u1^ sin(w t)/w] e^{i xi y} d xi with
w = sqrt(xi^2 + m2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import eval_hermite


@dataclass(frozen=True)
class GaussTerm:
    """coef * (y - center)^n * exp(-a (y - center)^2) * exp(i k y)."""

    coef: complex
    a: float
    center: float = 0.0
    n: int = 0
    k: float = 0.0

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("Gaussian rate a must be positive")
        if self.n < 0 or int(self.n) != self.n:
            raise ValueError("polynomial degree must be a non-negative integer")

    def physical(self, y):
        x = np.asarray(y, dtype=float) - self.center
        return self.coef * x**self.n * np.exp(-self.a * x * x) * np.exp(1j * self.k * np.asarray(y, dtype=float))

    def spectrum(self, xi):
        s = np.asarray(xi, dtype=float) - self.k
        ra = math.sqrt(self.a)
        base = math.sqrt(math.pi / self.a) * (-1j / (2 * ra)) ** self.n
        return self.coef * np.exp(-1j * s * self.center) * base * eval_hermite(self.n, s / (2 * ra)) * np.exp(-s * s / (4 * self.a))

    def scaled(self, c: complex) -> "GaussTerm":
        return GaussTerm(self.coef * c, self.a, self.center, self.n, self.k)

    def reach(self) -> float:
        """Distance from the origin beyond which the term is below ~1e-17 of its peak."""
        return abs(self.center) + math.sqrt((40.0 + 2 * self.n) / self.a)

    def bandwidth(self) -> float:
        return abs(self.k) + 2.0 * math.sqrt(self.a * (40.0 + 2 * self.n))


@dataclass
class KgWave:
    """Klein-Gordon solution fixed by (u0, u1) at tau = 0.

    ``direction`` = +1 (or -1) adds to u1 the component -i sgn(xi) w u0^ (resp. +),
    which makes the whole solution right- (left-) moving.
    """

    u0: List[GaussTerm] = field(default_factory=list)
    u1: List[GaussTerm] = field(default_factory=list)
    m2: float = 2.0
    direction: int = 0
    xi_max: float = 40.0
    n_xi: int = 4096

    def __post_init__(self):
        if self.m2 <= 0:
            raise ValueError("m2 must be positive")
        if self.direction not in (-1, 0, 1):
            raise ValueError("direction must be -1, 0 or +1")

    # spectra -----------------------------------------------------------
    def omega(self, xi):
        return np.sqrt(np.asarray(xi, dtype=float) ** 2 + self.m2)

    def spec0(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape, dtype=complex)
        for t in self.u0:
            out += t.spectrum(xi)
        return out

    def spec1(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape, dtype=complex)
        for t in self.u1:
            out += t.spectrum(xi)
        if self.direction:
            out += -1j * self.direction * np.sign(xi) * self.omega(xi) * self.spec0(xi)
        return out

    def reach(self) -> float:
        terms = self.u0 + self.u1
        return max((t.reach() for t in terms), default=0.0)

    def bandwidth(self) -> float:
        terms = self.u0 + self.u1
        return max((t.bandwidth() for t in terms), default=1.0)

    def is_zero(self) -> bool:
        return not (self.u0 or self.u1)

    # algebra -----------------------------------------------------------
    def __add__(self, other: "KgWave") -> "KgWave":
        if other.m2 != self.m2 or other.direction != self.direction:
            raise ValueError("can only add waves with equal mass and direction")
        return KgWave(self.u0 + other.u0, self.u1 + other.u1, self.m2, self.direction,
                      max(self.xi_max, other.xi_max), max(self.n_xi, other.n_xi))

    def scaled(self, c: float) -> "KgWave":
        return KgWave([t.scaled(c) for t in self.u0], [t.scaled(c) for t in self.u1],
                      self.m2, self.direction, self.xi_max, self.n_xi)

    # constructors ----------------------------------------------------------
    @classmethod
    def gaussian_spectrum(cls, width: float = 1.0, m2: float = 2.0, amp: float = 1.0) -> "KgWave":
        """u0^ = amp * exp(-width xi^2), u1 = 0."""
        # inverse transform of exp(-b xi^2) is exp(-y^2/(4b)) / (2 sqrt(pi b))
        term = GaussTerm(amp / (2 * math.sqrt(math.pi * width)), 1.0 / (4 * width))
        return cls([term], [], m2)

    @classmethod
    def packet(cls, center: float, s: float, xi0: float, m2: float = 2.0, direction: int = 1,
               amp: float = 1.0) -> "KgWave":
        """u0 = amp exp(-(y-center)^2/(2 s^2)) cos(xi0 y), moving in ``direction``."""
        a = 1.0 / (2 * s * s)
        terms = [GaussTerm(0.5 * amp, a, center, 0, xi0), GaussTerm(0.5 * amp, a, center, 0, -xi0)]
        return cls(terms, [], m2, direction)


def _xi_grid(wave: KgWave, y_extent: float, tau: float) -> Tuple[np.ndarray, float]:
    """Trapezoid nodes whose aliasing period 2pi/h exceeds twice the occupied y-range."""
    xi_max = max(wave.xi_max, wave.bandwidth())
    spread = y_extent + abs(tau) + wave.reach() + 10.0
    h_alias = 2 * math.pi / (2.2 * spread)
    n = max(wave.n_xi, int(math.ceil(2 * xi_max / h_alias)) + 1)
    xi = np.linspace(-xi_max, xi_max, n)
    return xi, xi[1] - xi[0]


def eval(wave: KgWave, y, tau, chunk: int = 256):
    """(v, v_y, v_tau) at the points (y, tau) (broadcast together)."""
    y, tau = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(tau, dtype=float))
    shape = y.shape
    yf, tf = y.ravel(), tau.ravel()
    out = np.zeros((3, yf.size))
    if wave.is_zero() or yf.size == 0:
        return tuple(o.reshape(shape) for o in out)
    xi, h = _xi_grid(wave, float(np.max(np.abs(yf))), float(np.max(np.abs(tf))))
    wgt = np.full(xi.size, h / (2 * math.pi))
    wgt[0] = wgt[-1] = 0.5 * h / (2 * math.pi)
    om = wave.omega(xi)
    s0 = wave.spec0(xi) * wgt
    s1 = wave.spec1(xi) * wgt
    for lo in range(0, yf.size, chunk):
        sl = slice(lo, lo + chunk)
        ph = np.exp(1j * np.outer(yf[sl], xi))
        wt = np.outer(tf[sl], om)
        c, s = np.cos(wt), np.sin(wt)
        amp = s0 * c + s1 * s / om
        amp_t = -s0 * om * s + s1 * c
        out[0, sl] = np.real(np.sum(amp * ph, axis=1))
        out[1, sl] = np.real(np.sum(1j * xi * amp * ph, axis=1))
        out[2, sl] = np.real(np.sum(amp_t * ph, axis=1))
    return tuple(o.reshape(shape) for o in out)


def profile(wave: KgWave, tau: float, half_width: float = None, dy: float = 0.02):
    """(y, v, v_y, v_tau) on a uniform grid over [-L, L) via one FFT.

    ``L`` defaults to tau + reach + 20 so that the periodic images do not overlap.
    """
    L = half_width if half_width is not None else abs(tau) + wave.reach() + 20.0
    n = int(2 ** math.ceil(math.log2(2 * L / dy)))
    dy = 2 * L / n
    y = -L + dy * np.arange(n)
    xi = 2 * math.pi * np.fft.fftfreq(n, d=dy)
    if wave.is_zero():
        z = np.zeros(n)
        return y, z, z.copy(), z.copy()
    om = wave.omega(xi)
    s0, s1 = wave.spec0(xi), wave.spec1(xi)
    c, s = np.cos(om * tau), np.sin(om * tau)
    amp = (s0 * c + s1 * s / om) * np.exp(-1j * xi * L)
    amp_t = (-s0 * om * s + s1 * c) * np.exp(-1j * xi * L)
    scale = n / (n * dy)  # (dxi / 2pi) * n with dxi = 2pi/(n dy)
    v = np.real(np.fft.ifft(amp)) * scale
    vy = np.real(np.fft.ifft(1j * xi * amp)) * scale
    vt = np.real(np.fft.ifft(amp_t)) * scale
    return y, v, vy, vt


def k_norm(wave: KgWave) -> float:
    """||v||_K^2 = int (v_tau^2 + v_y^2 + m2 v^2) dy, evaluated in Fourier space.

    Returns the squared norm, (1/2pi) int [|u1^|^2 + (xi^2 + m2)|u0^|^2] d xi.
    """
    if wave.is_zero():
        return 0.0
    xi_max = max(wave.xi_max, wave.bandwidth())
    xi = np.linspace(-xi_max, xi_max, max(wave.n_xi, 16385))
    h = xi[1] - xi[0]
    integrand = np.abs(wave.spec1(xi)) ** 2 + (xi**2 + wave.m2) * np.abs(wave.spec0(xi)) ** 2
    total = h * (integrand.sum() - 0.5 * (integrand[0] + integrand[-1]))
    return float(total / (2 * math.pi))


def physical_k_norm(wave: KgWave, tau: float, dy: float = 0.01) -> float:
    """The same squared norm from a physical-space quadrature at time ``tau``."""
    y, v, vy, vt = profile(wave, tau, dy=dy)
    return float(np.sum(vt**2 + vy**2 + wave.m2 * v**2) * (y[1] - y[0]))


def parabola_decay_check(wave: KgWave, alpha: float, N: float, tau_list: Sequence[float], dy: float = 0.02):
    """Rows (tau, sup, sup * tau^N) with sup over |y| > tau - tau^alpha of |v| + |v_y| + |v_tau|."""
    if not (0 < alpha < 1) or N <= 0:
        raise ValueError("need 0 < alpha < 1 and N > 0")
    rows = []
    for tau in tau_list:
        y, v, vy, vt = profile(wave, tau, dy=dy)
        mask = np.abs(y) > tau - tau**alpha
        sup = float(np.max((np.abs(v) + np.abs(vy) + np.abs(vt))[mask])) if mask.any() else 0.0
        rows.append((float(tau), sup, sup * tau**N))
    return rows


def dispersive_decay_check(wave: KgWave, tau_list: Sequence[float], dy: float = 0.02):
    """Rows (tau, sup_y(|v| + |v_y| + |v_tau|) * tau^(1/2))."""
    rows = []
    for tau in tau_list:
        y, v, vy, vt = profile(wave, tau, dy=dy)
        sup = float(np.max(np.abs(v) + np.abs(vy) + np.abs(vt)))
        rows.append((float(tau), sup * math.sqrt(tau)))
    return rows


def periodic_self_test(k: int = 3, m2: float = 2.0, tau: float = 7.3, n: int = 64, periods: int = 1) -> float:
    """Max error of a DFT propagator on the pure mode cos(k y) against cos(k y) cos(w tau)."""
    length = 2 * math.pi * periods
    y = length * np.arange(n) / n
    xi = 2 * math.pi * np.fft.fftfreq(n, d=length / n)
    om = np.sqrt(xi**2 + m2)
    v = np.real(np.fft.ifft(np.fft.fft(np.cos(k * y)) * np.cos(om * tau)))
    exact = np.cos(k * y) * math.cos(math.sqrt(k * k + m2) * tau)
    return float(np.max(np.abs(v - exact)))
