"""Static solutions of -w'' + (lam/r^2 + 1/r) w = 0 and the inverse of H = -Laplacian + 1/|x|.

``Phi`` is the power series regular at the origin, ``Psi = Phi * int_r^inf Phi^-2``
is the decaying partner. Their Wronskian ``Phi Psi' - Phi' Psi`` equals -1.
"""

from __future__ import annotations

import math

import numpy as np

from .core_types import RadialGrid

R_MAX = 50.0
_R_INTERNAL = 400.0
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _series(r, d: int, dtype=float):
    """Return (S0, S1) with Phi = r^c S0 and Phi' = r^(c-1) S1."""
    r = np.asarray(r, dtype=dtype)
    c = dtype(0.5 * (d - 1)) if dtype is not float else 0.5 * (d - 1)
    term = np.ones_like(r)
    s0 = term.copy()
    s1 = c * term
    k = 0
    while True:
        k += 1
        term = term * r / (k * (k + d - 2))
        s0 = s0 + term
        s1 = s1 + (c + k) * term
        if np.all(term <= 1e-19 * s0):
            break
        if k > 2000:  # pragma: no cover - guarded by the radius limit
            raise RuntimeError("series failed to converge")
    return s0, s1


def _check_range(r, limit):
    r = np.asarray(r)
    if np.any(r < 0):
        raise ValueError("phi needs r >= 0")
    if np.any(r > limit):
        raise ValueError(f"r beyond the supported range {limit}")


def phi(r, d: int = 3, derivative: bool = False, dtype=float, r_max: float = R_MAX):
    """Regular static solution Phi(r) = sum_k (d-2)!/(k!(k+d-2)!) r^(c+k).

    For d = 3 this is sum_{k>=1} r^k / (k ((k-1)!)^2). With ``derivative=True``
    the pair (Phi, Phi') is returned. ``dtype=np.longdouble`` gives extended precision.
    """
    _check_range(r, r_max)
    r_arr = np.asarray(r, dtype=dtype)
    c = 0.5 * (d - 1)
    s0, s1 = _series(r_arr, d, dtype)
    if dtype is float:
        val = r_arr**c * s0
    else:
        val = r_arr ** dtype(c) * s0
    if not derivative:
        return val[()] if val.ndim == 0 else val
    with np.errstate(divide="ignore", invalid="ignore"):
        if d == 3:
            der = s1
        else:
            der = (r_arr ** (c - 1) if dtype is float else r_arr ** dtype(c - 1)) * s1
    if np.ndim(der) == 0:
        return val[()], der[()]
    return val, der


def _tail_integrals(r, d: int) -> np.ndarray:
    """I(r) = int_r^inf Phi(s)^-2 ds for an array of r > 0."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    rq = np.unique(r)
    rmax = rq[-1]
    # far enough out that the remaining tail is below 1e-17 of I(rmax)
    s_cut = min((math.sqrt(rmax) + 10.0) ** 2, _R_INTERNAL)
    s_cut = max(s_cut, rmax + 1.0)
    geo = np.geomspace(rq[0], max(1.0, rq[0]), int(max(2, math.log(max(1.0, rq[0]) / rq[0]) / math.log(1.05) + 2)))
    uni = np.arange(1.0, s_cut, 0.05)
    # avoid long panels relative to their distance from the origin
    mid = np.geomspace(max(rq[0], 1e-300), s_cut, 400)
    nodes = np.unique(np.concatenate([rq, geo, uni, mid, [s_cut]]))
    nodes = nodes[nodes >= rq[0]]
    a, b = nodes[:-1], nodes[1:]
    half = 0.5 * (b - a)
    centre = 0.5 * (b + a)
    pts = centre[:, None] + half[:, None] * _GL_X[None, :]
    f = phi(pts, d, r_max=_R_INTERNAL) ** -2.0
    panel = half * (f @ _GL_W)
    p_s, dp_s = phi(s_cut, d, derivative=True, r_max=_R_INTERNAL)
    remainder = 1.0 / (2.0 * p_s * dp_s)
    # cumulative from the right: I(nodes[i]) = sum_{j>=i} panel_j + remainder
    tail = np.concatenate([np.cumsum(panel[::-1])[::-1], [0.0]]) + remainder
    idx = np.searchsorted(nodes, r)
    return tail[idx]


def psi(r, d: int = 3, derivative: bool = False, r_max: float = R_MAX):
    """Decaying static solution Psi = Phi * int_r^inf Phi^-2, optionally with Psi'."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValueError("psi needs r > 0")
    _check_range(r_arr, r_max)
    flat = np.atleast_1d(r_arr).ravel()
    big_i = _tail_integrals(flat, d)
    p, dp = phi(flat, d, derivative=True, r_max=max(r_max, R_MAX))
    val = (p * big_i).reshape(r_arr.shape)
    if not derivative:
        return val[()] if val.ndim == 0 else val
    der = (dp * big_i - 1.0 / p).reshape(r_arr.shape)
    if val.ndim == 0:
        return val[()], der[()]
    return val, der


def wronskian(r, d: int = 3):
    """Phi Psi' - Phi' Psi, identically -1."""
    p, dp = phi(r, d, derivative=True)
    q, dq = psi(r, d, derivative=True)
    return p * dq - dp * q


def stencil_residual(r, d: int = 3, h: float = 1e-4):
    """Relative residual of the 3-point stencil applied to Phi, in extended precision.

    Returns |(Phi(r+h) - 2 Phi(r) + Phi(r-h))/h^2 - V Phi| / |V Phi|.
    """
    ld = np.longdouble
    r = np.asarray(r, dtype=ld)
    h = ld(h)
    lam = ld((d - 1) * (d - 3)) / 4
    pm, p0, pp = (phi(r + s * h, d, dtype=ld) for s in (-1, 0, 1))
    vphi = (lam / r**2 + 1 / r) * p0
    res = (pp - 2 * p0 + pm) / h**2 - vphi
    return np.asarray(np.abs(res) / np.abs(vphi), dtype=float)


def _cumtrapz(f, dx):
    """Cumulative trapezoid integral starting at the first sample."""
    out = np.zeros_like(f)
    out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1]) * dx)
    return out


def _support_check(f, grid: RadialGrid):
    nz = np.nonzero(f)[0]
    if nz.size == 0:
        return False
    if nz[0] < 2 or nz[-1] > grid.n - 3:
        raise ValueError("source must vanish near the origin and near the grid edge")
    return True


def h_inverse(f, grid: RadialGrid) -> np.ndarray:
    """Solve H u = f for a radial source sampled on ``grid``.

    In reduced form -w'' + V w = g with g = r^c f; the solution is
    w = Psi(r) int_0^r Phi g + Phi(r) int_r^inf Psi g, lifted back to u.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise ValueError("source length must match the grid")
    if not _support_check(f, grid):
        return np.zeros(grid.n)
    d, r = grid.d, grid.r
    nz = np.nonzero(f)[0]
    # Psi decays like exp(-2 sqrt(r)); past the internal range it is below 1e-17
    top = min(grid.n, max(nz[-1] + 2, np.searchsorted(r, _R_INTERNAL, side="right")))
    rr = r[:top]
    g = (grid.rpow * f)[:top]
    ph = phi(rr, d, r_max=_R_INTERNAL)
    ps = psi(rr, d, r_max=_R_INTERNAL)
    # trapezoid weights make the discrete kernel exactly symmetric
    a = _cumtrapz(ph * g, grid.dr)
    cb = _cumtrapz(ps * g, grid.dr)
    b = cb[-1] - cb
    w = np.zeros(grid.n)
    w[:top] = ps * a + ph * b
    return w / grid.rpow


def inner(f, u, grid: RadialGrid) -> float:
    """L^2(R^d) inner product of two radial sample arrays."""
    return float(np.dot(np.asarray(f) * np.asarray(u), grid.weights))


def h_minus1_norm(f, grid: RadialGrid) -> float:
    """sqrt(<f, H^-1 f>), the H^-1 norm of a radial source."""
    f = np.asarray(f, dtype=float)
    if not np.any(f):
        return 0.0
    val = inner(f, h_inverse(f, grid), grid)
    return math.sqrt(max(val, 0.0))
