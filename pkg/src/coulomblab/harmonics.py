"""Real spherical-harmonic splitting of three-dimensional data into radial pieces.

A field u(r theta) = sum_k r^nu_k u_k(r) Phi_k(theta) splits into radial functions
u_k that behave as radial Coulomb waves in dimension 3 + 2 nu_k. The reduced
variable of such a component is simply r times the angular coefficient
U_k(r) = int u(r theta) Phi_k(theta) d theta, and its potential gains
nu_k (nu_k + 1)/r^2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import sph_harm_y

from .core_types import RadialGrid, ReducedState, Trajectory
from .energy_ledger import ball_integral, densities, total_energies
from .radial_evolver import cfl_limit, evolve

Field3 = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

ALIAS_TOL = 1e-6


def _real_harmonic(ell: int, m: int, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    y = sph_harm_y(ell, abs(m), theta, phi)
    if m == 0:
        return np.real(y)
    if m > 0:
        return math.sqrt(2.0) * (-1) ** m * np.real(y)
    return math.sqrt(2.0) * (-1) ** m * np.imag(y)


@dataclass(frozen=True)
class AngularBasis:
    """Real harmonics of degree <= L on the unit sphere with a product quadrature.

    The rule is Gauss-Legendre in cos(theta) times a uniform azimuth mesh; it is
    exact for products of two band-limited functions.
    """

    L: int
    n_theta: Optional[int] = None
    n_phi: Optional[int] = None

    def __post_init__(self):
        if self.L < 0:
            raise ValueError("L must be >= 0")
        object.__setattr__(self, "n_theta", self.n_theta or self.L + 3)
        object.__setattr__(self, "n_phi", self.n_phi or 2 * self.L + 4)
        if self.n_theta < self.L + 1 or self.n_phi < 2 * self.L + 1:
            raise ValueError("quadrature too coarse for degree L")

    @cached_property
    def labels(self) -> List[Tuple[int, int]]:
        return [(ell, m) for ell in range(self.L + 1) for m in range(-ell, ell + 1)]

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([ell for ell, _ in self.labels])

    @cached_property
    def _rule(self):
        x, wx = np.polynomial.legendre.leggauss(self.n_theta)
        phi = 2 * math.pi * np.arange(self.n_phi) / self.n_phi
        theta = np.arccos(x)
        th, ph = np.meshgrid(theta, phi, indexing="ij")
        w = np.outer(wx, np.full(self.n_phi, 2 * math.pi / self.n_phi))
        return th.ravel(), ph.ravel(), w.ravel()

    @property
    def weights(self) -> np.ndarray:
        return self._rule[2]

    @cached_property
    def directions(self) -> np.ndarray:
        th, ph, _ = self._rule
        return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=1)

    @cached_property
    def values(self) -> np.ndarray:
        """(K, Q) matrix of harmonic values at the quadrature nodes."""
        th, ph, _ = self._rule
        return np.stack([_real_harmonic(ell, m, th, ph) for ell, m in self.labels])

    def gram(self) -> np.ndarray:
        return (self.values * self.weights) @ self.values.T

    def project(self, samples: np.ndarray) -> np.ndarray:
        """Angular coefficients U_k(r) = int u(r theta) Phi_k(theta) for samples of shape (n_r, Q)."""
        return (self.values * self.weights) @ np.asarray(samples).T

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`project` for band-limited fields; returns shape (n_r, Q)."""
        return (np.asarray(coeffs).T @ self.values)


def decompose(samples: np.ndarray, basis: AngularBasis, r: np.ndarray) -> np.ndarray:
    """Components u_k(r_j) = r_j^(-nu_k) U_k(r_j) from samples on the (r_j, node) product grid."""
    samples = np.asarray(samples, dtype=float)
    r = np.asarray(r, dtype=float)
    if samples.shape != (r.size, basis.weights.size):
        raise ValueError("samples must have shape (len(r), number of quadrature nodes)")
    coeffs = basis.project(samples)
    back = basis.synthesize(coeffs)
    scale = max(float(np.max(np.abs(samples))), 1e-300)
    if float(np.max(np.abs(back - samples))) > ALIAS_TOL * scale:
        warnings.warn("input is not band-limited to the basis degree: reconstruction residual exceeds 1e-6",
                      RuntimeWarning, stacklevel=2)
    return coeffs / r[None, :] ** basis.degrees[:, None]


def reconstruct(components: np.ndarray, basis: AngularBasis, r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return basis.synthesize(np.asarray(components) * r[None, :] ** basis.degrees[:, None])


# ---------------------------------------------------------------- energy identity

def _radial_rule(radius: float, panel: float = 0.25, order: int = 10):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, radius, int(math.ceil(radius / panel)) + 1)
    a, b = edges[:-1], edges[1:]
    r = (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * x[None, :]
    wr = (0.5 * (b - a))[:, None] * w[None, :]
    return r.ravel(), wr.ravel()


def _gradient(u: Field3, pts: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central differences of a Cartesian callable."""
    grad = np.zeros_like(pts)
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = h
        f = lambda s: u(*(pts + s * e).T)  # noqa: E731
        grad[:, axis] = (-f(2) + 8 * f(1) - 8 * f(-1) + f(-2)) / (12 * h)
    return grad


@dataclass
class EnergyIdentity:
    total: float
    summed: float
    per_component: np.ndarray

    @property
    def defect(self) -> float:
        return abs(self.total - self.summed) / self.total if self.total > 0 else 0.0


def energy_identity_check(u: Field3, ut: Field3, basis: AngularBasis, radius: float = 10.0,
                          h: float = 1e-3) -> EnergyIdentity:
    """Compare the three-dimensional energy with the sum of component energies.

    The left side uses a Cartesian finite-difference gradient; the right side
    uses only radial derivatives of the angular coefficients.
    """
    r, wr = _radial_rule(radius)
    dirs = basis.directions
    pts = (r[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    uu = u(*pts.T)
    vv = ut(*pts.T)
    if not (np.any(uu) or np.any(vv)):
        return EnergyIdentity(0.0, 0.0, np.zeros(len(basis.labels)))
    g = _gradient(u, pts, h)
    rr = np.repeat(r, dirs.shape[0])
    dens = 0.5 * np.sum(g * g, axis=1) + 0.5 * vv**2 + 0.5 * uu**2 / rr
    wq = (wr[:, None] * r[:, None] ** 2 * basis.weights[None, :]).ravel()
    total = float(np.dot(dens, wq))
    shape = (r.size, dirs.shape[0])
    ur = np.sum(g * np.repeat(dirs[None], r.size, 0).reshape(-1, 3), axis=1)
    U = basis.project(uu.reshape(shape))
    Ur = basis.project(ur.reshape(shape))
    Ut = basis.project(vv.reshape(shape))
    nu = basis.degrees[:, None]
    # (r^nu d_r u_k) = Ur - nu U / r;  weights r^2 dr from r^(2+2 nu) r^(-2 nu)
    comp = (0.5 * (Ur - nu * U / r) ** 2 * r**2 + 0.5 * Ut**2 * r**2 + 0.5 * U**2 * r) @ wr
    return EnergyIdentity(total, float(np.sum(comp)), comp)


# ---------------------------------------------------------------- component evolution

@dataclass
class Component:
    label: Tuple[int, int]
    nu: int
    trajectory: Trajectory


@dataclass
class ComponentRun:
    components: List[Component]
    times: np.ndarray
    energies: np.ndarray = field(default=None)

    def total_energy(self) -> np.ndarray:
        """Sum over components of sigma^-1 E(u_k) at every stored time."""
        out = np.zeros(len(self.times))
        for c in self.components:
            sig = c.trajectory.grid.sigma
            out += np.array([total_energies(s).E_total for s in c.trajectory]) / sig
        return out

    def shell_fraction(self, inner: Callable[[float], float], outer: Callable[[float], float],
                       boundary_terms: bool = False) -> np.ndarray:
        """Summed component energy in inner(t) < r < outer(t) over the summed total.

        Component densities differ from the three-dimensional density by the
        derivative of (nu/2) r U_k^2. Without ``boundary_terms`` the raw component
        shell energies are summed; with it that surface term is added back at both
        radii, which gives the shell energy of the three-dimensional field.
        """
        num = np.zeros(len(self.times))
        den = np.zeros(len(self.times))
        for c in self.components:
            g = c.trajectory.grid
            for i, s in enumerate(c.trajectory):
                dens = densities(s)
                a, b = max(inner(s.t), 0.0), outer(s.t)
                num[i] += ball_integral(dens.e, g, a, b) / g.sigma
                den[i] += ball_integral(dens.e, g) / g.sigma
                if boundary_terms and c.nu:
                    for rad, sign in ((b, 1.0), (a, -1.0)):
                        if 0 < rad < g.edge:
                            # U_k = w / r in any component dimension
                            wk = np.interp(rad, g.r, s.w)
                            num[i] += sign * 0.5 * c.nu * wk**2 / rad
        return num / np.where(den > 0, den, 1.0)


def sample_components(u: Field3, ut: Field3, basis: AngularBasis, grid: RadialGrid):
    """Angular coefficients (U_k, dU_k/dt) of Cartesian data on the staggered radial grid."""
    if grid.d != 3:
        raise ValueError("the angular front end works in three dimensions")
    dirs = basis.directions
    pts = (grid.r[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    shape = (grid.n, dirs.shape[0])
    uu = u(*pts.T).reshape(shape)
    vv = ut(*pts.T).reshape(shape)
    return basis.project(uu), basis.project(vv)


def component_state(U: np.ndarray, Ut: np.ndarray, nu: int, grid: RadialGrid, t: float = 0.0) -> ReducedState:
    """Reduced state of one component in dimension 3 + 2 nu: w = r^(1+nu) u_k = r U_k."""
    g = RadialGrid(3 + 2 * nu, grid.dr, grid.n)
    return ReducedState(g, t, g.r * U, g.r * Ut)


def evolve_components(components: Sequence[Tuple[Tuple[int, int], int, np.ndarray, np.ndarray]],
                      grid: RadialGrid, t_final: float, dt: Optional[float] = None,
                      store_every: int = 50, skip_below: float = 1e-14) -> ComponentRun:
    """Evolve each (label, nu, U_k, dU_k/dt) as a radial wave in dimension 3 + 2 nu.

    A shared time step (the most restrictive CFL bound over the components) keeps
    the snapshot times aligned.
    """
    states = []
    for label, nu, U, Ut in components:
        if max(float(np.max(np.abs(U))), float(np.max(np.abs(Ut)))) <= skip_below:
            continue
        states.append((label, nu, component_state(U, Ut, nu, grid)))
    if not states:
        raise ValueError("all components vanish")
    step = dt if dt is not None else 0.9 * min(cfl_limit(s.grid) for _, _, s in states)
    out = []
    for label, nu, st in states:
        edge = st.grid.edge
        nz = np.nonzero(np.abs(st.w) + np.abs(st.wt))[0]
        if nz.size and st.grid.r[nz[-1]] + t_final > edge - 4 * st.grid.dr:
            raise ValueError("component support plus t_final exceeds the grid")
        out.append(Component(label, nu, evolve(st, t_final, step, store_every)))
    return ComponentRun(out, out[0].trajectory.times)


def decompose_and_evolve(u: Field3, ut: Field3, basis: AngularBasis, grid: RadialGrid, t_final: float,
                         dt: Optional[float] = None, store_every: int = 50) -> ComponentRun:
    U, Ut = sample_components(u, ut, basis, grid)
    comps = [(lab, lab[0], U[k], Ut[k]) for k, lab in enumerate(basis.labels)]
    return evolve_components(comps, grid, t_final, dt, store_every)
