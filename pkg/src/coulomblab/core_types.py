"""Grids, reduced field states, trajectories and scenario configuration.

Every field in the package is stored in the reduced variable
``w = r**((d-1)/2) * u`` on a staggered mesh ``r_j = (j + 1/2) dr``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import List, Optional

import numpy as np


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (4*pi for d = 3)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def energy_window(d: int) -> tuple:
    """Allowed exponent window ``(1 + 4/(d-1), 1 + 4/(d-2))`` for the defocusing term."""
    return 1.0 + 4.0 / (d - 1), 1.0 + 4.0 / (d - 2)


@dataclass(frozen=True)
class RadialGrid:
    d: int
    dr: float
    n: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 3:
            raise ValueError(f"dimension must be an integer >= 3, got {self.d}")
        if not (self.dr > 0 and math.isfinite(self.dr)):
            raise ValueError(f"dr must be positive, got {self.dr}")
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"n must be an integer >= 8, got {self.n}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def covering(cls, d: int, dr: float, radius: float) -> "RadialGrid":
        """Smallest grid whose outer edge reaches ``radius``."""
        return cls(d, dr, max(8, int(math.ceil(radius / dr))))

    @property
    def c(self) -> float:
        """Reduction exponent (d-1)/2."""
        return 0.5 * (self.d - 1)

    @property
    def lam(self) -> float:
        """Inverse-square coefficient (d-1)(d-3)/4."""
        return 0.25 * (self.d - 1) * (self.d - 3)

    @property
    def edge(self) -> float:
        return self.n * self.dr

    @property
    def sigma(self) -> float:
        return sphere_area(self.d)

    @cached_property
    def r(self) -> np.ndarray:
        r = (np.arange(self.n) + 0.5) * self.dr
        r.setflags(write=False)
        return r

    @cached_property
    def rpow(self) -> np.ndarray:
        """r**c, the factor converting u into w."""
        a = self.r ** self.c
        a.setflags(write=False)
        return a

    @cached_property
    def weights(self) -> np.ndarray:
        """Midpoint quadrature weights sigma * r^(d-1) * dr for radial integrals."""
        wgt = self.sigma * self.r ** (self.d - 1) * self.dr
        wgt.setflags(write=False)
        return wgt

    @cached_property
    def potential(self) -> np.ndarray:
        """Reduced potential lam/r^2 + 1/r."""
        v = self.lam / self.r**2 + 1.0 / self.r
        v.setflags(write=False)
        return v

    def index_of(self, radius: float) -> int:
        """Index of the cell containing ``radius`` (clipped to the grid)."""
        return int(min(max(math.floor(radius / self.dr), 0), self.n - 1))

    def with_dimension(self, d: int) -> "RadialGrid":
        return RadialGrid(d, self.dr, self.n)


def reduce(u, grid: RadialGrid) -> np.ndarray:
    """Map u-samples to the reduced field w = r^c u."""
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} samples, got shape {u.shape}")
    return grid.rpow * u


def lift(w, grid: RadialGrid) -> np.ndarray:
    """Inverse of :func:`reduce`."""
    w = np.asarray(w, dtype=float)
    if w.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} samples, got shape {w.shape}")
    return w / grid.rpow


@dataclass
class ReducedState:
    grid: RadialGrid
    t: float
    w: np.ndarray
    wt: np.ndarray
    zeta: int = 0
    p: float = 3.0
    nonlinearity: str = "odd"

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.wt = np.asarray(self.wt, dtype=float)
        n = self.grid.n
        if self.w.shape != (n,) or self.wt.shape != (n,):
            raise ValueError("w and wt must both have length grid.n")
        if not (np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.wt))):
            raise FloatingPointError("state contains non-finite values")
        if self.zeta not in (0, 1, -1):
            raise ValueError("zeta must be 0 (linear), 1 (defocusing) or -1 (focusing)")
        if self.nonlinearity not in ("odd", "absolute"):
            raise ValueError("nonlinearity must be 'odd' (|u|^(p-1) u) or 'absolute' (|u|^p)")
        if self.zeta != 0:
            lo, hi = energy_window(self.grid.d)
            if not (lo - 1e-12 <= self.p <= hi + 1e-12):
                raise ValueError(f"p={self.p} outside [{lo}, {hi}] for d={self.grid.d}")

    @property
    def u(self) -> np.ndarray:
        return lift(self.w, self.grid)

    @property
    def ut(self) -> np.ndarray:
        return lift(self.wt, self.grid)

    def copy(self, **changes) -> "ReducedState":
        out = replace(self, **changes)
        if "w" not in changes:
            out.w = self.w.copy()
        if "wt" not in changes:
            out.wt = self.wt.copy()
        return out

    def scaled(self, factor: float) -> "ReducedState":
        return self.copy(w=factor * self.w, wt=factor * self.wt)


@dataclass
class Trajectory:
    snapshots: List[ReducedState]
    store_every: int
    dt: float

    def __post_init__(self):
        if not self.snapshots:
            raise ValueError("a trajectory needs at least one snapshot")
        if self.store_every < 1 or self.dt <= 0:
            raise ValueError("store_every must be >= 1 and dt > 0")
        t = self.times
        if len(t) > 1:
            gaps = np.diff(t)
            if np.any(gaps <= 0):
                raise ValueError("snapshot times must be strictly increasing")
            # the final snapshot may close a partial interval
            nominal = self.store_every * self.dt
            if np.any(np.abs(gaps[:-1] - nominal) > 1e-9 * max(1.0, nominal) + 1e-9 * t[-1]):
                raise ValueError("snapshots must be uniformly spaced by store_every*dt")

    @property
    def grid(self) -> RadialGrid:
        return self.snapshots[0].grid

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def __getitem__(self, k):
        return self.snapshots[k]

    def field(self, name: str = "w") -> np.ndarray:
        """Stack one attribute (w, wt, u, ut) of all snapshots into a (time, r) array."""
        return np.stack([getattr(s, name) for s in self.snapshots])

    def scaled(self, factor: float) -> "Trajectory":
        return Trajectory([s.scaled(factor) for s in self.snapshots], self.store_every, self.dt)

    def nearest(self, t: float) -> ReducedState:
        k = int(np.argmin(np.abs(self.times - t)))
        return self.snapshots[k]


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce one run."""

    d: int = 3
    dr: float = 5e-3
    n: Optional[int] = None
    dt: Optional[float] = None
    cfl: float = 1.0
    t_final: float = 40.0
    zeta: int = 0
    p: float = 3.0
    data_kind: str = "gaussian_shell"
    r_c: float = 2.0
    sigma: float = 0.2
    amp: float = 1.0
    vel_kind: str = "zero"
    vel_r_c: float = 2.0
    vel_sigma: float = 0.2
    vel_amp: float = 0.0
    store_every: int = 50
    diagnostics: List[str] = field(default_factory=lambda: ["energy"])
    output: str = "out"

    def support_radius(self) -> float:
        outer = self.r_c + 5.0 * self.sigma
        if self.vel_kind not in ("zero", "none") and self.vel_amp != 0.0:
            outer = max(outer, self.vel_r_c + 5.0 * self.vel_sigma)
        return outer

    def grid(self) -> RadialGrid:
        if self.n is not None:
            return RadialGrid(self.d, self.dr, int(self.n))
        return RadialGrid.covering(self.d, self.dr, self.support_radius() + self.t_final + 8.0 * self.dr)

    def time_step(self, grid: Optional[RadialGrid] = None) -> float:
        from .radial_evolver import cfl_limit

        grid = grid or self.grid()
        limit = cfl_limit(grid)
        if self.dt is None:
            return self.cfl * limit
        return float(self.dt)

    def validate(self) -> None:
        """Raise ValueError naming the first violated invariant."""
        from .radial_evolver import cfl_limit

        g = self.grid()
        if self.t_final < 0:
            raise ValueError("invariant violated: t_final >= 0")
        if not (0 < self.cfl <= 1.0):
            raise ValueError("invariant violated: 0 < cfl <= 1")
        dt = self.time_step(g)
        if dt > cfl_limit(g) * (1 + 1e-12):
            raise ValueError(f"invariant violated: CFL (dt={dt} > {cfl_limit(g)})")
        if g.edge < self.support_radius() + self.t_final + 4 * self.dr:
            raise ValueError("invariant violated: domain must contain the light cone of the data")
        if self.store_every < 1:
            raise ValueError("invariant violated: store_every >= 1")
        if self.zeta != 0:
            lo, hi = energy_window(self.d)
            if not (lo - 1e-12 <= self.p <= hi + 1e-12):
                raise ValueError(f"invariant violated: p in [{lo}, {hi}]")
