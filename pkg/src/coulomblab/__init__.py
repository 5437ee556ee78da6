"""Radial wave equation with a repulsive Coulomb potential: solver, diagnostics and experiments."""

from .core_types import RadialGrid, ReducedState, ScenarioConfig, Trajectory
from .radial_evolver import DataSpec, evolve, make_state

__all__ = ["RadialGrid", "ReducedState", "ScenarioConfig", "Trajectory", "DataSpec", "evolve", "make_state"]
__version__ = "0.1.0"
