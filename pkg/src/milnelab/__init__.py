"""Numerical laboratory for kinetic boundary layers in the unit disk."""

from .discretization import AngularQuadrature, DiskGrid, RadialGrid
from .geometry import PSI, PSI0, CutoffSpec, ForceField
from .milne import MilneProblem, MilneSolution, solve_diffusive, solve_inflow

__all__ = [
    "AngularQuadrature", "DiskGrid", "RadialGrid", "PSI", "PSI0", "CutoffSpec",
    "ForceField", "MilneProblem", "MilneSolution", "solve_diffusive", "solve_inflow",
]
__version__ = "0.1.0"
