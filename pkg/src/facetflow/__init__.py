"""Regularised crystal-surface relaxation with facets: stationary solves, tau-continuation and backward-Euler evolution."""

__version__ = "0.1.0"

from .grid import Grid
from .model import ModelParams
from .scheme import (PicardOptions, SolverOptions, TauSchedule, continuation_solve, evolve,
                     solve_stationary)

__all__ = [
    "Grid",
    "ModelParams",
    "PicardOptions",
    "SolverOptions",
    "TauSchedule",
    "continuation_solve",
    "evolve",
    "solve_stationary",
    "__version__",
]
