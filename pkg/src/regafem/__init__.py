"""Adaptive P1 finite elements with regularized Newton-like solvers for
quasilinear diffusion problems."""

from .controller import AdaptiveConfig, LevelSummary, adaptive_solve, classify_phase
from .mesh import DofMap, Mesh, create_structured_unit_square, interpolate, refine, refine_coarsest
from .problems import ProblemSpec, constant_kappa_problem, h1_error, model_problem
from .regnewton import Method, SolverConfig, Status, run_iterations

__all__ = [
    "AdaptiveConfig", "LevelSummary", "adaptive_solve", "classify_phase",
    "DofMap", "Mesh", "create_structured_unit_square", "interpolate", "refine", "refine_coarsest",
    "ProblemSpec", "constant_kappa_problem", "h1_error", "model_problem",
    "Method", "SolverConfig", "Status", "run_iterations",
]
