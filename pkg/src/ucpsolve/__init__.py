"""ucpsolve: a grid-based solver for control problems with integral objectives.

Controllers are approximated as step functions on uniform sampling grids
and improved by pointwise minimization of per-stage marginal costs,
alternating safeguarded Newton/gradient local updates with windowed
exhaustive search under an adaptive iteration split.
"""

from .grids import (
    ControllerSet,
    Grid,
    SampledController,
    eval_controller,
    init_identity,
    make_grid,
    window_indices,
)
from .kernels import BACKEND, max_workers, set_workers
from .numerics import Density, Gaussian, Uniform, fd_first, fd_second, pdf, trapezoid
from .oracle import OracleConfig, exhaustive_argmin, monte_carlo_objective, windowed_argmin
from .problem import NumericError, Problem
from .problems import Inventory, Quadratic, Witsenhausen, ZeroDelay, make_problem
from .solver import (
    RoundReport,
    SolveResult,
    SolverConfig,
    adaptive_allocation,
    local_update_phase,
    newton_or_gradient_step,
    partial_exhaustion_phase,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ControllerSet",
    "Density",
    "Gaussian",
    "Grid",
    "Inventory",
    "NumericError",
    "OracleConfig",
    "Problem",
    "Quadratic",
    "RoundReport",
    "SampledController",
    "SolveResult",
    "SolverConfig",
    "Uniform",
    "Witsenhausen",
    "ZeroDelay",
    "adaptive_allocation",
    "eval_controller",
    "exhaustive_argmin",
    "fd_first",
    "fd_second",
    "init_identity",
    "local_update_phase",
    "make_grid",
    "make_problem",
    "max_workers",
    "monte_carlo_objective",
    "newton_or_gradient_step",
    "partial_exhaustion_phase",
    "pdf",
    "set_workers",
    "solve",
    "trapezoid",
    "window_indices",
    "windowed_argmin",
    "__version__",
]
