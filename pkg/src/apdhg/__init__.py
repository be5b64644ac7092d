"""Adaptive primal-dual hybrid gradient methods for saddle-point problems."""

from .exceptions import ConfigurationError, DivergenceError, ShapeError
from .solver import (Iterate, SaddlePointProblem, SolverConfig, SolverTrace, StepState,
                     check_convergence_conditions, ergodic_average, solve)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "DivergenceError", "ShapeError",
    "Iterate", "SaddlePointProblem", "SolverConfig", "SolverTrace", "StepState",
    "check_convergence_conditions", "ergodic_average", "solve",
]
