"""Modelling, wrench analysis, control and simulation of aerial cable-towed systems with winches."""

__version__ = "0.1.0"

from .errors import (ConfigError, ConstraintSolveError, ConvergenceError, DegenerateConfigurationError,
                     DivergenceError, InconsistentCouplingError, InfeasibleMomentError, ThrustDirectionError,
                     VactsError)
from .model import SystemDescription, load_system, parse_system

__all__ = [
    "__version__", "SystemDescription", "load_system", "parse_system",
    "VactsError", "ConfigError", "DegenerateConfigurationError", "InconsistentCouplingError",
    "ThrustDirectionError", "InfeasibleMomentError", "ConvergenceError", "ConstraintSolveError",
    "DivergenceError",
]
