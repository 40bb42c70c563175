"""Exception hierarchy. Each class carries the CLI exit code it maps to."""
from __future__ import annotations


class VactsError(Exception):
    exit_code = 3


class ConfigError(VactsError, ValueError):
    """Unparseable file or a field violating its documented bound."""

    exit_code = 1

    def __init__(self, message: str, *, field: str | None = None, line: int | None = None):
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line


class DegenerateConfigurationError(VactsError):
    """A cable sits at a pole (sin(theta) ~ 0) or a matrix lost rank."""

    exit_code = 2

    def __init__(self, message: str, *, cables=(), rank: int | None = None):
        super().__init__(message)
        self.cables = tuple(cables)
        self.rank = rank


class InconsistentCouplingError(VactsError):
    """Two cables of one quadrotor imply different quadrotor positions."""

    exit_code = 2

    def __init__(self, owner: int, gap: float):
        super().__init__(f"coupled cables of quadrotor {owner} disagree by {gap:.3e} m")
        self.owner = owner
        self.gap = gap


class ThrustDirectionError(VactsError, ValueError):
    exit_code = 2


class InfeasibleMomentError(VactsError):
    """The moment demand lies outside what the propeller box can produce."""

    exit_code = 2


class ConvergenceError(VactsError):
    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class ConstraintSolveError(VactsError):
    def __init__(self, message: str, cables=(), residual: float | None = None):
        super().__init__(message)
        self.cables = tuple(cables)
        self.residual = residual


class DivergenceError(VactsError):
    """Raised by the scenario runner; ``partial`` holds the log so far."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
