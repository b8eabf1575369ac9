"""Exception hierarchy for kinkwelfare.

Every error derives from ``KinkWelfareError`` and from the builtin exception a
plain Python API would raise in the same situation, so callers can catch either.
"""

from typing import Any, Dict, Optional


class KinkWelfareError(Exception):
    """Base class for all kinkwelfare errors."""


class ScheduleError(KinkWelfareError, ValueError):
    """Invalid benefit rule, eligibility table or schedule input."""


class ModelError(KinkWelfareError, ValueError):
    """Search-model input outside its domain."""


class SolverError(KinkWelfareError, RuntimeError):
    """Reservation-wage solver failed to converge."""

    def __init__(
        self,
        message: str,
        residual: Optional[float] = None,
        params: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.residual = residual
        self.params = params or {}

    def __str__(self) -> str:
        base = super().__str__()
        if self.residual is not None:
            base = f"{base} (residual={self.residual:.3e})"
        return base


class EstimationError(KinkWelfareError, ValueError):
    """RKD estimation could not be carried out."""


class SingularDesignError(EstimationError):
    """Design or bread matrix is rank deficient."""


class EmptyWindowError(EstimationError):
    """No (or too few) observations inside the bandwidth window."""


class BandwidthError(EstimationError):
    """Bandwidth selector could not produce a value."""


class WelfareError(KinkWelfareError, ValueError):
    """Invalid welfare-formula inputs."""


class ConfigError(KinkWelfareError, ValueError):
    """Configuration file or override is invalid."""

    def __init__(
        self, message: str, line: Optional[int] = None, column: Optional[int] = None
    ):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


__all__ = [
    "KinkWelfareError",
    "ScheduleError",
    "ModelError",
    "SolverError",
    "EstimationError",
    "SingularDesignError",
    "EmptyWindowError",
    "BandwidthError",
    "WelfareError",
    "ConfigError",
]
