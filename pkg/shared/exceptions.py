"""Exception hierarchy shared by every service."""
from typing import Optional


class AssemblyError(ValueError):
    """Base class for all domain errors."""


class BoundsError(AssemblyError):
    """Requested size exceeds what the spec or guard supports."""


class LevelMismatchError(AssemblyError):
    """Component vector does not have the required total size."""


class ArgumentError(AssemblyError):
    """Invalid argument combination."""


class DegenerateConditioningError(AssemblyError):
    """The conditioning event has probability zero."""


class RetryBudgetExceeded(AssemblyError):
    """Rejection sampler ran out of attempts."""

    def __init__(self, attempts: int):
        super().__init__(f"no accepted draw after {attempts} attempts")
        self.attempts = attempts


class CostGuardError(AssemblyError):
    """Brute-force computation refused because it would be too expensive."""


class FitError(AssemblyError):
    """Not enough data points to fit."""


class RegimeError(AssemblyError):
    """Parameters fall outside the regime where the check is defined."""


class ConditionError(AssemblyError):
    """A structural condition (e.g. p_j(0) > 0) cannot be satisfied."""


class ConfigError(AssemblyError):
    """Malformed or invalid configuration input."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
