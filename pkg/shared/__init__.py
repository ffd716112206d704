"""Shared utilities and models."""
from .models import (
    AdditiveFunctionSpec,
    AssemblySpec,
    Backend,
    ComponentVector,
    PolygonalPath,
    PowerSeries,
    RateSequence,
    as_fraction,
)
from .config import Config, Settings, get_settings
from .exceptions import (
    ArgumentError,
    AssemblyError,
    BoundsError,
    ConditionError,
    ConfigError,
    CostGuardError,
    DegenerateConditioningError,
    FitError,
    LevelMismatchError,
    RegimeError,
    RetryBudgetExceeded,
)

__all__ = [
    "AdditiveFunctionSpec",
    "AssemblySpec",
    "Backend",
    "ComponentVector",
    "PolygonalPath",
    "PowerSeries",
    "RateSequence",
    "as_fraction",
    "Config",
    "Settings",
    "get_settings",
    "ArgumentError",
    "AssemblyError",
    "BoundsError",
    "ConditionError",
    "ConfigError",
    "CostGuardError",
    "DegenerateConditioningError",
    "FitError",
    "LevelMismatchError",
    "RegimeError",
    "RetryBudgetExceeded",
]
