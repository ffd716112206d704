"""Named assembly families and the spec-string parser."""
import logging
import math
from fractions import Fraction
from typing import Any, Optional, Sequence

import numpy as np

from shared.config import Config
from shared.exceptions import ConfigError
from shared.models import AssemblySpec, as_fraction

logger = logging.getLogger(__name__)

PRESETS = ("permutations", "ewens", "set-partitions")


def permutations(n_max: int = Config.DEFAULT_N_MAX, u: Any = 1) -> AssemblySpec:
    """m_j = (j-1)!, w_j = 1."""
    return AssemblySpec(name="permutations", preset="permutations", u=u, n_max=n_max)


def ewens(theta: Any, n_max: int = Config.DEFAULT_N_MAX, u: Any = 1) -> AssemblySpec:
    """Permutations weighted by theta^(number of cycles)."""
    theta = as_fraction(theta)
    return AssemblySpec(name=f"ewens:{theta}", preset="ewens", theta=theta, u=u, n_max=n_max)


def set_partitions(n_max: int = Config.DEFAULT_N_MAX, u: Any = 1) -> AssemblySpec:
    """m_j = 1, w_j = 1."""
    return AssemblySpec(name="set-partitions", preset="set-partitions", u=u, n_max=n_max)


def from_tables(m: Sequence[int], w: Sequence[Any], u: Any = 1,
                name: str = "explicit", n_max: Optional[int] = None) -> AssemblySpec:
    """Explicit family from per-size tables (index 0 holds size 1)."""
    n_max = min(len(m), len(w)) if n_max is None else n_max
    return AssemblySpec(
        name=name,
        m_table=tuple(int(x) for x in m),
        w_table=tuple(as_fraction(x) for x in w),
        u=u,
        n_max=n_max,
    )


def random_weakly_logarithmic(n: int, theta_lo: Any, theta_hi: Any, seed: int = 0,
                              grid: int = 64) -> AssemblySpec:
    """Explicit spec with m_j = (j-1)! and rational w_j drawn in [theta_lo, theta_hi].

    The rates are w_j / j, so the family is weakly logarithmic with the
    given bounds by construction.
    """
    lo, hi = as_fraction(theta_lo), as_fraction(theta_hi)
    if not 0 < lo <= hi:
        raise ConfigError(f"need 0 < theta_lo <= theta_hi, got {lo}, {hi}")
    rng = np.random.default_rng(seed)
    steps = rng.integers(0, grid + 1, size=n)
    w = [lo + (hi - lo) * Fraction(int(k), grid) for k in steps]
    m = [math.factorial(j - 1) for j in range(1, n + 1)]
    return from_tables(m, w, name=f"random-wlog:{lo}-{hi}:{seed}")


def parse_spec(text: str, theta: Any = None, u: Any = 1,
               n_max: int = Config.DEFAULT_N_MAX) -> AssemblySpec:
    """Resolve "permutations", "set-partitions", "ewens:2" or "ewens" + theta.

    Raises:
        ConfigError: Unknown preset or missing/invalid theta
    """
    key = text.strip().lower()
    param = None
    if ":" in key:
        key, param = key.split(":", 1)
    key = key.replace("_", "-")
    try:
        if key == "permutations" and param is None:
            return permutations(n_max=n_max, u=u)
        if key == "set-partitions" and param is None:
            return set_partitions(n_max=n_max, u=u)
        if key == "ewens":
            value = param if param is not None else theta
            if value is None:
                raise ConfigError("ewens needs a theta (ewens:<theta> or --theta)")
            return ewens(value, n_max=n_max, u=u)
    except (ValueError, ZeroDivisionError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"invalid parameters for '{text}': {e}") from e
    logger.error(f"Unknown assembly spec '{text}'")
    raise ConfigError(f"unknown spec '{text}'; expected one of {', '.join(PRESETS)}")
