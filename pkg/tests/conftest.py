"""Test configuration."""
import sys
import os

# Add parent directory to path for imports
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import pytest

from services.model.assembly import derive_rates
from services.model.presets import ewens, permutations, set_partitions


@pytest.fixture
def perm_rates():
    """Exact permutation rates 1/j for j <= 12."""
    return derive_rates(permutations(), 12, "exact")


@pytest.fixture
def preset_specs():
    """The named families used across the exactness checks."""
    return [permutations(), ewens("1/2"), ewens(2), set_partitions()]
