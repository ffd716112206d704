"""Tests for additive functions, centering and the normalised processes."""
import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

import math

import numpy as np
import pytest
from pydantic import ValidationError

from services.additive.functions import (
    beta_of,
    build_process,
    centering_scaling,
    cumulative_moments,
    increments,
    partial_value,
)
from services.model.assembly import derive_rates
from services.model.presets import permutations
from services.sampler.rng import replica_stream
from shared.exceptions import ArgumentError
from shared.models import AdditiveFunctionSpec, ComponentVector, RateSequence


@pytest.fixture
def unit_rates():
    """Sixty rates equal to one."""
    return RateSequence.from_floats([1.0] * 60)


@pytest.fixture
def random_vector():
    """A component vector of dimension 60 with counts in 0..2."""
    counts = replica_stream(0).integers(0, 3, size=60)
    return ComponentVector(s=tuple(int(c) for c in counts))


class TestAdditiveFunctions:
    """Test additive function values."""

    def test_partial_value(self):
        """h(s, m) sums h_j(s_j) over j <= m."""
        h = AdditiveFunctionSpec.completely(2.0, 3)
        s = ComponentVector.of(1, 1, 0)
        assert partial_value(h, s, 2) == 4.0
        assert partial_value(h, s, 3) == 4.0
        assert partial_value(h, s, 0) == 0.0

    def test_partial_value_range(self):
        """m beyond the vector is refused."""
        h = AdditiveFunctionSpec.completely(1.0, 3)
        with pytest.raises(ArgumentError):
            partial_value(h, ComponentVector.of(1, 1, 0), 4)

    def test_table_function(self):
        """Table rows repeat their last entry."""
        h = AdditiveFunctionSpec.from_table([[1.0, 5.0], [2.0]])
        assert h.value(1, 3) == 5.0
        assert h.value(2, 4) == 2.0
        assert h.value(1, 0) == 0.0
        np.testing.assert_array_equal(h.a, [1.0, 2.0])

    def test_function_must_vanish_at_zero(self):
        """h_j(0) = 0 is enforced."""
        with pytest.raises(ValidationError):
            AdditiveFunctionSpec.from_function(lambda j, s: s + 1.0, 3)

    def test_increment_forms(self):
        """Indicator and raw increments differ on repeated components."""
        h = AdditiveFunctionSpec.completely([1.0, 2.0, 3.0], 3)
        np.testing.assert_array_equal(increments(h, [2, 0, 1], "indicator"), [1.0, 0.0, 3.0])
        np.testing.assert_array_equal(increments(h, [2, 0, 1], "raw"), [2.0, 0.0, 3.0])
        with pytest.raises(ArgumentError):
            increments(h, [1, 0, 0], "nosuch")


class TestCentering:
    """Test A(m), B^2(m) and beta(m)."""

    def test_unit_rates(self, unit_rates):
        """With lambda_j = 1 and a_j = 1 the moments grow linearly."""
        h = AdditiveFunctionSpec.completely(1.0, 60)
        stats = centering_scaling(h, unit_rates, 60)
        q = 1 - math.exp(-1)
        assert stats.A == pytest.approx(60 * q)
        assert stats.B2 == pytest.approx(60 * math.exp(-1) * q)

    def test_zero_function(self, unit_rates):
        """a = 0 has no scaling."""
        stats = centering_scaling(AdditiveFunctionSpec.completely(0.0, 60), unit_rates, 60)
        assert stats.A == 0.0
        assert stats.B2 == 0.0
        assert stats.beta is None

    def test_permutation_centering(self):
        """A(2) = (1 - e^{-1}) + (1 - e^{-1/2}) for lambda_j = 1/j."""
        rates = derive_rates(permutations(), 2, "float")
        stats = centering_scaling(AdditiveFunctionSpec.completely(1.0, 2), rates, 2)
        assert stats.A == pytest.approx(2 - math.exp(-1) - math.exp(-0.5), rel=1e-12)
        assert stats.A == pytest.approx(1.025590, abs=1e-6)

    def test_beta_threshold(self):
        """beta needs B > e."""
        assert beta_of(0.0) is None
        assert beta_of(4.0) is None
        b = math.e ** 2
        assert beta_of(b * b) == pytest.approx(b * math.sqrt(2 * math.log(2)))

    def test_variance_monotone(self, unit_rates):
        """B^2 is nondecreasing in m."""
        h = AdditiveFunctionSpec.completely(np.linspace(-2, 2, 60), 60)
        moments = cumulative_moments(h, unit_rates)
        assert np.all(np.diff(moments.B2) >= 0)
        assert moments.n == 60


class TestBuildProcess:
    """Test the normalised polygonal processes."""

    def test_raw_endpoint(self, unit_rates, random_vector):
        """U_m(1) is the centred sum over beta(m); breakpoints are i/m."""
        h = AdditiveFunctionSpec.completely(2.0, 60)
        path = build_process(h, unit_rates, random_vector, 60, form="raw")
        stats = centering_scaling(h, unit_rates, 60)
        np.testing.assert_allclose(path.t, np.arange(61) / 60, atol=1e-12)
        expected = (2.0 * sum(random_vector.s) - stats.A) / stats.beta
        assert path.y[-1] == pytest.approx(expected, rel=1e-12)
        assert path.y[0] == 0.0

    def test_indicator_endpoint(self, unit_rates, random_vector):
        """The indicator form counts sizes present, not multiplicities."""
        h = AdditiveFunctionSpec.completely(2.0, 60)
        path = build_process(h, unit_rates, random_vector, 60)
        stats = centering_scaling(h, unit_rates, 60)
        present = sum(1 for c in random_vector.s if c > 0)
        assert path.y[-1] == pytest.approx((2.0 * present - stats.A) / stats.beta, rel=1e-12)

    def test_truncation_freezes(self, unit_rates, random_vector):
        """After the truncation index the path is constant."""
        h = AdditiveFunctionSpec.completely(2.0, 60)
        path = build_process(h, unit_rates, random_vector, 60, form="raw", truncate_at=10)
        np.testing.assert_array_equal(path.y[11:], np.full(50, path.y[10]))

    def test_undefined_beta(self, unit_rates, random_vector):
        """Processes with B <= e are refused."""
        h = AdditiveFunctionSpec.completely(1.0, 60)
        with pytest.raises(ArgumentError):
            build_process(h, unit_rates, random_vector, 1)
        with pytest.raises(ArgumentError):
            build_process(AdditiveFunctionSpec.completely(0.0, 60), unit_rates, random_vector, 60)

    def test_m_range(self, unit_rates):
        """m must lie within the vector."""
        h = AdditiveFunctionSpec.completely(2.0, 60)
        with pytest.raises(ArgumentError):
            build_process(h, unit_rates, ComponentVector.of(1, 0), 3)

    def test_zero_coefficients_collapse(self, unit_rates, random_vector):
        """Indices with a_j = 0 add no breakpoints."""
        a = np.where(np.arange(60) % 2 == 0, 3.0, 0.0)
        h = AdditiveFunctionSpec.completely(a, 60)
        path = build_process(h, unit_rates, random_vector, 60, form="raw")
        assert len(path.t) == 31
        assert np.all(np.diff(path.t) > 0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
