"""Tests for conditional laws, total-variation distances and the decay scan."""
import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

import math
from fractions import Fraction

import pytest

from services.dist.scan import fl_scan, fl_stability, fundamental_lemma_exponents
from services.dist.tv import conditioned_truncated_pmf, tv_bruteforce, tv_truncated
from services.model.assembly import derive_rates
from services.model.presets import ewens, permutations
from shared.exceptions import ArgumentError, CostGuardError, FitError
from shared.models import ComponentVector


class TestConditionedPmf:
    """Test P(xi_r = s_r | l(xi) = n)."""

    def test_permutation_examples(self):
        """Three fixed points in S_3 has probability 1/6, none 1/3."""
        rates = derive_rates(permutations(), 3, "exact")
        assert conditioned_truncated_pmf(rates, 3, 1, ComponentVector.of(3)) == Fraction(1, 6)
        assert conditioned_truncated_pmf(rates, 3, 1, ComponentVector.of(0)) == Fraction(1, 3)

    def test_normalised(self):
        """The law of the first coordinate sums to one."""
        rates = derive_rates(ewens(2), 6, "exact")
        total = sum(conditioned_truncated_pmf(rates, 6, 1, ComponentVector.of(k)) for k in range(7))
        assert total == 1

    def test_level_above_n(self):
        """Prefixes of level above n have probability zero."""
        rates = derive_rates(permutations(), 3, "exact")
        assert conditioned_truncated_pmf(rates, 3, 2, ComponentVector.of(2, 1)) == 0

    def test_float_matches_exact(self):
        """Both backends agree."""
        rates = derive_rates(ewens("1/2"), 10, "exact")
        s = ComponentVector.of(1, 2)
        exact = conditioned_truncated_pmf(rates, 10, 2, s)
        assert conditioned_truncated_pmf(rates.as_float(), 10, 2, s) == pytest.approx(float(exact), rel=1e-10)

    def test_prefix_dimension(self):
        """The prefix must have exactly r coordinates."""
        rates = derive_rates(permutations(), 3, "exact")
        with pytest.raises(ArgumentError):
            conditioned_truncated_pmf(rates, 3, 2, ComponentVector.of(1))


class TestTvTruncated:
    """Test the truncated total-variation distance."""

    def test_single_point(self):
        """At n = 1 the first count is 1 surely, so d = 1 - 1/e."""
        rates = derive_rates(permutations(), 1, "exact")
        assert tv_truncated(rates, 1, 1) == pytest.approx(1 - math.exp(-1), abs=1e-12)

    def test_fixed_points_of_s3(self):
        """Fixed points of a uniform permutation of 3 against Poisson(1)."""
        rates = derive_rates(permutations(), 3, "exact")
        assert tv_truncated(rates, 3, 1) == pytest.approx(0.2374818, abs=1e-7)

    def test_sides_agree(self, perm_rates):
        """Positive and negative parts carry the same mass."""
        for rates in (perm_rates, derive_rates(ewens(2), 12, "exact")):
            for r in (1, 3, 6):
                pos = tv_truncated(rates, 12, r, side="positive")
                neg = tv_truncated(rates, 12, r, side="negative")
                assert pos == pytest.approx(neg, abs=1e-12)

    def test_matches_bruteforce(self, preset_specs):
        """Series and enumeration agree for small n and r."""
        for spec in preset_specs:
            rates = derive_rates(spec, 12, "exact")
            for n in range(1, 13):
                for r in range(1, min(4, n) + 1):
                    assert tv_truncated(rates, n, r) == pytest.approx(tv_bruteforce(rates, n, r), abs=1e-10)

    def test_independent_of_u(self):
        """The scale u cancels under conditioning."""
        base = derive_rates(ewens(2), 10, "exact")
        scaled = derive_rates(ewens(2, u="1/2"), 10, "exact")
        for r in (1, 2, 5):
            assert tv_truncated(base, 10, r) == pytest.approx(tv_truncated(scaled, 10, r), abs=1e-12)

    def test_float_backend(self):
        """The float backend reproduces the exact distance."""
        rates = derive_rates(ewens("1/2"), 40, "exact")
        assert tv_truncated(rates, 40, 5, backend="float") == pytest.approx(tv_truncated(rates, 40, 5), abs=1e-10)

    def test_range_checks(self, perm_rates):
        """r outside 1..n and n beyond the rates are refused."""
        with pytest.raises(ArgumentError):
            tv_truncated(perm_rates, 12, 0)
        with pytest.raises(ArgumentError):
            tv_truncated(perm_rates, 5, 6)
        with pytest.raises(ArgumentError):
            tv_truncated(perm_rates, 13, 1)


class TestBruteforce:
    """Test the enumeration reference."""

    def test_cost_guard(self, perm_rates):
        """Large n or r is refused."""
        rates = derive_rates(permutations(), 20, "exact")
        with pytest.raises(CostGuardError):
            tv_bruteforce(rates, 15, 1)
        with pytest.raises(CostGuardError):
            tv_bruteforce(perm_rates, 12, 6)

    def test_bruteforce_fixed_points(self, perm_rates):
        """Enumeration alone gives the fixed-point distance for S_3."""
        assert tv_bruteforce(perm_rates, 3, 1) == pytest.approx(0.2374818, abs=1e-7)

    def test_support_cap_overestimates(self, perm_rates):
        """Adding the Poisson mass outside a small box can only raise the value."""
        exact = tv_bruteforce(perm_rates, 8, 2)
        for cap in (0, 1, 2):
            assert tv_bruteforce(perm_rates, 8, 2, support_cap=cap) >= exact - 1e-12
        with pytest.raises(ArgumentError):
            tv_bruteforce(perm_rates, 8, 2, support_cap=-1)


class TestExponents:
    """Test the explicit decay exponents."""

    def test_theta_one(self):
        """theta' = 1 gives c = (sqrt 2 - 1)^2 and c0 = c / (2(1+c))."""
        constants = fundamental_lemma_exponents(1.0)
        assert constants.c == pytest.approx(0.171573, abs=1e-6)
        assert constants.c0 == pytest.approx(0.0732, abs=1e-4)
        assert constants.c1 == constants.c0

    def test_large_theta(self):
        """Beyond 3 the exponent is linear in theta'."""
        constants = fundamental_lemma_exponents(5.0)
        assert constants.c == pytest.approx(2.0)
        assert constants.c0 == pytest.approx(1.0 / 3.0)

    def test_continuous_at_three(self):
        """Both branches give c = 1 at theta' = 3."""
        assert fundamental_lemma_exponents(3.0).c == pytest.approx(1.0)
        assert fundamental_lemma_exponents(3.0 + 1e-9).c == pytest.approx(1.0, abs=1e-8)

    def test_nonpositive(self):
        """theta' must be positive."""
        with pytest.raises(ArgumentError):
            fundamental_lemma_exponents(0.0)


class TestScan:
    """Test the decay scan and its fit."""

    def test_single_r(self):
        """One r value cannot be fitted."""
        with pytest.raises(FitError):
            fl_scan(ewens(2), 32, [2, 2], 2)

    def test_r_beyond_quarter(self):
        """r must stay below n/4."""
        with pytest.raises(ArgumentError):
            fl_scan(ewens(2), 32, [1, 9], 2)

    def test_slope_exceeds_exponent(self):
        """Fitted log-log slopes dominate the proven exponent."""
        for spec, theta_lo in ((ewens(2), 2), (ewens("1/2"), 0.5)):
            scan = fl_scan(spec, 64, range(1, 17), theta_lo)
            assert scan.slope >= scan.constants.c1
            assert all(row.tv <= row.bound + 1e-15 for row in scan.rows)

    def test_frame_columns(self):
        """Rows export to a frame."""
        scan = fl_scan(ewens(2), 32, [1, 2, 4, 8], 2)
        frame = scan.to_frame()
        assert list(frame.columns) == ["r", "n", "tv", "bound", "backend"]
        assert len(frame) == 4

    @pytest.mark.slow
    def test_stability_across_n(self):
        """C_fit stays within a factor two across n for Ewens families."""
        for theta in (0.5, 1, 2):
            _, ratio = fl_stability(ewens(theta), [128, 256, 512], theta, backend="float")
            assert ratio <= 2.0

    @pytest.mark.slow
    @pytest.mark.parametrize("theta", [0.5, 1, 2])
    def test_slope_exceeds_exponent_large_n(self, theta):
        """At n = 128, 256 and 512 the fitted slope over r <= n/4 stays above c1."""
        scans, _ = fl_stability(ewens(theta), [128, 256, 512], theta, backend="float")
        assert sorted(scans) == [128, 256, 512]
        for scan in scans.values():
            assert scan.slope >= scan.constants.c1
            assert all(row.tv <= row.bound + 1e-12 for row in scan.rows)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
