"""Tests for random streams and the component-vector samplers."""
import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

import math
from fractions import Fraction

import numpy as np
import pytest

from services.model.assembly import derive_rates, exact_law
from services.model.presets import ewens, permutations, set_partitions
from services.sampler.rng import poisson_inversion, replica_stream
from services.sampler.sampler import (
    ComponentChainSampler,
    _cached_sampler,
    draw_many,
    sample_rejection,
    sample_rejection_batch,
    sample_sequential,
    sampler_law,
    sequential_sampler,
    two_sample_chi_square,
)
from services.verify.enumeration import enumerate_level
from shared.config import Config
from shared.exceptions import ArgumentError, LevelMismatchError, RetryBudgetExceeded
from shared.models import ComponentVector, RateSequence


class TestStreams:
    """Test seeded streams and Poisson variates."""

    def test_stream_determinism(self):
        """(seed, replica) pins the stream; replicas differ."""
        a = replica_stream(7, 3).random(5)
        b = replica_stream(7, 3).random(5)
        c = replica_stream(7, 4).random(5)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_negative_seed(self):
        """Seeds must be nonnegative."""
        with pytest.raises(ArgumentError):
            replica_stream(-1)

    def test_poisson_mean(self):
        """Inversion variates have the right mean and variance."""
        draws = poisson_inversion(replica_stream(1), np.full(100_000, 2.5))
        assert draws.mean() == pytest.approx(2.5, abs=0.03)
        assert draws.var() == pytest.approx(2.5, abs=0.06)

    def test_large_rates(self):
        """Rates above the inversion limit fall back to numpy."""
        draws = poisson_inversion(replica_stream(2), np.full(20_000, 50.0))
        assert draws.mean() == pytest.approx(50.0, abs=0.3)


class TestRejection:
    """Test the rejection sampler."""

    def test_size_one(self):
        """At n = 1 the only vector is (1,)."""
        rates = derive_rates(permutations(), 1)
        assert sample_rejection(rates, 1, seed=0).vector == ComponentVector.of(1)

    def test_determinism(self):
        """Same seed, same draw; accepted draws have level n."""
        rates = derive_rates(ewens(2), 10)
        first = sample_rejection(rates, 10, seed=11)
        second = sample_rejection(rates, 10, seed=11)
        assert first == second
        assert first.vector.level == 10

    def test_budget(self):
        """Tiny rates exhaust the attempt budget."""
        rates = RateSequence.from_floats([1e-9] * 3)
        with pytest.raises(RetryBudgetExceeded) as info:
            sample_rejection(rates, 3, seed=0, max_attempts=1000)
        assert info.value.attempts == 1000

    def test_bad_budget(self):
        """The budget must allow at least one attempt."""
        rates = derive_rates(permutations(), 3)
        with pytest.raises(ArgumentError):
            sample_rejection(rates, 3, seed=0, max_attempts=0)

    def test_acceptance_rate(self):
        """For permutations of 10 the acceptance rate is exp(-H_10)."""
        rates = derive_rates(permutations(), 10)
        count = 2000
        batch = sample_rejection_batch(rates, 10, count, seed=5)
        p = math.exp(-sum(1.0 / j for j in range(1, 11)))
        sigma = p * math.sqrt((1 - p) / count)
        assert abs(batch.acceptance_rate - p) <= 3 * sigma
        assert np.all(batch.vectors @ np.arange(1, 11) == 10)


class TestSequential:
    """Test the exact sequential sampler."""

    def test_size_one(self):
        """At n = 1 the only vector is (1,)."""
        rates = derive_rates(permutations(), 1)
        assert sample_sequential(rates, 1, seed=0) == ComponentVector.of(1)

    def test_law_example(self):
        """The sampler returns cycle type 1+2 in S_3 with probability 1/2."""
        rates = derive_rates(permutations(), 3, "exact")
        assert sampler_law(rates, 3, ComponentVector.of(1, 1, 0)) == Fraction(1, 2)

    def test_law_mismatch(self):
        """Vectors of the wrong level are refused."""
        rates = derive_rates(permutations(), 3, "exact")
        with pytest.raises(LevelMismatchError):
            sampler_law(rates, 3, ComponentVector.of(1, 0, 0))

    def test_law_equals_exact(self):
        """The sampler's law is the conditioned law, exactly."""
        for spec in (permutations(), ewens("1/2"), set_partitions()):
            for n in range(1, 9):
                rates = derive_rates(spec, n, "exact")
                for s in enumerate_level(n):
                    assert sampler_law(rates, n, s) == exact_law(spec, s)

    def test_draws_have_level_n(self):
        """Every sequential draw is a level-n vector."""
        rates = derive_rates(ewens(2), 30)
        draws = draw_many(rates, 30, 200, seed=1)
        assert draws.shape == (200, 30)
        assert np.all(draws @ np.arange(1, 31) == 30)

    def test_reproducible(self):
        """Same seed, same batch."""
        rates = derive_rates(ewens(2), 12)
        np.testing.assert_array_equal(draw_many(rates, 12, 50, seed=4), draw_many(rates, 12, 50, seed=4))

    def test_table_cache_bounded(self):
        """DP tables are reused for equal rates and evicted beyond the cache size."""
        _cached_sampler.cache_clear()
        rates = derive_rates(ewens(2), 10)
        assert sequential_sampler(rates, 10) is sequential_sampler(derive_rates(ewens(2), 10), 10)
        for k in range(Config.SAMPLER_CACHE_SIZE + 4):
            sequential_sampler(derive_rates(ewens(k + 3), 6), 6)
        info = _cached_sampler.cache_info()
        assert info.currsize == Config.SAMPLER_CACHE_SIZE
        assert info.hits >= 1

    def test_unknown_method(self):
        """Unknown methods are refused."""
        rates = derive_rates(permutations(), 4)
        with pytest.raises(ArgumentError):
            draw_many(rates, 4, 1, seed=0, method="nosuch")


class TestChain:
    """Test the component-chain sampler."""

    def test_level(self):
        """Chain draws have level n."""
        rates = derive_rates(ewens(2), 500, "float")
        chain = ComponentChainSampler(rates, 500)
        rng = replica_stream(3)
        for _ in range(20):
            counts = chain.sample_counts(rng)
            assert int(counts @ np.arange(1, 501)) == 500

    def test_matches_sequential(self):
        """Chain and sequential draws are indistinguishable at n = 8."""
        rates = derive_rates(ewens("1/2"), 8)
        chain = draw_many(rates, 8, 5000, seed=1, method="chain")
        sequential = draw_many(rates, 8, 5000, seed=2, method="sequential")
        assert two_sample_chi_square(chain, sequential, 8) > 1e-3


class TestChiSquare:
    """Test the two-sample homogeneity check."""

    def test_identical_samples(self):
        """A sample compared with itself has p-value one."""
        rates = derive_rates(permutations(), 6)
        draws = draw_many(rates, 6, 2000, seed=0)
        assert two_sample_chi_square(draws, draws, 6) == pytest.approx(1.0)

    def test_distinct_laws(self):
        """Different families are told apart."""
        a = draw_many(derive_rates(permutations(), 6), 6, 5000, seed=0)
        b = draw_many(derive_rates(set_partitions(), 6), 6, 5000, seed=0)
        assert two_sample_chi_square(a, b, 6) < 1e-6

    @pytest.mark.slow
    def test_rejection_matches_sequential(self):
        """Rejection and sequential samplers agree over many seeds."""
        rates = derive_rates(permutations(), 8)
        passed = 0
        for seed in range(20):
            rejection = draw_many(rates, 8, 20_000, seed=seed, method="rejection")
            sequential = draw_many(rates, 8, 20_000, seed=seed + 100, method="sequential")
            passed += two_sample_chi_square(rejection, sequential, 8) > 1e-3
        assert passed >= 19


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
