"""Samplers for component vectors under the conditioned Poisson law."""
import functools
import logging
import math
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.stats import chi2_contingency

from services.sampler.rng import poisson_inversion, replica_stream
from services.series.engine import exp_series, rate_polynomial
from shared.config import Config
from shared.exceptions import ArgumentError, LevelMismatchError, RetryBudgetExceeded
from shared.models import Backend, ComponentVector, RateSequence

logger = logging.getLogger(__name__)

_BLOCK = 256


class RejectionDraw(BaseModel):
    """Accepted vector with the number of attempts it took."""
    vector: ComponentVector
    attempts: int


class RejectionBatch(BaseModel):
    """Accepted vectors of a batch run and the total number of attempts."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    vectors: np.ndarray  # shape (count, n)
    attempts: int

    @property
    def acceptance_rate(self) -> float:
        return len(self.vectors) / self.attempts


def _weights(n: int) -> np.ndarray:
    return np.arange(1, n + 1, dtype=np.int64)


def sample_rejection(rates: RateSequence, n: int, seed: int, max_attempts: int = Config.DEFAULT_MAX_ATTEMPTS,
                     replica: int = 0) -> RejectionDraw:
    """Draw independent Poissons until l(xi) = n.

    Args:
        rates: Poisson rates (the first n are used)
        n: Target size
        seed: Master seed
        max_attempts: Attempt budget
        replica: Stream index under the master seed

    Returns:
        Accepted vector and attempt count

    Raises:
        RetryBudgetExceeded: No acceptance within max_attempts
    """
    if max_attempts < 1:
        raise ArgumentError(f"max_attempts must be at least 1, got {max_attempts}")
    if n < 1 or n > rates.n:
        raise ArgumentError(f"n must lie in 1..{rates.n}, got {n}")
    rng = replica_stream(seed, replica)
    lam = rates.values[:n]
    j = _weights(n)
    used = 0
    while used < max_attempts:
        block = min(_BLOCK, max_attempts - used)
        xi = poisson_inversion(rng, np.broadcast_to(lam, (block, n)))
        hits = np.flatnonzero(xi @ j == n)
        if len(hits):
            k = int(hits[0])
            return RejectionDraw(vector=ComponentVector(s=tuple(int(x) for x in xi[k])), attempts=used + k + 1)
        used += block
    logger.error(f"Rejection sampler exhausted {max_attempts} attempts at n={n}")
    raise RetryBudgetExceeded(max_attempts)


def sample_rejection_batch(rates: RateSequence, n: int, count: int, seed: int,
                           replica: int = 0, block: int = 4096) -> RejectionBatch:
    """Collect ``count`` accepted rejection draws and the attempts they took."""
    if count < 1:
        raise ArgumentError(f"count must be positive, got {count}")
    rng = replica_stream(seed, replica)
    lam = rates.values[:n]
    j = _weights(n)
    accepted: List[np.ndarray] = []
    have = 0
    attempts = 0
    while have < count:
        xi = poisson_inversion(rng, np.broadcast_to(lam, (block, n)))
        ok = np.flatnonzero(xi @ j == n)
        need = count - have
        if len(ok) >= need:
            attempts += int(ok[need - 1]) + 1
            accepted.append(xi[ok[:need]])
            have = count
        else:
            attempts += block
            accepted.append(xi[ok])
            have += len(ok)
    vectors = np.concatenate(accepted, axis=0)
    logger.info(f"Rejection batch: {count} draws in {attempts} attempts (rate {count / attempts:.5f})")
    return RejectionBatch(vectors=vectors, attempts=attempts)


class SequentialSampler:
    """Exact sampler drawing xi_n, xi_{n-1}, ..., xi_1 given the remaining size.

    Holds the table T[j][m] = [z^m] exp(sum_{i<=j} lambda_i z^i) for
    0 <= j, m <= n, so that
    P(xi_j = s | l_j = m) = lambda_j^s/s! * T[j-1][m - j s] / T[j][m].
    """

    def __init__(self, rates: RateSequence, n: int, backend: Optional[Backend] = None):
        """Build the table.

        Args:
            rates: Poisson rates (at least n of them)
            n: Target size
            backend: Exact (rationals) or float table; defaults to the rates' backend
        """
        if n < 1 or n > rates.n:
            raise ArgumentError(f"n must lie in 1..{rates.n}, got {n}")
        self.rates = rates
        self.n = n
        self.backend = Backend(backend) if backend is not None else rates.backend
        if self.backend == Backend.EXACT and rates.exact is None:
            raise ArgumentError("exact table requested for float rates")
        self.table = self._build()
        logger.info(f"Sequential table for n={n} built [{self.backend.value}]")

    def _term(self, j: int, s: int) -> Union[Fraction, float]:
        lam = self.rates.lam(j) if self.backend == Backend.EXACT else float(self.rates.values[j - 1])
        return lam ** s / math.factorial(s)

    def _build(self) -> Union[List[List[Fraction]], np.ndarray]:
        n = self.n
        if self.backend == Backend.EXACT:
            table = [[Fraction(1)] + [Fraction(0)] * n]
            for j in range(1, n + 1):
                prev = table[-1]
                terms = [self._term(j, s) for s in range(n // j + 1)]
                row = []
                for m in range(n + 1):
                    row.append(sum((terms[s] * prev[m - j * s] for s in range(m // j + 1)), Fraction(0)))
                table.append(row)
            return table
        table = np.zeros((n + 1, n + 1))
        table[0, 0] = 1.0
        for j in range(1, n + 1):
            lam = float(self.rates.values[j - 1])
            row = table[j - 1].copy()
            term = 1.0
            for s in range(1, n // j + 1):
                term *= lam / s
                row[j * s:] += term * table[j - 1, : n + 1 - j * s]
            table[j] = row
        return table

    def conditional(self, j: int, m: int) -> List[Union[Fraction, float]]:
        """P(xi_j = s | l_j(xi) = m) for s = 0..m//j."""
        T = self.table
        denom = T[j][m]
        return [self._term(j, s) * T[j - 1][m - j * s] / denom for s in range(m // j + 1)]

    def sample(self, rng: np.random.Generator) -> ComponentVector:
        """One exact draw."""
        return ComponentVector(s=tuple(int(x) for x in self.sample_many(1, rng)[0]))

    def sample_many(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """``count`` exact draws as an integer array of shape (count, n)."""
        n = self.n
        T = self.table if self.backend == Backend.FLOAT else np.array(
            [[float(x) for x in row] for row in self.table]
        )
        out = np.zeros((count, n), dtype=np.int64)
        m = np.full(count, n, dtype=np.int64)
        for j in range(n, 1, -1):
            u = rng.random(count) * T[j, m]
            lam = float(self.rates.values[j - 1])
            cum = np.zeros(count)
            chosen = np.full(count, -1, dtype=np.int64)
            term = 1.0
            for s in range(n // j + 1):
                if s:
                    term *= lam / s
                rem = m - j * s
                valid = rem >= 0
                w = np.where(valid, term * T[j - 1, np.clip(rem, 0, None)], 0.0)
                cum += w
                pick = (chosen < 0) & valid & (u < cum)
                chosen[pick] = s
            # round-off can leave u above the final cumulative weight
            left = chosen < 0
            chosen[left] = m[left] // j
            out[:, j - 1] = chosen
            m = m - j * chosen
        out[:, 0] = m
        return out


class _RatesKey:
    """Rates hashed by fingerprint, so lru_cache can key on them."""
    __slots__ = ("rates", "fingerprint")

    def __init__(self, rates: RateSequence):
        self.rates = rates
        self.fingerprint = rates.fingerprint

    def __hash__(self) -> int:
        return hash(self.fingerprint)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _RatesKey) and other.fingerprint == self.fingerprint


@functools.lru_cache(maxsize=Config.SAMPLER_CACHE_SIZE)
def _cached_sampler(key: _RatesKey, n: int, backend: Backend) -> SequentialSampler:
    return SequentialSampler(key.rates, n, backend)


def sequential_sampler(rates: RateSequence, n: int, backend: Optional[Backend] = None) -> SequentialSampler:
    """SequentialSampler for (rates, n, backend), from a bounded LRU cache of DP tables."""
    backend = Backend(backend) if backend is not None else rates.backend
    return _cached_sampler(_RatesKey(rates), n, backend)


def sample_sequential(rates: RateSequence, n: int, seed: int, replica: int = 0) -> ComponentVector:
    """One exact draw from mu_n by the sequential method."""
    sampler = sequential_sampler(rates, n, Backend.FLOAT)
    return sampler.sample(replica_stream(seed, replica))


def sampler_law(rates: RateSequence, n: int, s: ComponentVector) -> Union[Fraction, float]:
    """Probability that the sequential sampler returns s (product of its conditionals)."""
    if s.n != n or s.level != n:
        raise LevelMismatchError(f"need a level-{n} vector of dimension {n}, got l={s.level}, dim={s.n}")
    sampler = sequential_sampler(rates, n)
    prob: Union[Fraction, float] = Fraction(1) if sampler.backend == Backend.EXACT else 1.0
    m = n
    for j in range(n, 0, -1):
        prob *= sampler.conditional(j, m)[s.s[j - 1]]
        m -= j * s.s[j - 1]
    return prob


class ComponentChainSampler:
    """Exact sampler for large n that peels off one component at a time.

    With D_m = [z^m] exp(sum_j lambda_j z^j), the component holding a
    distinguished element of the remaining m has size k with probability
    k * lambda_k * D_{m-k} / (m * D_m). Memory is O(n).
    """

    def __init__(self, rates: RateSequence, n: int):
        if n < 1 or n > rates.n:
            raise ArgumentError(f"n must lie in 1..{rates.n}, got {n}")
        self.n = n
        float_rates = rates.as_float()
        D = exp_series(rate_polynomial(float_rates, 0, n, n), n)
        with np.errstate(divide="ignore"):
            self.log_d = np.array([D.log_coeff(m) for m in range(n + 1)])
        k = np.arange(1, n + 1, dtype=np.float64)
        self.log_k_lam = np.log(k) + np.log(float_rates.values[:n])
        logger.info(f"Component chain sampler ready for n={n}")

    def sample_counts(self, rng: np.random.Generator) -> np.ndarray:
        """Counts s_1..s_n of one draw."""
        counts = np.zeros(self.n, dtype=np.int64)
        m = self.n
        while m > 0:
            logw = self.log_k_lam[:m] + self.log_d[m - 1::-1] - math.log(m) - self.log_d[m]
            w = np.exp(logw - logw.max())
            cum = np.cumsum(w)
            k = int(np.searchsorted(cum, rng.random() * cum[-1], side="right")) + 1
            k = min(k, m)
            counts[k - 1] += 1
            m -= k
        return counts

    def sample(self, rng: np.random.Generator) -> ComponentVector:
        return ComponentVector(s=tuple(int(x) for x in self.sample_counts(rng)))


def type_counts(vectors: np.ndarray, n: int) -> Dict[Tuple[int, ...], int]:
    """Frequency of each level-n type among sampled vectors."""
    out: Dict[Tuple[int, ...], int] = {}
    for row in np.asarray(vectors):
        key = tuple(int(x) for x in row[:n])
        out[key] = out.get(key, 0) + 1
    return out


def two_sample_chi_square(a: np.ndarray, b: np.ndarray, n: int, min_count: int = 10) -> float:
    """p-value of the chi-square homogeneity test between two samples of types.

    Types seen fewer than ``min_count`` times in the pooled sample are
    merged into one column.
    """
    ca, cb = type_counts(a, n), type_counts(b, n)
    keys = sorted(set(ca) | set(cb))
    common = [k for k in keys if ca.get(k, 0) + cb.get(k, 0) >= min_count]
    rare = [k for k in keys if ca.get(k, 0) + cb.get(k, 0) < min_count]
    rows = [[ca.get(k, 0) for k in common], [cb.get(k, 0) for k in common]]
    if rare:
        rows[0].append(sum(ca.get(k, 0) for k in rare))
        rows[1].append(sum(cb.get(k, 0) for k in rare))
    table = np.array(rows)
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 1.0
    _, p_value, _, _ = chi2_contingency(table)
    return float(p_value)


def draw_many(rates: RateSequence, n: int, count: int, seed: int,
              method: str = "sequential", replica: int = 0) -> np.ndarray:
    """``count`` draws by the named method as an array of shape (count, n)."""
    if method == "sequential":
        return sequential_sampler(rates, n, Backend.FLOAT).sample_many(count, replica_stream(seed, replica))
    if method == "rejection":
        return sample_rejection_batch(rates, n, count, seed, replica).vectors
    if method == "chain":
        chain = ComponentChainSampler(rates, n)
        rng = replica_stream(seed, replica)
        return np.array([chain.sample_counts(rng) for _ in range(count)])
    raise ArgumentError(f"unknown sampling method '{method}'")
