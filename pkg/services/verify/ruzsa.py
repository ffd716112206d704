"""Numeric verification of the extension-set inequality for conditioned product measures.

For independent xi_j with laws p_j and P_n = P(l(xi) = n), the mass that
the conditioned law puts outside the extension V(U) is bounded by
C * P(xi not in U)^theta plus a term of order n^{-theta}. The constants
come from four explicit conditions on p_j; here they are computed from
the pmf table and the inequality is evaluated by enumeration.
"""
import itertools
import logging
import math
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict
from scipy.stats import poisson

from services.model.assembly import derive_rates
from services.model.presets import ewens, permutations, random_weakly_logarithmic, set_partitions
from services.sampler.rng import replica_stream
from services.sampler.sampler import sample_sequential
from services.verify.enumeration import extension_differences, in_extension, level_tuples
from shared.config import Config
from shared.exceptions import ArgumentError, ConditionError, CostGuardError
from shared.models import AdditiveFunctionSpec, Backend, ComponentVector, RateSequence

logger = logging.getLogger(__name__)

Counts = Tuple[int, ...]
Predicate = Callable[[Counts], bool]
PmfTable = List[np.ndarray]

_BOX_LIMIT = 250_000
_REL_TOL = 1e-12


def poisson_table(rates: RateSequence, n: int) -> PmfTable:
    """p_j(k) = e^{-lambda_j} lambda_j^k / k! for k = 0..n // j, j = 1..n."""
    if not 1 <= n <= rates.n:
        raise ArgumentError(f"n must lie in 1..{rates.n}, got {n}")
    return [poisson.pmf(np.arange(n // j + 1), rates.values[j - 1]) for j in range(1, n + 1)]


def level_masses(table: PmfTable, n: int) -> np.ndarray:
    """P(Z_+^n(m)) for m = 0..n: all n coordinates drawn, l(xi) = m."""
    total = np.zeros(n + 1)
    total[0] = 1.0
    for j, p in enumerate(table[:n], start=1):
        spread = np.zeros(n + 1)
        k = np.arange(min(len(p), n // j + 1))
        spread[j * k] = p[k]
        total = np.convolve(total, spread)[: n + 1]
    return total


def _divisor_sums(table: PmfTable, n: int) -> np.ndarray:
    """sum_{kj = m, k >= 1, j <= n} p_j(k) / p_j(0) for m = 0..n (index m)."""
    out = np.zeros(n + 1)
    for j, p in enumerate(table[:n], start=1):
        for k in range(1, min(len(p) - 1, n // j) + 1):
            out[k * j] += p[k] / p[0]
    return out


class Lemma8Constants(BaseModel):
    """Constants c2, c3, C1, C2 and the combined C for a pmf table."""
    n: int
    theta: float
    c2: float
    c3: float
    C1: float
    C2: float
    C: float

    def recheck(self, table: PmfTable, n: Optional[int] = None) -> Dict[str, bool]:
        """Re-verify the four conditions with these constants."""
        n = self.n if n is None else n
        masses = level_masses(table, n)
        p_n = masses[n]
        m = np.arange(n)
        sums = _divisor_sums(table, n)
        slack = 1.0 + _REL_TOL
        return {
            "i": all(p[0] * slack >= self.c2 for p in table[:n]),
            "ii": bool(np.all(masses[:n] <= self.C1 * (n / (m + 1.0)) ** (1.0 - self.theta) * p_n * slack)),
            "iii": bool(p_n * slack >= self.c3 / n),
            "iv": bool(np.all(sums[1:] <= self.C2 / np.arange(1, n + 1) * slack)),
        }


def lemma8_constants(table: PmfTable, n: int, theta: float) -> Lemma8Constants:
    """Smallest constants satisfying the four conditions for ``table``.

    Args:
        table: p_j(k) for j = 1..n, k = 0..n // j at least
        n: Dimension
        theta: Exponent in (0, 1]

    Returns:
        Lemma8Constants with C = max{32/c2^2, C2/c3 + 4 C1/c2 + C1 C2/theta}

    Raises:
        ArgumentError: theta outside (0, 1] or table too short
        ConditionError: some p_j(0) = 0
    """
    if not 0 < theta <= 1:
        raise ArgumentError(f"theta must lie in (0, 1], got {theta}")
    if n < 1 or len(table) < n:
        raise ArgumentError(f"need pmfs for j = 1..{n}, got {len(table)}")
    c2 = float(min(p[0] for p in table[:n]))
    if c2 <= 0:
        raise ConditionError("some p_j(0) = 0; the lower bound on p_j(0) cannot hold")
    masses = level_masses(table, n)
    p_n = float(masses[n])
    if p_n <= 0:
        raise ConditionError(f"P(l(xi) = {n}) = 0")
    c3 = n * p_n
    m = np.arange(n)
    C1 = float(np.max(masses[:n] * ((m + 1.0) / n) ** (1.0 - theta) / p_n))
    sums = _divisor_sums(table, n)
    C2 = float(np.max(np.arange(1, n + 1) * sums[1:]))
    C = max(32.0 / c2 ** 2, C2 / c3 + 4.0 * C1 / c2 + C1 * C2 / theta)
    return Lemma8Constants(n=n, theta=theta, c2=c2, c3=c3, C1=C1, C2=C2, C=C)


class RuzsaReport(BaseModel):
    """LHS, RHS and the P(not U) bracket of one instance."""
    n: int
    theta: float
    lhs: float
    rhs: float
    rhs_theta_prime: float
    complement_lower: float
    complement_upper: float
    constants: Lemma8Constants
    passed: bool
    label: str = ""


def _level_weights(rates: RateSequence, n: int) -> List[Tuple[Counts, Union[Fraction, float]]]:
    """prod_j lambda_j^{s_j} / s_j! for every level-n vector."""
    if n > Config.RUZSA_MAX_N:
        raise CostGuardError(f"n={n} exceeds the verification limit {Config.RUZSA_MAX_N}")
    out = []
    for s in level_tuples(n):
        if rates.exact is not None:
            w = Fraction(1)
            for j, k in enumerate(s, start=1):
                if k:
                    w *= rates.exact[j - 1] ** k / math.factorial(k)
        else:
            w = math.prod(rates.values[j - 1] ** k / math.factorial(k) for j, k in enumerate(s, start=1) if k)
        out.append((s, w))
    return out


def _box(n: int, cap: Optional[int]) -> List[int]:
    caps = [n // j if cap is None else min(cap, n // j) for j in range(1, n + 1)]
    size = math.prod(c + 1 for c in caps)
    if size > _BOX_LIMIT:
        raise CostGuardError(f"support box of {size} points exceeds {_BOX_LIMIT}")
    return caps


def _complement_bracket(rates: RateSequence, n: int, U: Union[Iterable, Predicate],
                        support_cap: Optional[int]) -> Tuple[float, float, set]:
    """[lower, upper] for P(xi not in U) and the finite U used for V(U)."""
    lam = rates.values[:n]
    if callable(U):
        caps = _box(n, support_cap)
        pmfs = [poisson.pmf(np.arange(c + 1), lam[j]) for j, c in enumerate(caps)]
        box_mass = float(np.prod([p.sum() for p in pmfs]))
        inside, outside = set(), 0.0
        for t in itertools.product(*(range(c + 1) for c in caps)):
            mass = math.prod(pmfs[j][k] for j, k in enumerate(t))
            if U(t):
                inside.add(t)
            else:
                outside += mass
        lower = outside
        upper = min(1.0, lower + max(0.0, 1.0 - box_mass))
        return lower, upper, inside
    tuples = set()
    for u in U:
        t = tuple(u.s) if isinstance(u, ComponentVector) else tuple(int(x) for x in u)
        if len(t) != n:
            raise ArgumentError(f"elements of U must have dimension {n}, got {len(t)}")
        tuples.add(t)
    mass = sum(math.prod(poisson.pmf(k, lam[j]) for j, k in enumerate(t)) for t in tuples)
    value = max(0.0, 1.0 - float(mass))
    return value, value, tuples


def _rhs(const: Lemma8Constants, p_bar: float, n: int, theta: float, theta_exp: float) -> float:
    tail = const.C1 * const.C2 / theta * n ** (-theta_exp) if theta_exp < 1 else 0.0
    return const.C * p_bar ** theta + tail


def ruzsa_check(rates: RateSequence, n: int, U: Union[Iterable, Predicate], theta: float,
                support_cap: Optional[int] = None, label: str = "") -> RuzsaReport:
    """Compare P(not V(U) | l(xi) = n) with C P^theta(not U) + C1 C2 / theta n^{-theta} 1{theta < 1}.

    ``U`` is a finite collection of vectors in Z_+^n or a predicate on
    tuples. A predicate is materialised on the box t_j <= min(cap, n // j);
    the Poisson mass outside the box widens the bracket for P(not U) and the
    upper end is used. V(U) is built from the materialised U, which can
    only shrink V and so only raises the left side.

    Raises:
        CostGuardError: n above RUZSA_MAX_N or box too large
        ArgumentError: theta outside (0, 1] or mismatched dimensions
    """
    if not 0 < theta <= 1:
        raise ArgumentError(f"theta must lie in (0, 1], got {theta}")
    weights = _level_weights(rates, n)
    const = lemma8_constants(poisson_table(rates, n), n, theta)
    lower, upper, u_set = _complement_bracket(rates, n, U, support_cap)

    diffs = extension_differences(u_set) if u_set else np.zeros((0, n), dtype=np.int64)
    total = sum(w for _, w in weights)
    outside = sum((w for s, w in weights if not in_extension(s, u_set, diffs)), type(total)(0))
    lhs = float(outside / total) if total else 0.0

    rhs = _rhs(const, upper, n, theta, theta)
    theta_prime = float(np.min(np.arange(1, n + 1) * rates.values[:n]))
    rhs_prime = _rhs(const, upper, n, theta, theta_prime)
    passed = lhs <= rhs * (1.0 + _REL_TOL)
    if not passed:
        logger.error(f"Inequality failed for n={n}, theta={theta}: lhs={lhs:.6g} > rhs={rhs:.6g}")
    return RuzsaReport(n=n, theta=theta, lhs=lhs, rhs=rhs, rhs_theta_prime=rhs_prime,
                       complement_lower=lower, complement_upper=upper, constants=const,
                       passed=passed, label=label)


class AdditiveRuzsaReport(BaseModel):
    """mu_n(|h - a| >= u) against C P^theta(|H(xi) - a| >= u/3) + tail."""
    n: int
    theta: float
    a: float
    u: float
    lhs: float
    rhs: float
    complement_lower: float
    complement_upper: float
    passed: bool


def _value_distribution(h: AdditiveFunctionSpec, lam: np.ndarray, caps: Sequence[int]) -> Dict[float, float]:
    """Law of sum_j h_j(xi_j) restricted to xi_j <= caps[j]."""
    dist: Dict[float, float] = {0.0: 1.0}
    for j, (rate, cap) in enumerate(zip(lam, caps), start=1):
        pmf = poisson.pmf(np.arange(cap + 1), rate)
        step: Dict[float, float] = {}
        for v, pv in dist.items():
            for k in range(cap + 1):
                key = round(v + h.value(j, k), 12)
                step[key] = step.get(key, 0.0) + pv * pmf[k]
        dist = step
    return dist


def ruzsa_check_additive(rates: RateSequence, n: int, h: AdditiveFunctionSpec, a: float, u: float,
                         theta: float, support_cap: Optional[int] = None) -> AdditiveRuzsaReport:
    """Additive-function form of the inequality with A the open interval of radius u/3 about a.

    A + A - A is then the open interval of radius u about a.
    """
    if u < 0:
        raise ArgumentError(f"u must be nonnegative, got {u}")
    if not 0 < theta <= 1:
        raise ArgumentError(f"theta must lie in (0, 1], got {theta}")
    weights = _level_weights(rates, n)
    const = lemma8_constants(poisson_table(rates, n), n, theta)
    total = float(sum(w for _, w in weights))
    far = sum(float(w) for s, w in weights if abs(float(np.sum(h.values(s))) - a) >= u)
    lhs = far / total

    caps = _box(n, support_cap)
    dist = _value_distribution(h, rates.values[:n], caps)
    kept = sum(dist.values())
    lower = sum(p for v, p in dist.items() if abs(v - a) >= u / 3.0)
    upper = min(1.0, lower + max(0.0, 1.0 - kept))
    rhs = _rhs(const, upper, n, theta, theta)
    passed = lhs <= rhs * (1.0 + _REL_TOL)
    if not passed:
        logger.error(f"Additive inequality failed for n={n}, a={a}, u={u}: {lhs:.6g} > {rhs:.6g}")
    return AdditiveRuzsaReport(n=n, theta=theta, a=a, u=u, lhs=lhs, rhs=rhs,
                               complement_lower=lower, complement_upper=upper, passed=passed)


class RuzsaSuite(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    reports: List[RuzsaReport]

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [{"instance": i, "label": r.label, "n": r.n, "theta": r.theta, "lhs": r.lhs, "rhs": r.rhs,
              "rhs_theta_prime": r.rhs_theta_prime, "complement_lower": r.complement_lower,
              "complement_upper": r.complement_upper, "C": r.constants.C, "passed": r.passed}
             for i, r in enumerate(self.reports)],
        )


def _random_spec(rng: np.random.Generator, n: int, seed: int):
    choice = int(rng.integers(4))
    if choice == 0:
        return permutations()
    if choice == 1:
        return ewens(["1/2", 1, 2][int(rng.integers(3))])
    if choice == 2:
        return set_partitions()
    return random_weakly_logarithmic(n, "1/2", 2, seed=seed)


def random_ruzsa_suite(count: int = 200, seed: int = 0, max_n: int = 8) -> RuzsaSuite:
    """Randomised instances: preset, n <= max_n, U from Poisson and level-n draws, theta in (0, 1]."""
    if count < 1:
        raise ArgumentError(f"count must be positive, got {count}")
    reports = []
    for i in range(count):
        rng = replica_stream(seed, i)
        n = int(rng.integers(1, max_n + 1))
        spec = _random_spec(rng, n, seed * 7919 + i)
        rates = derive_rates(spec, n, Backend.EXACT)
        size = int(rng.integers(1, 6))
        U = set()
        for _ in range(size):
            U.add(tuple(int(x) for x in rng.poisson(rates.values[:n])))
        for k in range(int(rng.integers(0, 3))):
            U.add(sample_sequential(rates, n, seed=seed, replica=count * (i + 1) + k).s)
        theta = float(1.0 - rng.random())
        if rng.random() < 0.2:
            theta = 1.0
        reports.append(ruzsa_check(rates, n, U, theta, label=f"{spec.name}:n={n}"))
    suite = RuzsaSuite(reports=reports)
    failed = [r.label for r in reports if not r.passed]
    logger.info(f"Randomised suite: {count - len(failed)}/{count} passed")
    return suite
