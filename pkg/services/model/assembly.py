"""Poisson rates, the weakly-logarithmic check and exact weighted counts."""
import logging
import math
from fractions import Fraction
from typing import Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel
from scipy.special import gammaln

from services.series.engine import exp_series, rate_polynomial
from services.verify.enumeration import enumerate_level
from shared.config import Config
from shared.exceptions import ArgumentError, BoundsError, LevelMismatchError
from shared.models import AssemblySpec, Backend, ComponentVector, ExactValue, RateSequence, as_fraction

logger = logging.getLogger(__name__)


class WeakLogVerdict(BaseModel):
    """Outcome of the weakly-logarithmic check."""
    passed: bool
    index: Optional[int] = None
    bound: Optional[Literal["lower", "upper"]] = None
    value: Optional[float] = None


def resolve_backend(requested: Union[str, Backend, None], n: int) -> Backend:
    """Exact for n <= EXACT_MAX_N unless a backend is requested explicitly."""
    if requested is None or requested == "auto":
        return Backend.EXACT if n <= Config.EXACT_MAX_N else Backend.FLOAT
    return Backend(requested)


def spec_hash(spec: AssemblySpec) -> str:
    """Short digest written into output headers."""
    return spec.fingerprint()


def derive_rates(spec: AssemblySpec, n: int, backend: Union[str, Backend, None] = None) -> RateSequence:
    """lambda_j = u^j m_j w_j / j! for 1 <= j <= n.

    Args:
        spec: Assembly family
        n: Number of rates
        backend: "exact", "float" or None for automatic choice

    Returns:
        RateSequence tagged with its backend
    """
    if n < 1:
        raise ArgumentError(f"n must be positive, got {n}")
    if n > spec.n_max:
        raise BoundsError(f"n={n} exceeds n_max={spec.n_max} of '{spec.name}'")
    backend = resolve_backend(backend, n)
    if backend == Backend.EXACT:
        rates = _exact_rates(spec, n)
        return RateSequence(backend=Backend.EXACT, values=[float(x) for x in rates],
                            exact=tuple(rates), source=spec.name)
    return RateSequence(backend=Backend.FLOAT, values=np.exp(log_rates(spec, n)), source=spec.name)


def _exact_rates(spec: AssemblySpec, n: int) -> list:
    u = spec.u
    if spec.preset in ("permutations", "ewens"):
        # m_j / j! = 1/j
        w = spec.w(1)
        return [w * u ** j / j for j in range(1, n + 1)]
    rates = []
    fact = 1
    power = Fraction(1)
    for j in range(1, n + 1):
        fact *= j
        power *= u
        rates.append(power * spec.m(j) * spec.w(j) / fact)
    return rates


def log_rates(spec: AssemblySpec, n: int) -> np.ndarray:
    """log lambda_j in doubles, without materialising (j-1)! for presets."""
    j = np.arange(1, n + 1, dtype=np.float64)
    log_u = math.log(spec.u)
    if spec.preset in ("permutations", "ewens"):
        return math.log(spec.w(1)) + j * log_u - np.log(j)
    if spec.preset == "set-partitions":
        return j * log_u - gammaln(j + 1)
    log_m = np.array([math.log(spec.m(k)) for k in range(1, n + 1)])
    log_w = np.array([math.log(spec.w(k).numerator) - math.log(spec.w(k).denominator)
                      for k in range(1, n + 1)])
    return log_m + log_w + j * log_u - gammaln(j + 1)


def check_weakly_logarithmic(rates: RateSequence, theta_lo: Any, theta_hi: Any,
                             rel_tol: float = 1e-12) -> WeakLogVerdict:
    """Check theta'/j <= lambda_j <= theta''/j for all j.

    Exact rates are compared exactly; float rates with relative tolerance
    ``rel_tol``.

    Returns:
        Verdict with the smallest violating index and the failed bound
    """
    lo, hi = as_fraction(theta_lo), as_fraction(theta_hi)
    if lo <= 0 or lo > hi:
        raise ArgumentError(f"need 0 < theta' <= theta'', got {lo}, {hi}")
    if rates.exact is not None:
        for j, lam in enumerate(rates.exact, 1):
            if j * lam < lo:
                return WeakLogVerdict(passed=False, index=j, bound="lower", value=float(lam))
            if j * lam > hi:
                return WeakLogVerdict(passed=False, index=j, bound="upper", value=float(lam))
        return WeakLogVerdict(passed=True)
    d = rates.values * np.arange(1, rates.n + 1)
    low = d < float(lo) * (1 - rel_tol)
    high = d > float(hi) * (1 + rel_tol)
    bad = np.flatnonzero(low | high)
    if len(bad) == 0:
        return WeakLogVerdict(passed=True)
    k = int(bad[0])
    return WeakLogVerdict(passed=False, index=k + 1, bound="lower" if low[k] else "upper",
                          value=float(rates.values[k]))


def structure_weight(spec: AssemblySpec, s: ComponentVector) -> Fraction:
    """Weighted number of assemblies on n = s.n points with component vector s.

    n! * prod_j (m_j/j!)^{s_j} / s_j! * prod_j w_j^{s_j}
    """
    n = s.n
    if s.level != n:
        raise LevelMismatchError(f"l(s)={s.level} but the vector has dimension {n}")
    if n > spec.n_max:
        raise BoundsError(f"n={n} exceeds n_max={spec.n_max}")
    value = Fraction(math.factorial(n))
    for j, count in enumerate(s.s, 1):
        if count:
            per = Fraction(spec.m(j), math.factorial(j)) * spec.w(j)
            value *= per ** count / math.factorial(count)
    return value


def total_count(spec: AssemblySpec, n: int, method: Literal["series", "enumerate"] = "series") -> ExactValue:
    """W_n, the weighted number of assemblies of size n.

    "series" uses n! [z^n] exp(sum_j lambda_j z^j) / u^n; "enumerate" sums
    structure_weight over all partitions of n. Both run in rationals and the
    result carries backend "exact".
    """
    if n < 0:
        raise ArgumentError(f"n must be nonnegative, got {n}")
    if n > spec.n_max:
        raise BoundsError(f"n={n} exceeds n_max={spec.n_max}")
    if n == 0:
        return ExactValue(1)
    if method == "enumerate":
        return ExactValue(sum((structure_weight(spec, s) for s in enumerate_level(n)), Fraction(0)))
    rates = derive_rates(spec, n, Backend.EXACT)
    D = exp_series(rate_polynomial(rates, 0, n, n), n)
    value = D.coeffs[n] * math.factorial(n) / spec.u ** n
    logger.info(f"W_{n} for '{spec.name}' = {value if value.denominator == 1 else float(value)}")
    return ExactValue(value)


def exact_law(spec: AssemblySpec, s: ComponentVector) -> ExactValue:
    """mu_n(k(sigma) = s) = structure_weight / W_n, in rationals."""
    weight = structure_weight(spec, s)
    return ExactValue(weight / total_count(spec, s.n))
