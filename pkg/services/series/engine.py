"""Exponential power-series coefficient engine.

Every probability of a weighted sum of independent Poisson variables is a
Taylor coefficient of exp(polynomial) times an explicit prefactor; this
module computes those coefficients exactly (rationals) or in doubles.
"""
import logging
import math
from fractions import Fraction
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from shared.config import Config
from shared.exceptions import ArgumentError
from shared.models import Backend, PowerSeries, RateSequence, as_fraction

logger = logging.getLogger(__name__)

_MAX_RESCALES = 12


def exp_series(g: PowerSeries, N: Optional[int] = None) -> PowerSeries:
    """Coefficients of exp(g(z)) up to degree N.

    Uses the derivative recurrence n*D_n = sum_{j<=n} j*g_j*D_{n-j}.

    Args:
        g: Series with zero constant term
        N: Degree bound (defaults to g's degree)

    Returns:
        PowerSeries D with D_0 = 1 in the same backend as g
    """
    N = g.degree if N is None else N
    if N < 0:
        raise ArgumentError(f"degree must be nonnegative, got {N}")
    if g.coeffs[0] != 0:
        raise ArgumentError("exp_series needs a zero constant term; pass the prefactor separately")
    if g.backend == Backend.EXACT:
        return _exp_exact(g.coeffs, N)
    return _exp_float(g.as_floats(), N)


def _exp_exact(g: Sequence[Fraction], N: int) -> PowerSeries:
    jg = [Fraction(0)] + [j * g[j] if j < len(g) else Fraction(0) for j in range(1, N + 1)]
    support = [j for j in range(1, N + 1) if jg[j] != 0]
    D: List[Fraction] = [Fraction(1)]
    for n in range(1, N + 1):
        acc = Fraction(0)
        for j in support:
            if j > n:
                break
            acc += jg[j] * D[n - j]
        D.append(acc / n)
    return PowerSeries(backend=Backend.EXACT, coeffs=tuple(D))


def _exp_float_once(jg: np.ndarray, N: int) -> np.ndarray:
    D = np.zeros(N + 1)
    D[0] = 1.0
    for n in range(1, N + 1):
        # sum_j jg[j] * D[n-j] for j = 1..n
        D[n] = np.dot(jg[1:n + 1], D[n - 1::-1]) / n
    return D


def _exp_float(g: np.ndarray, N: int) -> PowerSeries:
    g = np.concatenate([g[: N + 1], np.zeros(max(0, N + 1 - len(g)))])
    j = np.arange(N + 1, dtype=np.float64)
    log_rho = 0.0
    for attempt in range(_MAX_RESCALES):
        with np.errstate(over="ignore"):
            jg = j * g * np.exp(j * log_rho)
        with np.errstate(over="ignore", invalid="ignore"):
            D = _exp_float_once(jg, N)
        bad = _first_out_of_range(D)
        if bad is None:
            if attempt:
                logger.info(f"exp_series rescaled z -> rho*z with log(rho)={log_rho:.6g}")
            return PowerSeries.float_from(D, log_rho=log_rho)
        # geometric growth rate of the last good stretch
        good = D[1:bad]
        good = good[good > 0]
        if len(good) == 0:
            step = -1.0 if not np.isfinite(D[bad]) or D[bad] > 1 else 1.0
        else:
            k = np.flatnonzero(D[1:bad] > 0)[-1] + 1
            step = -math.log(D[k]) / k
            if abs(step) < 1e-3:
                step = math.copysign(1e-3, step)
        log_rho += step * (1.0 + 0.25 * attempt)
    logger.warning(f"exp_series could not keep coefficients in range after {_MAX_RESCALES} rescales")
    return PowerSeries.float_from(D, log_rho=log_rho)


def _first_out_of_range(D: np.ndarray) -> Optional[int]:
    bad = ~np.isfinite(D) | (D > Config.FLOAT_RESCALE_HIGH) | ((D > 0) & (D < Config.FLOAT_RESCALE_LOW))
    idx = np.flatnonzero(bad)
    return int(idx[0]) if len(idx) else None


def cauchy_product(f: PowerSeries, g: PowerSeries, N: Optional[int] = None) -> PowerSeries:
    """Product of two series truncated at degree N."""
    if f.backend != g.backend:
        raise ArgumentError("cannot multiply series from different backends")
    N = min(f.degree, g.degree) if N is None else N
    if f.backend == Backend.EXACT:
        out = []
        for n in range(N + 1):
            acc = Fraction(0)
            for k in range(max(0, n - g.degree), min(n, f.degree) + 1):
                acc += f.coeffs[k] * g.coeffs[n - k]
            out.append(acc)
        return PowerSeries(backend=Backend.EXACT, coeffs=tuple(out))
    prod = np.convolve(f.as_floats(), g.as_floats())[: N + 1]
    if len(prod) < N + 1:
        prod = np.concatenate([prod, np.zeros(N + 1 - len(prod))])
    return PowerSeries.float_from(prod)


def rate_polynomial(rates: RateSequence, a: int, b: int, N: int,
                    backend: Optional[Backend] = None) -> PowerSeries:
    """sum_{a<j<=b} lambda_j z^j truncated at degree N."""
    backend = rates.backend if backend is None else backend
    hi = min(b, N)
    if backend == Backend.EXACT:
        if rates.exact is None:
            raise ArgumentError("exact backend requested for float rates")
        coeffs = [Fraction(0)] * (N + 1)
        for j in range(a + 1, hi + 1):
            coeffs[j] = rates.exact[j - 1]
        return PowerSeries(backend=Backend.EXACT, coeffs=tuple(coeffs))
    coeffs = np.zeros(N + 1)
    if hi > a:
        coeffs[a + 1:hi + 1] = rates.values[a:hi]
    return PowerSeries.float_from(coeffs)


def rate_sum(rates: RateSequence, a: int, b: int, backend: Optional[Backend] = None) -> Union[Fraction, float]:
    """sum_{a<j<=b} lambda_j."""
    backend = rates.backend if backend is None else backend
    if backend == Backend.EXACT:
        return sum(rates.exact[a:b], Fraction(0))
    return float(math.fsum(rates.values[a:b]))


class EllPmf(BaseModel):
    """Law of sum_{a<j<=b} j*xi_j on 0..m_max.

    P(m) = exp(log_prefactor) * series[m]; the prefactor is exp(-sum lambda_j)
    and is irrational even when the coefficients are exact.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    a: int
    b: int
    log_prefactor: float
    series: PowerSeries

    @property
    def backend(self) -> Backend:
        return self.series.backend

    def probability(self, m: int) -> float:
        if m < 0 or m > self.series.degree:
            return 0.0
        return float(math.exp(self.log_prefactor + self.series.log_coeff(m)))

    def probabilities(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            logs = np.array([self.series.log_coeff(m) for m in range(self.series.degree + 1)])
        return np.exp(self.log_prefactor + logs)


def ell_pmf(rates: RateSequence, a: int, b: int, m_max: int,
            backend: Optional[Backend] = None) -> EllPmf:
    """Distribution of l_{ab}(xi) = sum_{a<j<=b} j*xi_j for m = 0..m_max.

    Args:
        rates: Poisson rates
        a: Lower end of the index range (exclusive)
        b: Upper end of the index range (inclusive)
        m_max: Largest value of interest
        backend: Overrides the rates' backend (exact needs exact rates)

    Returns:
        EllPmf with the prefactor and the coefficient series
    """
    if not 0 <= a <= b <= rates.n:
        raise ArgumentError(f"need 0 <= a <= b <= {rates.n}, got ({a}, {b}]")
    if m_max < 0:
        raise ArgumentError(f"m_max must be nonnegative, got {m_max}")
    poly = rate_polynomial(rates, a, b, m_max, backend)
    total = rate_sum(rates, a, b, poly.backend)
    series = exp_series(poly, m_max)
    return EllPmf(a=a, b=b, log_prefactor=-float(total), series=series)


def lemma2_band(rates: Optional[RateSequence] = None, n_list: Sequence[int] = (),
                d: Optional[Sequence[float]] = None) -> np.ndarray:
    """Ratios n*D_n / D(1) for D(z) = exp(sum_{j<=n} d_j/j z^j).

    Either rates (d_j = j*lambda_j) or a raw d sequence may be given.

    Returns:
        Array of ratios aligned with n_list
    """
    if (rates is None) == (d is None):
        raise ArgumentError("give exactly one of rates or d")
    if d is not None:
        d_arr = np.asarray(d, dtype=np.float64)
        lam = d_arr / np.arange(1, len(d_arr) + 1)
    else:
        lam = np.asarray(rates.values, dtype=np.float64)
    n_list = [int(n) for n in n_list]
    if not n_list:
        return np.zeros(0)
    N = max(n_list)
    if N > len(lam) or min(n_list) < 1:
        raise ArgumentError(f"n values must lie in 1..{len(lam)}")
    g = np.concatenate([[0.0], lam[:N]])
    D = _exp_float(g, N)
    # D(1) for the series truncated at n is exp(sum_{j<=n} lambda_j)
    csum = np.cumsum(lam[:N])
    ratios = np.array([
        math.exp(math.log(n) + D.log_coeff(n) - csum[n - 1]) for n in n_list
    ])
    logger.info(f"Lemma-2 ratios over {len(n_list)} sizes: min={ratios.min():.6g}, max={ratios.max():.6g}")
    return ratios


def as_series(coeffs: Sequence, backend: Backend = Backend.EXACT) -> PowerSeries:
    """Build a PowerSeries from plain coefficients."""
    if backend == Backend.EXACT:
        return PowerSeries.exact_from([as_fraction(c) for c in coeffs])
    return PowerSeries.float_from(coeffs)
