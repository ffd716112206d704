"""Ratio of truncated to full generating-function coefficients.

D(z) = exp(sum_{j<=n} d_j z^j / j) and F(z) the same series with the first
r entries of d zeroed. The quantity of interest is F_m / (e_r D_n) - 1 with
e_r = exp(-sum_{j<=r} d_j / j), over the regime 0 <= r <= delta*n and
n(1 - eta) <= m <= n.
"""
import logging
import math
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Any, Optional, Sequence, Union

from pydantic import BaseModel

from services.dist.scan import fundamental_lemma_exponents
from services.model.assembly import resolve_backend
from services.series.engine import exp_series
from shared.exceptions import ArgumentError, RegimeError
from shared.models import Backend, PowerSeries, as_fraction

logger = logging.getLogger(__name__)

_DIGITS = 80


class PropositionCheck(BaseModel):
    n: int
    r: int
    m: int
    eta: float
    delta: float
    ratio: float
    bound: float
    c: float
    backend: Backend


def _check_regime(n: int, r: int, m: int, eta: float, delta: float) -> None:
    if not 0 <= eta <= 0.5:
        raise RegimeError(f"eta must lie in [0, 1/2], got {eta}")
    if not 1.0 / n <= delta <= 0.5:
        raise RegimeError(f"delta must lie in [1/n, 1/2], got {delta}")
    if not 0 <= r <= delta * n:
        raise RegimeError(f"need 0 <= r <= delta*n = {delta * n:g}, got r={r}")
    if not n * (1.0 - eta) <= m <= n:
        raise RegimeError(f"need n(1-eta) = {n * (1.0 - eta):g} <= m <= n, got m={m}")


def _to_decimal(q: Fraction) -> Decimal:
    return Decimal(q.numerator) / Decimal(q.denominator)


def _exact_ratio(d: Sequence[Fraction], n: int, r: int, m: int) -> float:
    g_d = [Fraction(0)] + [d[j - 1] / j for j in range(1, n + 1)]
    g_f = [Fraction(0)] + [d[j - 1] / j if j > r else Fraction(0) for j in range(1, n + 1)]
    D = exp_series(PowerSeries.exact_from(g_d), n)
    F = exp_series(PowerSeries.exact_from(g_f), n)
    head = sum(g_d[1:r + 1], Fraction(0))
    with localcontext() as ctx:
        ctx.prec = _DIGITS
        ratio = _to_decimal(F.coeffs[m] / D.coeffs[n]) * _to_decimal(head).exp() - 1
        return float(ratio)


def _float_ratio(d: Sequence[float], n: int, r: int, m: int) -> float:
    g_d = [0.0] + [float(d[j - 1]) / j for j in range(1, n + 1)]
    g_f = [0.0] + [float(d[j - 1]) / j if j > r else 0.0 for j in range(1, n + 1)]
    D = exp_series(PowerSeries.float_from(g_d), n)
    F = exp_series(PowerSeries.float_from(g_f), n)
    log_ratio = F.log_coeff(m) - D.log_coeff(n) + math.fsum(g_d[1:r + 1])
    return math.expm1(log_ratio)


def proposition1_check(d: Sequence[Any], n: int, r: int, m: int, eta: float, delta: float,
                       backend: Union[str, Backend, None] = None) -> PropositionCheck:
    """Evaluate F_m / (e_r D_n) - 1 and the bound shape (eta + (r/n) 1{r>=1}) / delta + delta^c.

    Args:
        d: Positive sequence d_1..d_n (rationals for the exact backend)
        n: Series degree
        r: Number of leading entries zeroed in F
        m: Coefficient index of F
        eta: Regime parameter in [0, 1/2]
        delta: Regime parameter in [1/n, 1/2]
        backend: "exact", "float" or None (exact up to EXACT_MAX_N)

    Returns:
        PropositionCheck with the ratio, the bound value and c = c(min d_j)

    Raises:
        RegimeError: (r, m, eta, delta) outside the regime
        ArgumentError: d too short or not positive
    """
    if n < 1:
        raise ArgumentError(f"n must be positive, got {n}")
    if len(d) < n:
        raise ArgumentError(f"need d_1..d_{n}, got {len(d)} values")
    _check_regime(n, r, m, eta, delta)
    backend = resolve_backend(backend, n)
    if backend == Backend.EXACT:
        d_exact = [as_fraction(x) for x in d[:n]]
        if min(d_exact) <= 0:
            raise ArgumentError("d_j must be positive")
        ratio = _exact_ratio(d_exact, n, r, m)
        d_lo = float(min(d_exact))
    else:
        d_float = [float(x) for x in d[:n]]
        if min(d_float) <= 0:
            raise ArgumentError("d_j must be positive")
        ratio = _float_ratio(d_float, n, r, m)
        d_lo = min(d_float)
    c = fundamental_lemma_exponents(d_lo).c
    bound = (eta + (r / n if r >= 1 else 0.0)) / delta + delta ** c
    logger.info(f"Ratio at n={n}, r={r}, m={m}: {ratio:.6g} (bound shape {bound:.6g}, c={c:.6g})")
    return PropositionCheck(n=n, r=r, m=m, eta=eta, delta=delta, ratio=ratio, bound=bound, c=c,
                            backend=backend)


def proposition1_grid(d: Sequence[Any], n: int, r_values: Sequence[int], eta_values: Sequence[float],
                      delta: float, backend: Optional[Backend] = None) -> list:
    """proposition1_check at m = ceil(n(1 - eta)) over an (r, eta) grid."""
    out = []
    for eta in eta_values:
        m = min(n, math.ceil(n * (1.0 - eta)))
        for r in r_values:
            out.append(proposition1_check(d, n, r, m, eta, delta, backend))
    return out
