"""Additive-function values, centering/scaling and the polygonal processes."""
import logging
import math
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from shared.exceptions import ArgumentError
from shared.models import AdditiveFunctionSpec, ComponentVector, PolygonalPath, RateSequence

logger = logging.getLogger(__name__)

Form = Literal["indicator", "raw"]


class CenteringStats(BaseModel):
    """A(m), B^2(m) and beta(m) = B sqrt(2 LL B); beta is None when LL B <= 0."""
    m: int
    A: float
    B2: float
    beta: Optional[float] = None


class Moments(BaseModel):
    """Cumulative A and B^2 for m = 0..n (index m)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    A: np.ndarray
    B2: np.ndarray
    a: np.ndarray

    @property
    def n(self) -> int:
        return len(self.A) - 1

    def beta(self, m: int) -> Optional[float]:
        return beta_of(self.B2[m])

    def beta_array(self) -> np.ndarray:
        """beta(m) for m = 0..n with NaN where undefined."""
        B = np.sqrt(self.B2)
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = np.log(np.log(B))
        out = np.full(len(B), np.nan)
        ok = np.isfinite(ll) & (ll > 0)
        out[ok] = B[ok] * np.sqrt(2.0 * ll[ok])
        return out


def beta_of(b2: float) -> Optional[float]:
    """B sqrt(2 log log B), or None when log log B is not positive."""
    if b2 <= 0:
        return None
    b = math.sqrt(b2)
    if b <= math.e:
        return None
    return b * math.sqrt(2.0 * math.log(math.log(b)))


def partial_value(h: AdditiveFunctionSpec, s: ComponentVector, m: int) -> float:
    """h(s, m) = sum_{j<=m} h_j(s_j)."""
    if not 0 <= m <= s.n:
        raise ArgumentError(f"m must lie in 0..{s.n}, got {m}")
    if m == 0:
        return 0.0
    return float(np.sum(h.values(s.s[:m])))


def cumulative_moments(h: AdditiveFunctionSpec, rates: RateSequence, n: Optional[int] = None) -> Moments:
    """A(m) = sum a_j (1 - e^{-lambda_j}), B^2(m) = sum a_j^2 e^{-lambda_j}(1 - e^{-lambda_j})."""
    n = rates.n if n is None else n
    if n > rates.n or n > h.n_max:
        raise ArgumentError(f"m up to {n} needs that many rates and a_j (have {rates.n}, {h.n_max})")
    lam = rates.values[:n]
    a = np.asarray(h.a[:n], dtype=np.float64)
    q = -np.expm1(-lam)  # 1 - e^{-lambda}
    A = np.concatenate([[0.0], np.cumsum(a * q)])
    B2 = np.concatenate([[0.0], np.cumsum(a * a * np.exp(-lam) * q)])
    return Moments(A=A, B2=B2, a=a)


def centering_scaling(h: AdditiveFunctionSpec, rates: RateSequence, m: int) -> CenteringStats:
    """Centering A(m), variance proxy B^2(m) and LIL normaliser beta(m)."""
    if not 0 <= m <= rates.n:
        raise ArgumentError(f"m must lie in 0..{rates.n}, got {m}")
    moments = cumulative_moments(h, rates, m)
    b2 = float(moments.B2[m])
    return CenteringStats(m=m, A=float(moments.A[m]), B2=b2, beta=beta_of(b2))


def increments(h: AdditiveFunctionSpec, counts: Sequence[int], form: Form = "indicator") -> np.ndarray:
    """Per-index terms of h(sigma, m): a_j 1{s_j >= 1} or h_j(s_j)."""
    if form == "indicator":
        return h.indicator_values(counts)
    if form == "raw":
        return h.values(counts)
    raise ArgumentError(f"unknown form '{form}'")


def process_from_increments(terms: np.ndarray, moments: Moments, m: int,
                            truncate_at: Optional[int] = None) -> PolygonalPath:
    """U_m for precomputed per-index terms (see build_process)."""
    beta = moments.beta(m)
    if beta is None:
        raise ArgumentError(f"beta({m}) is undefined (B^2={moments.B2[m]:.6g}); process refused")
    values = np.cumsum(terms[:m]) - moments.A[1:m + 1]
    t = moments.B2[1:m + 1] / moments.B2[m]
    if truncate_at is not None and truncate_at < m:
        nonzero = np.flatnonzero(moments.a[:truncate_at] != 0)
        if len(nonzero):
            q = int(nonzero[-1])  # 0-based index of max{j <= r : a_j != 0}
            values[q + 1:] = values[q]
    t = np.concatenate([[0.0], t])
    y = np.concatenate([[0.0], values]) / beta
    # collapse repeated breakpoints (a_j = 0), keeping the last value
    keep = np.concatenate([np.diff(t) > 0, [True]])
    keep[0] = True
    t, y = t[keep], y[keep]
    if len(t) > 1 and t[1] == 0.0:
        t, y = np.delete(t, 1), np.delete(y, 1)
    t[-1] = 1.0
    return PolygonalPath(t=t, y=y)


def build_process(h: AdditiveFunctionSpec, rates: RateSequence, s: ComponentVector, m: int,
                  form: Form = "indicator", truncate_at: Optional[int] = None) -> PolygonalPath:
    """Normalised polygonal process U_m(sigma, t) on [0, 1].

    Joins (0, 0) and (B^2(i)/B^2(m), (h(sigma, i) - A(i)) / beta(m)) for
    i = 1..m. With ``truncate_at=r`` the path is frozen after the last
    index q <= r with a_q != 0.

    Args:
        h: Additive function
        rates: Poisson rates
        s: Component vector of sigma
        m: Index, at most s.n
        form: "indicator" uses a_j 1{s_j >= 1}; "raw" uses h_j(s_j)
        truncate_at: Optional truncation index r

    Returns:
        PolygonalPath
    """
    if not 1 <= m <= s.n:
        raise ArgumentError(f"m must lie in 1..{s.n}, got {m}")
    moments = cumulative_moments(h, rates, m)
    return process_from_increments(increments(h, s.s[:m], form), moments, m, truncate_at)
