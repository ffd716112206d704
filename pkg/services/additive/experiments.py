"""Monte Carlo experiments around the functional LIL and the Feller classes.

The limit statements are asymptotic; these experiments report finite-n
diagnostics (distances to the Strassen ball, cluster fractions, exceedance
frequencies) whose trends across n are what the tests look at.
"""
import logging
import math
import re
from typing import Callable, Dict, List, Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from services.additive.functions import Form, Moments, cumulative_moments, increments, process_from_increments
from services.additive.strassen import strassen_distance
from services.model.assembly import derive_rates
from services.sampler.rng import replica_stream
from services.sampler.sampler import ComponentChainSampler
from shared.config import Config
from shared.exceptions import ArgumentError
from shared.models import AdditiveFunctionSpec, AssemblySpec, Backend, PolygonalPath, RateSequence
from shared.workers import parallel_map

logger = logging.getLogger(__name__)

Classification = Literal["converges", "diverges", "inconclusive"]

_LADDER = re.compile(r"^ladder:(\d+):([-+]?\d*\.?\d+(?:[eE][-+]?\d+)?)$")


def iterated_log(x: Union[float, np.ndarray], k: int) -> np.ndarray:
    """L_k x = log applied k times; NaN where undefined."""
    out = np.asarray(x, dtype=np.float64).copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(k):
            out = np.where(out > 0, np.log(np.where(out > 0, out, 1.0)), np.nan)
    return out


def gamma_ladder(B: Union[float, np.ndarray], s: int, eps: float) -> np.ndarray:
    """gamma_{sm}(eps) for the iterated-logarithm ladder.

    gamma^2/2 = L_2 B + (3/2) L_3 B + L_4 B + ... + L_{s-1} B + (1+eps) L_s B
    for s >= 4; gamma^2 = 2(1+eps) L_2 B for s = 2 and
    gamma^2/2 = L_2 B + (3/2)(1+eps) L_3 B for s = 3. NaN where undefined.
    """
    if s < 2:
        raise ArgumentError(f"ladder level must be at least 2, got {s}")
    B = np.asarray(B, dtype=np.float64)
    if s == 2:
        half = (1.0 + eps) * iterated_log(B, 2)
    elif s == 3:
        half = iterated_log(B, 2) + 1.5 * (1.0 + eps) * iterated_log(B, 3)
    else:
        half = iterated_log(B, 2) + 1.5 * iterated_log(B, 3)
        for k in range(4, s):
            half = half + iterated_log(B, k)
        half = half + (1.0 + eps) * iterated_log(B, s)
    with np.errstate(invalid="ignore"):
        gamma = np.where(half > 0, np.sqrt(2.0 * np.where(half > 0, half, 0.0)), np.nan)
    return gamma


def parse_ladder(text: str) -> tuple:
    """"ladder:s:x" -> (s, x)."""
    match = _LADDER.match(text.strip())
    if not match:
        raise ArgumentError(f"bad ladder '{text}'; expected ladder:<s>:<x>")
    return int(match.group(1)), float(match.group(2))


class LilSummary(BaseModel):
    """Per-replica results of a functional-LIL experiment."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    spec: str
    n: int
    n1: int
    m_grid: List[int]
    form: str
    max_distance: np.ndarray  # (replicas,)
    endpoints: np.ndarray  # (replicas, len(m_grid))
    midpoints: np.ndarray  # (replicas, len(m_grid))
    condition_max: Optional[float] = None
    delta: float = 0.1
    form_gap: Optional[float] = None

    @property
    def median_distance(self) -> float:
        return float(np.median(self.max_distance))

    @property
    def endpoint_outside(self) -> float:
        """Fraction of U_m(1) samples outside [-1-delta, 1+delta]."""
        return float(np.mean(np.abs(self.endpoints) > 1.0 + self.delta))

    @property
    def pair_outside(self) -> float:
        """Fraction of (U_m(1/2), U_m(1)) outside the disk u^2 + (v-u)^2 <= 1/2, enlarged by delta."""
        u, v = self.midpoints, self.endpoints
        radius = np.sqrt(u * u + (v - u) ** 2)
        return float(np.mean(radius > math.sqrt(0.5) + self.delta))

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for rep in range(len(self.max_distance)):
            for k, m in enumerate(self.m_grid):
                rows.append({
                    "replica": rep,
                    "m": m,
                    "u_half": float(self.midpoints[rep, k]),
                    "u_one": float(self.endpoints[rep, k]),
                    "max_distance": float(self.max_distance[rep]),
                })
        return pd.DataFrame(rows, columns=["replica", "m", "u_half", "u_one", "max_distance"])


def condition_spot_check(moments: Moments) -> Optional[float]:
    """max_j |a_j| sqrt(LL B(j)) / B(j) over j with LL B(j) > 0."""
    B = np.sqrt(moments.B2[1:])
    ll = iterated_log(B, 2)
    ok = np.isfinite(ll) & (ll > 0)
    if not np.any(ok):
        return None
    return float(np.max(np.abs(moments.a[ok]) * np.sqrt(ll[ok]) / B[ok]))


def m_grid_for(moments: Moments, n1: int, n: int, points: int) -> List[int]:
    """Log-spaced m in [n1, n] restricted to indices where beta is defined."""
    beta = moments.beta_array()
    grid = np.unique(np.round(np.geomspace(max(n1, 1), n, points)).astype(np.int64))
    grid = [int(m) for m in grid if np.isfinite(beta[m])]
    if n not in grid and np.isfinite(beta[n]):
        grid.append(n)
    return sorted(set(grid))


def lil_experiment(spec: AssemblySpec, h: AdditiveFunctionSpec, n: int, n1: Optional[int] = None,
                   replicas: int = 100, seed: int = 0, m_points: int = 16, form: Form = "indicator",
                   simplify_tol: float = 1e-3, tol: float = 1e-4, delta: float = 0.1,
                   threads: Optional[int] = None) -> LilSummary:
    """Distances of U_m to the Strassen ball and cluster diagnostics.

    Args:
        spec: Assembly family
        h: Additive function (a_j for j <= n needed)
        n: Assembly size
        n1: Smallest m considered (default n // 10)
        replicas: Independent draws of sigma
        seed: Master seed; replica r uses stream (seed, r)
        m_points: Size of the log-spaced m grid
        form: "indicator" or "raw" increments
        simplify_tol: Breakpoint simplification tolerance before distances
        tol: Bisection tolerance of the distance
        delta: Enlargement used by the cluster fractions
        threads: Worker count

    Returns:
        LilSummary with per-replica maxima and endpoint/pair samples
    """
    if replicas < 1:
        raise ArgumentError(f"replicas must be at least 1, got {replicas}")
    n1 = max(1, n // 10) if n1 is None else n1
    if not 1 <= n1 <= n:
        raise ArgumentError(f"need 1 <= n1 <= n, got n1={n1}, n={n}")
    rates = derive_rates(spec, n, Backend.FLOAT)
    moments = cumulative_moments(h, rates, n)
    grid = m_grid_for(moments, n1, n, m_points)
    if not grid:
        raise ArgumentError(f"beta(m) is undefined for every m in [{n1}, {n}]; B(n)^2={moments.B2[n]:.4g}")
    check = condition_spot_check(moments)
    logger.info(f"LIL experiment n={n}, m-grid {grid[0]}..{grid[-1]} ({len(grid)} points), condition max={check}")
    chain = ComponentChainSampler(rates, n)
    grid_idx = np.array(grid) - 1
    grid_beta = moments.beta_array()[grid]

    def one(replica: int):
        counts = chain.sample_counts(replica_stream(seed, replica))
        terms = increments(h, counts, form)
        best = 0.0
        ends, mids = [], []
        gap = 0.0
        for m in grid:
            path = process_from_increments(terms, moments, m)
            best = max(best, strassen_distance(path, tol=tol, simplify=simplify_tol))
            ends.append(path.evaluate(1.0))
            mids.append(path.evaluate(0.5))
        if form == "indicator":
            # distance between the raw and indicator processes at the grid ends
            diff = np.cumsum(increments(h, counts, "raw") - terms)[grid_idx]
            gap = float(np.max(np.abs(diff) / grid_beta))
        return best, ends, mids, gap

    results = parallel_map(one, range(replicas), threads)
    summary = LilSummary(
        spec=spec.name, n=n, n1=n1, m_grid=grid, form=form,
        max_distance=np.array([r[0] for r in results]),
        endpoints=np.array([r[1] for r in results]),
        midpoints=np.array([r[2] for r in results]),
        condition_max=check, delta=delta,
        form_gap=max(r[3] for r in results),
    )
    logger.info(
        f"LIL n={n}: median max-distance {summary.median_distance:.4f}, "
        f"endpoint outside {summary.endpoint_outside:.3f}, pair outside {summary.pair_outside:.3f}"
    )
    return summary


class LilTrend(BaseModel):
    n: List[int]
    median_distance: List[float]
    endpoint_outside: List[float]
    pair_outside: List[float]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.model_dump())


def lil_trend(spec: AssemblySpec, h: Union[AdditiveFunctionSpec, Callable[[int], AdditiveFunctionSpec]],
              n_list: Sequence[int], replicas: int = 100, seed: int = 0, **kwargs) -> LilTrend:
    """lil_experiment across several n with the same seed.

    ``h`` is either one spec covering max(n_list) or a builder called with n.
    """
    build = h if callable(h) and not isinstance(h, AdditiveFunctionSpec) else (lambda _n: h)
    summaries = [lil_experiment(spec, build(n), n, replicas=replicas, seed=seed, **kwargs) for n in n_list]
    return LilTrend(
        n=list(n_list),
        median_distance=[s.median_distance for s in summaries],
        endpoint_outside=[s.endpoint_outside for s in summaries],
        pair_outside=[s.pair_outside for s in summaries],
    )


class FellerReport(BaseModel):
    """Terms of the Feller series with its classification."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    j: np.ndarray
    phi: np.ndarray
    terms: np.ndarray
    partial_sums: np.ndarray
    classification: Classification
    refused: bool = False
    condition_max: Optional[float] = None
    comparison_spread: Optional[float] = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"j": self.j, "phi": self.phi, "term": self.terms, "partial_sum": self.partial_sums})


def comparison_ratios(terms: np.ndarray, phi: np.ndarray, B2: np.ndarray) -> np.ndarray:
    """Terms divided by phi e^{-phi^2/2} dB^2/B^2, the element of the comparison integral.

    Entries where phi is undefined or B^2 does not move are NaN.
    """
    dB2 = np.diff(np.concatenate([[0.0], B2]))
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        element = phi * np.exp(-phi ** 2 / 2.0) * dB2 / B2
        ratios = np.where(np.isfinite(element) & (element > 0) & (terms > 0), terms / element, np.nan)
    return ratios


def feller_terms(h: AdditiveFunctionSpec, rates: RateSequence, phi: Union[str, Sequence[float]],
                 J: int, max_spread: float = Config.FELLER_MAX_SPREAD) -> FellerReport:
    """First J terms a_j^2 phi_j e^{-phi_j^2/2} / (j B^2(j)) of the Feller series.

    ``phi`` is either "ladder:s:x", meaning phi_j = gamma_{sj}(x), or an
    explicit increasing positive sequence. Terms where phi is undefined
    are 0.

    Ladder families are classified by integral comparison. The sum behaves
    like the integral of phi e^{-phi^2/2} over log B^2, which reduces to
    the integral of (L_s B)^{-(1+x)} d L_s B and converges iff x > 0. The
    comparison needs the ratio of each term to its integral element to stay
    bounded; over the last nine tenths of the defined terms the max/min
    ratio must not exceed ``max_spread``, else the result is inconclusive.
    With no defined terms the ladder exponent alone decides. Explicit
    sequences are reported as inconclusive.

    Raises:
        ArgumentError: J < 10 or fewer than J rates / a_j
    """
    if J < 10:
        raise ArgumentError(f"J must be at least 10, got {J}")
    moments = cumulative_moments(h, rates, J)
    B2 = moments.B2[1:]
    B = np.sqrt(B2)
    a = moments.a
    ladder = None
    if isinstance(phi, str):
        ladder = parse_ladder(phi)
        phi_arr = gamma_ladder(B, *ladder)
    else:
        phi_arr = np.asarray(phi, dtype=np.float64)[:J]
        if len(phi_arr) < J:
            raise ArgumentError(f"need {J} values of phi, got {len(phi_arr)}")
    j = np.arange(1, J + 1)
    defined = np.isfinite(phi_arr) & (phi_arr > 0) & (B2 > 0)
    terms = np.zeros(J)
    terms[defined] = (a[defined] ** 2 * phi_arr[defined] * np.exp(-phi_arr[defined] ** 2 / 2.0)
                      / (j[defined] * B2[defined]))
    partial = np.cumsum(terms)

    refused = False
    phi_def = phi_arr[defined]
    if len(phi_def) > 1 and np.any(np.diff(phi_def) < 0):
        refused = True
        logger.warning("phi is not increasing; classification refused")

    spread = None
    ratios = comparison_ratios(terms, phi_arr, B2)
    tail = ratios[J // 10:]
    tail = tail[np.isfinite(tail)]
    if len(tail):
        spread = float(tail.max() / tail.min())

    if not np.any(a != 0):
        classification: Classification = "converges"
    elif refused or ladder is None:
        classification = "inconclusive"
    elif spread is not None and spread > max_spread:
        logger.warning(f"terms/comparison ratio spreads by {spread:.3g} > {max_spread:g}; classification inconclusive")
        classification = "inconclusive"
    else:
        if spread is None:
            logger.warning(f"no defined terms up to J={J}; ladder exponent alone decides")
        classification = "converges" if ladder[1] > 0 else "diverges"
    cond = None
    if np.any(defined):
        cond = float(np.max(np.abs(a[defined]) * phi_arr[defined] ** 3 / B[defined]))
    return FellerReport(j=j, phi=np.nan_to_num(phi_arr, nan=0.0), terms=terms, partial_sums=partial,
                        classification=classification, refused=refused, condition_max=cond,
                        comparison_spread=spread)


class ExceedanceEstimate(BaseModel):
    """Empirical P(max_{n1<=m<=n} |h(sigma, m) - A(m)| / psi_m >= 1)."""
    n: int
    n1: int
    replicas: int
    estimate: float
    stderr: float
    hits: int


def psi_from_ladder(B: np.ndarray, s: int, eps: float) -> np.ndarray:
    """psi_m = B(m) gamma_{sm}(eps), +inf where the ladder is undefined."""
    values = np.asarray(B, dtype=np.float64) * gamma_ladder(B, s, eps)
    return np.where(np.isfinite(values), values, np.inf)


PsiSpec = Union[str, Sequence[float], Callable[[np.ndarray], np.ndarray]]


def resolve_psi(psi: PsiSpec, moments: Moments, n: int) -> np.ndarray:
    """psi_m for m = 1..n; "ladder:s:x" means B(m) gamma_{sm}(x). Undefined entries are +inf."""
    B = np.sqrt(moments.B2[1:n + 1])
    if isinstance(psi, str):
        s, x = parse_ladder(psi)
        values = psi_from_ladder(B, s, x)
    elif callable(psi):
        values = np.asarray(psi(B), dtype=np.float64)
    else:
        values = np.asarray(psi, dtype=np.float64)[:n]
        if len(values) < n:
            raise ArgumentError(f"need psi_m for m <= {n}, got {len(values)}")
    values = np.where(np.isfinite(values), values, np.inf)
    if np.any(values <= 0):
        raise ArgumentError("psi_m must be positive")
    return values


def exceedance_scan(spec: AssemblySpec, h: AdditiveFunctionSpec, psi: PsiSpec, n: int,
                    n1: Optional[int] = None, replicas: int = 100, seed: int = 0,
                    form: Form = "indicator", threads: Optional[int] = None) -> ExceedanceEstimate:
    """Estimate how often the centred partial sums cross psi on [n1, n].

    Args:
        spec: Assembly family
        h: Additive function
        psi: Threshold sequence (array, callable of B, or "ladder:s:x")
        n: Assembly size
        n1: First index (default n // 10)
        replicas: Number of draws
        seed: Master seed
        form: "indicator" or "raw" partial sums
        threads: Worker count

    Returns:
        Estimate with its binomial standard error
    """
    if replicas < 1:
        raise ArgumentError(f"replicas must be at least 1, got {replicas}")
    n1 = max(1, n // 10) if n1 is None else n1
    rates = derive_rates(spec, n, Backend.FLOAT)
    moments = cumulative_moments(h, rates, n)
    psi_arr = resolve_psi(psi, moments, n)[n1 - 1:n]
    A = moments.A[n1:n + 1]
    chain = ComponentChainSampler(rates, n)

    def one(replica: int) -> bool:
        counts = chain.sample_counts(replica_stream(seed, replica))
        partial = np.cumsum(increments(h, counts, form))[n1 - 1:n]
        return bool(np.any(np.abs(partial - A) >= psi_arr))

    hits = sum(parallel_map(one, range(replicas), threads))
    p = hits / replicas
    stderr = math.sqrt(p * (1.0 - p) / replicas)
    logger.info(f"Exceedance n={n}: {hits}/{replicas} = {p:.4f} +/- {stderr:.4f}")
    return ExceedanceEstimate(n=n, n1=n1, replicas=replicas, estimate=p, stderr=stderr, hits=hits)


def extremal_functions() -> Dict[str, PolygonalPath]:
    """g1 and g2, the limit paths singled out by the functional LIL."""
    r2 = math.sqrt(2.0)
    return {
        "g1": PolygonalPath(t=[0.0, 0.5, 1.0], y=[0.0, r2 / 2.0, r2 / 2.0]),
        "g2": PolygonalPath(t=[0.0, 0.5, 1.0], y=[0.0, 0.5, 0.0]),
    }


def sample_paths(spec: AssemblySpec, h: AdditiveFunctionSpec, n: int, count: int = 5, seed: int = 0,
                 form: Form = "indicator") -> List[PolygonalPath]:
    """U_n for the first ``count`` replicas of a seed, for plotting."""
    rates = derive_rates(spec, n, Backend.FLOAT)
    moments = cumulative_moments(h, rates, n)
    chain = ComponentChainSampler(rates, n)
    paths = []
    for replica in range(count):
        counts = chain.sample_counts(replica_stream(seed, replica))
        paths.append(process_from_increments(increments(h, counts, form), moments, n))
    return paths
