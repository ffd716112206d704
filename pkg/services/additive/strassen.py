"""Sup-norm distance from a polygonal path to the Strassen ball.

K = {g absolutely continuous, g(0) = 0, int_0^1 g'^2 <= 1}. For a tube
[f - eps, f + eps] around a piecewise-linear f, the least-energy member is
piecewise linear on f's breakpoints, and the taut string through the gates
minimises every convex energy at once. The free right end is handled by
reflecting the tube about t = 1 and pinning both ends at 0; the reflected
optimum is symmetric and carries twice the energy.
"""
import logging
from collections import deque
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from shared.config import Config
from shared.exceptions import ArgumentError
from shared.models import PolygonalPath

logger = logging.getLogger(__name__)

Point = Tuple[float, float]
_FEASIBLE_SLACK = 1e-9


def _slope(p: Point, q: Point) -> float:
    return (q[1] - p[1]) / (q[0] - p[0])


def taut_string(t: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> List[Point]:
    """Shortest path from (t_0, lo_0) to (t_k, lo_k) through the gates [lo_i, hi_i].

    Both end gates must be points. Funnel algorithm: the upper chain is
    kept convex and the lower chain concave; when a new gate point crosses
    the opposite chain the apex advances along it.

    Returns:
        Vertices of the string, first and last included
    """
    k = len(t) - 1
    if lo[0] != hi[0] or lo[k] != hi[k]:
        raise ArgumentError("taut string needs pinned end gates")
    apex: Point = (float(t[0]), float(lo[0]))
    path: List[Point] = [apex]
    upper = deque([apex])
    lower = deque([apex])
    for i in range(1, k + 1):
        p_hi: Point = (float(t[i]), float(hi[i]))
        p_lo: Point = (float(t[i]), float(lo[i]))

        while len(upper) >= 2 and _slope(upper[-2], p_hi) <= _slope(upper[-2], upper[-1]):
            upper.pop()
        if len(upper) == 1:
            while len(lower) >= 2 and _slope(lower[0], p_hi) <= _slope(lower[0], lower[1]):
                lower.popleft()
                apex = lower[0]
                path.append(apex)
            upper = deque([apex])
        if apex[0] < p_hi[0]:
            upper.append(p_hi)

        while len(lower) >= 2 and _slope(lower[-2], p_lo) >= _slope(lower[-2], lower[-1]):
            lower.pop()
        if len(lower) == 1:
            while len(upper) >= 2 and _slope(upper[0], p_lo) >= _slope(upper[0], upper[1]):
                upper.popleft()
                apex = upper[0]
                path.append(apex)
            lower = deque([apex])
        # the apex may have reached this gate through its upper point
        if apex[0] < p_lo[0]:
            lower.append(p_lo)

    end: Point = (float(t[k]), float(lo[k]))
    if path[-1] != end:
        chain = upper if len(upper) >= len(lower) and upper[-1] == end else lower
        path.extend(list(chain)[1:])
    return _dedupe(path)


def _dedupe(path: List[Point]) -> List[Point]:
    out = [path[0]]
    for p in path[1:]:
        if p[0] > out[-1][0]:
            out.append(p)
    return out


def _energy(path: List[Point]) -> float:
    pts = np.asarray(path)
    dt = np.diff(pts[:, 0])
    dy = np.diff(pts[:, 1])
    return float(np.sum(dy * dy / dt))


def min_energy(f: PolygonalPath, eps: float) -> float:
    """Least energy of g with g(0) = 0 and |g - f| <= eps on [0, 1]."""
    t, y = f.t, f.y
    # reflect about t = 1 and pin the far end at 0
    tm = np.concatenate([t, 2.0 - t[-2::-1]])
    ym = np.concatenate([y, y[-2::-1]])
    lo = ym - eps
    hi = ym + eps
    lo[0] = hi[0] = 0.0
    lo[-1] = hi[-1] = 0.0
    path = taut_string(tm, lo, hi)
    g = np.interp(tm, [p[0] for p in path], [p[1] for p in path])
    if np.any(g < lo - 1e-7) or np.any(g > hi + 1e-7):
        logger.warning("taut string left the tube; using the quadratic-programming oracle")
        return min_energy_qp(t, y, eps)
    return _energy(path) / 2.0


def min_energy_qp(t: np.ndarray, y: np.ndarray, eps: float) -> float:
    """Least energy over node values by bounded quasi-Newton minimisation.

    The grid is the breakpoint set itself; g is linear between nodes.
    """
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dt = np.diff(t)

    def energy(x: np.ndarray) -> Tuple[float, np.ndarray]:
        g = np.concatenate([[0.0], x])
        dg = np.diff(g) / dt
        value = float(np.sum(dg * dg * dt))
        grad_g = np.zeros_like(g)
        grad_g[1:] += 2.0 * dg
        grad_g[:-1] -= 2.0 * dg
        return value, grad_g[1:]

    bounds = list(zip(y[1:] - eps, y[1:] + eps))
    x0 = np.clip(np.zeros(len(t) - 1), y[1:] - eps, y[1:] + eps)
    res = minimize(energy, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 20000})
    return float(res.fun)


def _distance(f: PolygonalPath, tol: float, energy_fn) -> float:
    if energy_fn(f, 0.0) <= 1.0 + _FEASIBLE_SLACK:
        return 0.0
    lo, hi = 0.0, f.sup_norm()
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if energy_fn(f, mid) <= 1.0 + _FEASIBLE_SLACK:
            hi = mid
        else:
            lo = mid
    return hi


def strassen_distance(f: PolygonalPath, tol: float = Config.STRASSEN_TOL,
                      simplify: Optional[float] = None) -> float:
    """rho(f, K) within tol, by bisection on the tube width.

    Args:
        f: Path on [0, 1] with f(0) = 0
        tol: Accuracy of the bisection
        simplify: Optional vertical tolerance for dropping breakpoints first;
            the result moves by at most this much

    Returns:
        Sup-norm distance to the Strassen ball
    """
    if tol <= 0:
        raise ArgumentError(f"tol must be positive, got {tol}")
    if simplify:
        f = f.simplify(simplify)
    return _distance(f, tol, min_energy)


def strassen_distance_qp(f: PolygonalPath, tol: float = 1e-6, grid: int = 64) -> float:
    """Reference distance from a uniform-grid quadratic program.

    The grid is {0, 1/(grid-1), ..., 1} merged with f's breakpoints.
    """
    t = np.union1d(np.linspace(0.0, 1.0, grid), f.t)
    y = f.evaluate(t)
    return _distance(f, tol, lambda _f, eps: min_energy_qp(t, y, eps))
