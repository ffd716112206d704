"""Brute-force enumeration of level sets and extension sets."""
import logging
from typing import Iterable, Iterator, List, Set, Tuple

import numpy as np

from shared.config import Config
from shared.exceptions import ArgumentError, CostGuardError
from shared.models import ComponentVector

logger = logging.getLogger(__name__)

Counts = Tuple[int, ...]


def level_tuples(n: int) -> Iterator[Counts]:
    """Multiplicity vectors of all partitions of n, largest part first.

    Order: partitions in reverse lexicographic order of their parts, so
    (0,...,0,1) comes first and (n,0,...,0) last.
    """
    if n == 0:
        yield ()
        return
    counts = [0] * n

    def rec(remaining: int, max_part: int) -> Iterator[Counts]:
        if remaining == 0:
            yield tuple(counts)
            return
        for part in range(min(remaining, max_part), 0, -1):
            counts[part - 1] += 1
            yield from rec(remaining - part, part)
            counts[part - 1] -= 1

    yield from rec(n, n)


def enumerate_level(n: int) -> List[ComponentVector]:
    """All component vectors s in Z_+^n with l(s) = n.

    Args:
        n: Level, 0 <= n <= ENUMERATION_MAX_N

    Returns:
        p(n) vectors in a fixed order
    """
    if n < 0:
        raise ArgumentError(f"n must be nonnegative, got {n}")
    if n > Config.ENUMERATION_MAX_N:
        raise CostGuardError(f"enumeration of level {n} refused (limit {Config.ENUMERATION_MAX_N})")
    vectors = [ComponentVector(s=t) for t in level_tuples(n)]
    logger.debug(f"Enumerated {len(vectors)} vectors of level {n}")
    return vectors


def _as_tuples(U: Iterable) -> List[Counts]:
    out = []
    for u in U:
        out.append(tuple(u.s) if isinstance(u, ComponentVector) else tuple(int(x) for x in u))
    dims = {len(t) for t in out}
    if len(dims) > 1:
        raise ArgumentError(f"elements of U have different dimensions: {sorted(dims)}")
    return out


def extension_differences(U: Iterable) -> np.ndarray:
    """Distinct differences t2 - t3 over pairs with t3 exactly entering t2.

    t3 exactly enters t2 iff every coordinate of t3 is 0 or equal to the
    matching coordinate of t2.
    """
    T = np.array(sorted(set(_as_tuples(U))), dtype=np.int64)
    if T.size == 0:
        return np.zeros((0, 0), dtype=np.int64)
    diffs: Set[Counts] = set()
    for t2 in T:
        enters = np.all((T == 0) | (T == t2), axis=1)
        for t3 in T[enters]:
            diffs.add(tuple(int(x) for x in t2 - t3))
    return np.array(sorted(diffs), dtype=np.int64)


def extension_set(U: Iterable) -> Set[ComponentVector]:
    """V(U) = {t1 + t2 - t3 : t_i in U, t1 orthogonal to t2 - t3, t3 exactly enters t2}."""
    tuples = sorted(set(_as_tuples(U)))
    if not tuples:
        return set()
    T = np.array(tuples, dtype=np.int64)
    V: Set[Counts] = set()
    for d in extension_differences(tuples):
        orthogonal = T @ d == 0
        for t1 in T[orthogonal]:
            V.add(tuple(int(x) for x in t1 + d))
    logger.debug(f"Extension of {len(tuples)} vectors has {len(V)} elements")
    return {ComponentVector(s=v) for v in V}


def in_extension(s: Counts, U_set: Set[Counts], diffs: np.ndarray) -> bool:
    """Membership of s in V(U) given the precomputed differences."""
    if len(diffs) == 0:
        return False
    s_arr = np.asarray(s, dtype=np.int64)
    for d in diffs:
        t1 = s_arr - d
        if np.any(t1 < 0):
            continue
        if int(t1 @ d) == 0 and tuple(int(x) for x in t1) in U_set:
            return True
    return False
