"""Ordered thread-pool helpers for fan-out computations."""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from .config import get_settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """Apply ``func`` to every item, returning results in input order.

    Args:
        func: Pure function to apply
        items: Inputs
        threads: Worker count; defaults to ASSEMBLY_THREADS

    Returns:
        List of results, aligned with ``items``
    """
    items = list(items)
    workers = threads if threads is not None else get_settings().threads
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    logger.debug(f"Mapping {len(items)} items over {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
