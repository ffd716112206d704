"""Portable random streams and exact Poisson variates.

Streams are PCG64 generators seeded with SeedSequence(seed, spawn_key=(replica,)),
so (seed, replica) pins the output on every platform numpy supports.
"""
import numpy as np

from shared.config import Config
from shared.exceptions import ArgumentError


def replica_stream(seed: int, replica: int = 0) -> np.random.Generator:
    """Independent generator for one replica of an experiment."""
    if seed < 0 or replica < 0:
        raise ArgumentError(f"seed and replica must be nonnegative, got {seed}, {replica}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replica,))))


def poisson_inversion(rng: np.random.Generator, lam: np.ndarray) -> np.ndarray:
    """Poisson variates by inversion with sequential search.

    Exact given the uniforms for lambda <= POISSON_INVERSION_MAX_LAMBDA;
    larger rates use numpy's generator.

    Args:
        rng: Random stream
        lam: Array of rates (any shape)

    Returns:
        Integer array with the shape of lam
    """
    lam = np.asarray(lam, dtype=np.float64)
    u = rng.random(lam.shape)
    k = np.zeros(lam.shape, dtype=np.int64)
    p = np.exp(-lam)
    cdf = p.copy()
    active = (u > cdf) & (lam <= Config.POISSON_INVERSION_MAX_LAMBDA)
    while np.any(active):
        k[active] += 1
        p[active] *= lam[active] / k[active]
        cdf[active] += p[active]
        # stop once the remaining mass is below double resolution
        active &= (u > cdf) & (p > 0)
    big = lam > Config.POISSON_INVERSION_MAX_LAMBDA
    if np.any(big):
        k[big] = rng.poisson(lam[big])
    return k
