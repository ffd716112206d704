"""Tests for the distance to the Strassen ball."""
import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

import numpy as np
import pytest

from services.additive.strassen import (
    min_energy,
    strassen_distance,
    strassen_distance_qp,
    taut_string,
)
from services.sampler.rng import replica_stream
from shared.exceptions import ArgumentError
from shared.models import PolygonalPath


def random_path(seed, points=20, scale=1.5):
    """Random-walk polygon on a uniform grid with sup norm `scale`."""
    steps = replica_stream(seed).normal(size=points)
    y = np.concatenate([[0.0], np.cumsum(steps)])
    y *= scale / np.max(np.abs(y))
    return PolygonalPath(t=np.linspace(0.0, 1.0, points + 1), y=y)


class TestDistance:
    """Test rho(f, K) on paths with known distances."""

    def test_zero_path(self):
        """The zero path lies in K."""
        assert strassen_distance(PolygonalPath.linear(0.0)) == 0.0

    def test_unit_slope(self):
        """f(t) = t has energy one."""
        assert strassen_distance(PolygonalPath.linear(1.0)) == 0.0

    def test_double_slope(self):
        """f(t) = 2t is at distance one, attained by g(t) = t."""
        assert strassen_distance(PolygonalPath.linear(2.0)) == pytest.approx(1.0, abs=1e-5)

    def test_extremal_path_inside(self):
        """sqrt(2) t up to 1/2, then flat, has energy exactly one."""
        r2 = np.sqrt(2.0)
        f = PolygonalPath(t=[0.0, 0.5, 1.0], y=[0.0, r2 / 2, r2 / 2])
        assert strassen_distance(f) <= 1e-5

    def test_bounded_by_sup_norm(self):
        """rho(f, K) <= ||f|| since 0 is in K."""
        for seed in range(5):
            f = random_path(seed)
            assert strassen_distance(f) <= f.sup_norm() + 1e-9

    def test_lipschitz(self):
        """|rho(f) - rho(g)| <= ||f - g||."""
        for seed in range(5):
            f = random_path(seed)
            g = PolygonalPath(t=f.t, y=f.y * 0.8)
            gap = np.max(np.abs(f.y - g.y))
            assert abs(strassen_distance(f) - strassen_distance(g)) <= gap + 2e-6

    def test_lipschitz_pairs(self):
        """The Lipschitz bound holds over 100 pairs of independent random paths."""
        for seed in range(100):
            f = random_path(seed, points=16)
            g = random_path(seed + 1000, points=16, scale=0.5 + (seed % 5) * 0.5)
            gap = np.max(np.abs(f.y - g.y))
            assert abs(strassen_distance(f) - strassen_distance(g)) <= gap + 2e-6

    def test_simplify_moves_little(self):
        """Dropping breakpoints within tol moves the distance by at most tol."""
        f = random_path(7, points=200)
        exact = strassen_distance(f)
        assert abs(strassen_distance(f, simplify=1e-2) - exact) <= 1e-2 + 2e-6

    def test_matches_quadratic_program(self):
        """Taut string and L-BFGS-B agree on random paths."""
        for seed in range(4):
            f = random_path(seed, points=12)
            assert strassen_distance(f, tol=1e-6) == pytest.approx(strassen_distance_qp(f, tol=1e-6), abs=1e-3)

    @pytest.mark.slow
    def test_matches_quadratic_program_50_paths(self):
        """Taut string and L-BFGS-B agree on 50 random paths of mixed size."""
        for seed in range(50):
            f = random_path(seed + 100, points=8 + seed % 9, scale=1.0 + (seed % 3) * 0.5)
            assert strassen_distance(f, tol=1e-6) == pytest.approx(strassen_distance_qp(f, tol=1e-6), abs=1e-3)

    def test_bad_tol(self):
        """Tolerances must be positive."""
        with pytest.raises(ArgumentError):
            strassen_distance(PolygonalPath.linear(1.0), tol=0.0)


class TestMinEnergy:
    """Test the least-energy tube member."""

    def test_zero_width(self):
        """With no slack the path itself is the only member."""
        for seed in range(3):
            f = random_path(seed, points=10)
            assert min_energy(f, 0.0) == pytest.approx(f.energy, rel=1e-9)

    def test_wide_tube(self):
        """A tube containing zero has zero energy."""
        f = random_path(1)
        assert min_energy(f, f.sup_norm() + 0.1) == pytest.approx(0.0, abs=1e-12)

    def test_energy_decreases_with_width(self):
        """Wider tubes never need more energy."""
        f = random_path(2)
        energies = [min_energy(f, eps) for eps in (0.0, 0.1, 0.3, 0.6)]
        assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))

    def test_unpinned_ends(self):
        """The funnel needs point gates at both ends."""
        t = np.array([0.0, 0.5, 1.0])
        with pytest.raises(ArgumentError):
            taut_string(t, np.array([-1.0, 0.0, 0.0]), np.array([1.0, 1.0, 0.0]))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
