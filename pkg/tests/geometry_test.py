# -*- coding: utf-8 -*-

"""
Unit tests for the geometry module.
"""

import math
import unittest

import numpy as np

from source.errors import GeometryError, PreconditionError
from source.geometry import (AnnulusSet, Ball, DiscSet, Domain, MaskSet, normal_ball,
                             opened_region)
from source.grid import Grid


class TestDomain(unittest.TestCase):
    """Test domain construction and distances."""

    def test_interval_signed_distance(self):
        """Test signed distance inside and outside an interval."""
        domain = Domain.interval(1.0)
        self.assertAlmostEqual(domain.signed_distance(0.25), 0.75)
        self.assertAlmostEqual(domain.signed_distance(1.5), -0.5)
        self.assertEqual(domain.distance(1.5), 0.0)

    def test_ball_and_stadium_distance(self):
        """Test distances on the disc and the stadium."""
        self.assertAlmostEqual(Domain.ball(1.0).signed_distance([0.5, 0.0]), 0.5)
        stadium = Domain.stadium(1.0, 0.5)
        self.assertAlmostEqual(stadium.signed_distance([0.5, 0.1]), 0.4)
        self.assertAlmostEqual(stadium.signed_distance([1.5, 0.0]), 0.0)

    def test_invalid_domains(self):
        """Test that invalid shapes raise GeometryError."""
        with self.assertRaises(GeometryError):
            Domain.ellipse(1.0, 2.0)
        with self.assertRaises(GeometryError):
            Domain.ellipse(9.0, 1.0)
        with self.assertRaises(GeometryError):
            Domain.interval(-1.0)
        with self.assertRaises(GeometryError):
            Domain('square', (0.0, 0.0), (1.0,))

    def test_from_spec(self):
        """Test config entries with and without a center."""
        ball = Domain.from_spec('ball', [1.0, 0.5, 0.5])
        self.assertEqual(ball.center, (0.5, 0.5))
        self.assertEqual(Domain.from_spec('interval', [2.0]).params, (2.0,))
        with self.assertRaises(GeometryError):
            Domain.from_spec('interval', [1.0], dim=2)
        with self.assertRaises(GeometryError):
            Domain.from_spec('stadium', [1.0])

    def test_interior_sphere_radius(self):
        """Test ρ for the closed-form kinds."""
        self.assertEqual(Domain.interval(1.0).interior_sphere_radius(), 0.5)
        self.assertEqual(Domain.ball(2.0).interior_sphere_radius(), 1.0)
        self.assertEqual(Domain.stadium(1.0, 0.5).interior_sphere_radius(), 0.25)

    def test_ellipse_distance_against_sampled_boundary(self):
        """Test ellipse distances against a dense sampling of the boundary."""
        domain = Domain.ellipse(2.0, 1.0)
        self.assertEqual(domain.interior_sphere_radius(), 0.25)
        theta = np.linspace(0.0, 2.0 * np.pi, 200000, endpoint=False)
        boundary = np.column_stack([2.0 * np.cos(theta), np.sin(theta)])
        rng = np.random.default_rng(5)
        points = rng.uniform([-2.5, -1.5], [2.5, 1.5], size=(40, 2))
        points = np.vstack([points, [[0.0, 0.0], [1.5, 0.0], [0.0, 0.5], [3.0, 0.0]]])
        measured = np.abs(domain.signed_distance(points))
        for point, value in zip(points, measured):
            start = theta[np.argmin(np.linalg.norm(boundary - point, axis=1))]
            fine = start + np.linspace(-1e-4, 1e-4, 2001)
            local = np.column_stack([2.0 * np.cos(fine), np.sin(fine)])
            nearest = float(np.min(np.linalg.norm(local - point, axis=1)))
            self.assertAlmostEqual(value, nearest, delta=1e-6)
        self.assertAlmostEqual(domain.signed_distance([0.0, 0.0]), 1.0)

    def test_ellipse_projection(self):
        """Test that the projection lies on the ellipse at distance d(x)."""
        domain = Domain.ellipse(2.0, 1.0)
        x = np.array([0.3, 0.85])
        proj = domain.metric_projection(x)
        self.assertAlmostEqual((proj[0] / 2.0) ** 2 + proj[1] ** 2, 1.0, places=12)
        d = float(domain.signed_distance(x))
        self.assertAlmostEqual(float(np.linalg.norm(x - proj)) / d, 1.0, places=12)
        self.assertTrue(domain.on_boundary(proj))

    def test_stadium_center_distance(self):
        """Test that the stadium center sits at the cap radius from ∂Ω."""
        self.assertAlmostEqual(Domain.stadium(1.0, 0.5).distance([0.0, 0.0]), 0.5)
        self.assertAlmostEqual(Domain.stadium(1.0, 0.5).distance([-0.7, 0.0]), 0.5)

    def test_distance_is_lipschitz(self):
        """Test |d(x) - d(y)| ≤ |x - y| on random pairs for every kind."""
        rng = np.random.default_rng(9)
        domains = [Domain.interval(1.0), Domain.ball(1.0), Domain.stadium(1.0, 0.5),
                   Domain.ellipse(2.0, 1.0), Domain.ellipse(8.0, 1.0)]
        for domain in domains:
            lo, hi = domain.bounding_box()
            x = rng.uniform(lo - 0.5, hi + 0.5, size=(500, domain.dim))
            y = rng.uniform(lo - 0.5, hi + 0.5, size=(500, domain.dim))
            gap = np.abs(domain.distance(x) - domain.distance(y))
            self.assertTrue(np.all(gap <= np.linalg.norm(x - y, axis=1) + 1e-12), domain.kind)

    def test_metric_projection(self):
        """Test projection onto the nearest boundary point."""
        domain = Domain.interval(1.0)
        self.assertAlmostEqual(float(domain.metric_projection(0.8)[0]), 1.0)
        np.testing.assert_allclose(Domain.ball(1.0).metric_projection([0.0, -0.9]), [0.0, -1.0])
        with self.assertRaises(GeometryError):
            domain.metric_projection(0.2)

    def test_inner_normal(self):
        """Test inner normals and their precondition."""
        np.testing.assert_allclose(Domain.ball(1.0).inner_normal([1.0, 0.0]), [-1.0, 0.0])
        np.testing.assert_allclose(Domain.interval(1.0).inner_normal(-1.0), [1.0])
        with self.assertRaises(PreconditionError):
            Domain.ball(1.0).inner_normal([0.5, 0.0])

    def test_ray_crossings(self):
        """Test boundary crossings along rays."""
        domain = Domain.ball(1.0)
        np.testing.assert_allclose(domain.ray_crossings([0.0, 0.0], [1.0, 0.0]), [1.0])
        np.testing.assert_allclose(domain.ray_crossings([-2.0, 0.0], [1.0, 0.0]), [1.0, 3.0])
        self.assertEqual(domain.ray_crossings([-2.0, 0.0], [1.0, 0.0], r_max=0.5).size, 0)

    def test_boundary_points(self):
        """Test anchors on the boundary."""
        np.testing.assert_allclose(Domain.interval(1.0).boundary_points(4), [[-1.0], [1.0]])
        points = Domain.ball(1.0).boundary_points(4)
        self.assertEqual(points.shape, (4, 2))
        self.assertTrue(np.all(Domain.ball(1.0).on_boundary(points)))

    def test_scaled_and_translated(self):
        """Test dilation and translation."""
        domain = Domain.ball(1.0, center=(1.0, 0.0))
        self.assertEqual(domain.scaled(2.0).params, (2.0,))
        self.assertEqual(domain.scaled(2.0).center, (2.0, 0.0))
        self.assertEqual(domain.translated([0.0, 1.0]).center, (1.0, 1.0))


class TestBalls(unittest.TestCase):
    """Test balls and normal balls."""

    def test_ball_quadrature_volume(self):
        """Test that ball quadrature weights add up to the volume."""
        _, w1 = Ball(np.array([0.3]), 0.2).quadrature()
        self.assertAlmostEqual(float(np.sum(w1)), 0.4, places=12)
        _, w2 = Ball(np.array([0.0, 1.0]), 0.5).quadrature()
        self.assertAlmostEqual(float(np.sum(w2)), math.pi * 0.25, places=10)

    def test_ball_distance_and_contains(self):
        """Test open containment and distance to the closed ball."""
        ball = Ball(np.array([0.0, 0.0]), 1.0)
        self.assertTrue(ball.contains([0.5, 0.0]))
        self.assertFalse(ball.contains([1.0, 0.0]))
        self.assertAlmostEqual(ball.distance_to([3.0, 0.0]), 2.0)
        self.assertEqual(ball.distance_to([0.2, 0.0]), 0.0)

    def test_normal_ball(self):
        """Test placement of the normal ball at depth 7R/4."""
        ball = normal_ball(Domain.interval(1.0), [-1.0], 0.1)
        np.testing.assert_allclose(ball.center, [-0.825])
        self.assertAlmostEqual(ball.radius, 0.025)
        self.assertEqual(ball.scale, 0.1)

    def test_normal_ball_preconditions(self):
        """Test that bad scales and interior anchors are rejected."""
        domain = Domain.interval(1.0)
        with self.assertRaises(PreconditionError):
            normal_ball(domain, [-1.0], 0.2)
        with self.assertRaises(PreconditionError):
            normal_ball(domain, [0.0], 0.1)


class TestOpenedRegion(unittest.TestCase):
    """Test morphological openings on grids."""

    def setUp(self):
        self.domain = Domain.interval(1.0)
        self.grid = Grid.covering(self.domain, 1.0 / 64.0)

    def test_annulus_opening_keeps_segment(self):
        """Test that a long 1D segment survives the opening."""
        parent = AnnulusSet(np.array([-1.0]), 0.1, 0.4)
        region = opened_region(self.domain, parent, 0.05, self.grid)
        self.assertEqual(region.size, int(np.count_nonzero(parent.mask(self.grid))))
        self.assertGreater(region.inradius(), 0.05)

    def test_small_structuring_radius(self):
        """Test that radii below 2h are rejected."""
        with self.assertRaises(PreconditionError):
            opened_region(self.domain, AnnulusSet(np.array([-1.0]), 0.1, 0.4), 0.01, self.grid)

    def test_empty_opening(self):
        """Test that an opening with nothing left raises GeometryError."""
        values = np.zeros(self.grid.size, dtype=bool)
        values[self.grid.node_index([0.0])] = True
        with self.assertRaises(GeometryError):
            opened_region(self.domain, MaskSet(values), 0.05, self.grid)

    def test_opening_is_idempotent(self):
        """Test that opening an opened region changes nothing."""
        domain = Domain.ball(1.0)
        grid = Grid.covering(domain, 1.0 / 32.0)
        region = opened_region(domain, AnnulusSet(np.zeros(2), 0.3, 0.8), 0.125, grid)
        again = opened_region(domain, MaskSet(region.mask), 0.125, grid)
        np.testing.assert_array_equal(again.mask, region.mask)

    def test_disc_opening_of_ball(self):
        """Test that opening Ω by a quarter disc keeps its core and most nodes."""
        domain = Domain.ball(1.0)
        grid = Grid.covering(domain, 1.0 / 32.0)
        parent = DiscSet(np.zeros(2), 1.5)
        region = opened_region(domain, parent, 0.25, grid)
        core = grid.interior & (np.linalg.norm(grid.nodes, axis=1) < 0.75)
        self.assertTrue(np.all(region.mask[core]))
        self.assertGreaterEqual(region.size, 0.9 * np.count_nonzero(parent.mask(grid)))


if __name__ == '__main__':
    unittest.main()
