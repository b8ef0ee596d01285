# -*- coding: utf-8 -*-

"""
Unit tests for the barriers module.
"""

import math
import unittest

import numpy as np

from source.barriers import (BarrierSpec, barrier_w_lambda, build_superposed, build_upper_barrier,
                             bump_eval, bump_profile, smooth_step, verify_barrier_bound)
from source.errors import PreconditionError
from source.geometry import Ball, Domain, normal_ball
from source.grid import Grid
from source.profiles import distance_power
from source.quadrature import QuadratureScheme
from source.solver import SolverConfig


class TestBumps(unittest.TestCase):
    """Test the smooth step and the bump."""

    def test_smooth_step(self):
        """Test end values and symmetry of the smooth step."""
        self.assertEqual(smooth_step(0.0), 0.0)
        self.assertEqual(smooth_step(1.0), 1.0)
        self.assertAlmostEqual(smooth_step(0.5), 0.5)
        self.assertAlmostEqual(smooth_step(0.3) + smooth_step(0.7), 1.0)

    def test_bump_profile(self):
        """Test the plateau, the support and the transition."""
        self.assertEqual(bump_profile(0.3), 1.0)
        self.assertEqual(bump_profile(1.2), 0.0)
        self.assertTrue(0.0 < bump_profile(0.75) < 1.0)
        self.assertAlmostEqual(bump_eval(np.array([0.6, 0.0])), bump_eval(-0.6))

    def test_bump_profile_is_c1(self):
        """Test that centered differences of g change by at most 10 steps between samples."""
        r = np.linspace(0.0, 1.2, 1000)
        step = 5.0 * (r[1] - r[0])

        def jumps(profile):
            slope = (profile(r + step) - profile(r - step)) / (2.0 * step)
            return np.abs(np.diff(slope))

        self.assertLessEqual(float(np.max(jumps(bump_profile))), 10.0 * step)

        def kinked(t):
            return np.clip(2.0 * (1.0 - np.abs(t)), 0.0, 1.0)

        self.assertGreater(float(np.max(jumps(kinked))), 10.0 * step)


class TestBarrierSpec(unittest.TestCase):
    """Test barrier specifications and bump barriers."""

    def setUp(self):
        self.domain = Domain.interval(1.0)

    def test_validation(self):
        """Test kind, anchor, scale and amplitude checks."""
        with self.assertRaises(PreconditionError):
            BarrierSpec('spiral', self.domain, np.array([-1.0]), 0.1)
        with self.assertRaises(PreconditionError):
            BarrierSpec('bump-lower', self.domain, np.array([-0.5]), 0.1)
        with self.assertRaises(PreconditionError):
            BarrierSpec('bump-lower', self.domain, np.array([-1.0]), 0.2)
        with self.assertRaises(PreconditionError):
            BarrierSpec('bump-lower', self.domain, np.array([-1.0]), 0.1, lam=0.8)

    def test_w_lambda_on_plateau(self):
        """Test both bump kinds where the bump equals 1."""
        lower = BarrierSpec('bump-lower', self.domain, np.array([-1.0]), 0.1, lam=0.5)
        self.assertAlmostEqual(barrier_w_lambda(lower, -0.99), 1.5 * 0.1)
        upper = BarrierSpec('bump-upper', self.domain, np.array([-1.0]), 0.1, lam=0.5,
                            multiplier=2.0)
        self.assertAlmostEqual(barrier_w_lambda(upper, -0.99), 2.0 * 0.5 * 0.1)
        self.assertAlmostEqual(barrier_w_lambda(lower, 0.0), 1.0)
        self.assertEqual(barrier_w_lambda(lower, 1.5), 0.0)

    def test_w_lambda_needs_bump_kind(self):
        """Test that other kinds are refused."""
        spec = BarrierSpec('superposed', self.domain, np.array([-1.0]), 0.1)
        with self.assertRaises(PreconditionError):
            barrier_w_lambda(spec, -0.9)

    def test_bound_sweep(self):
        """Test the λ-sweep rows and the fitted constant."""
        grid = Grid.covering(self.domain, 1.0 / 128.0)
        spec = BarrierSpec('bump-lower', self.domain, np.array([-1.0]), 0.1)
        report = verify_barrier_bound(spec, grid, QuadratureScheme.for_grid(grid), n_lambda=1,
                                      max_points=3)
        rows = report.details['rows']
        self.assertEqual([row['lambda'] for row in rows], [-0.5, 0.0, 0.5])
        self.assertTrue(math.isfinite(report.details['C6']))
        self.assertGreater(report.details['C6'], 0.0)
        self.assertEqual(report.details['barrier']['bump'], 'exp-smooth-step')


class TestSuperposed(unittest.TestCase):
    """Test the superposed barrier."""

    def setUp(self):
        self.domain = Domain.interval(1.0)
        self.grid = Grid.covering(self.domain, 1.0 / 128.0)
        self.scheme = QuadratureScheme.for_grid(self.grid)
        self.spec = BarrierSpec('superposed', self.domain, np.array([-1.0]), 0.1)
        self.w = distance_power(self.domain, 0.5)
        self.u = distance_power(self.domain, 0.5, scale=1.5)

    def test_overlap_rejected(self):
        """Test that a ball inside D_R is refused."""
        with self.assertRaises(PreconditionError):
            build_superposed(self.spec, self.w, self.u, Ball(np.array([-0.95]), 0.02),
                             self.scheme, grid=self.grid)

    def test_drop(self):
        """Test that raising the function on the ball lowers the operator."""
        ball = normal_ball(self.domain, [-1.0], 0.1)
        merged_function, report = build_superposed(self.spec, self.w, self.u, ball, self.scheme,
                                                   grid=self.grid)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.details['excess'], 0.5)
        self.assertGreater(report.details['c_fit'], 0.0)
        self.assertTrue(all(row['correction'] < 0.0 for row in report.details['rows']))
        self.assertAlmostEqual(float(merged_function(-0.825)), 1.5 * math.sqrt(0.175))


class TestUpperBarrier(unittest.TestCase):
    """Test the obstacle-built upper barrier."""

    def test_claims(self):
        """Test the barrier claims on a fine interval grid."""
        domain = Domain.interval(1.0)
        grid = Grid.covering(domain, 1.0 / 256.0)
        v, report = build_upper_barrier(domain, 0.1, [-0.975], SolverConfig(tol=1e-10), grid,
                                        anchor=[-1.0])
        self.assertTrue(report.passed)
        self.assertEqual(report.details['v_at_xbar'], 0.0)
        self.assertTrue(report.details['nonnegative'])
        self.assertGreater(report.details['lower_constant'], 0.0)
        self.assertGreaterEqual(float(np.min(v.values)), 0.0)

    def test_scale_range(self):
        """Test that R ≥ ρ/4 is refused."""
        domain = Domain.interval(1.0)
        grid = Grid.covering(domain, 1.0 / 64.0)
        with self.assertRaises(PreconditionError):
            build_upper_barrier(domain, 0.2, [-0.95], SolverConfig(), grid)


if __name__ == '__main__':
    unittest.main()
