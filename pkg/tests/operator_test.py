# -*- coding: utf-8 -*-

"""
Unit tests for grids, fields, quadrature, closed-form profiles and the
discrete operator.
"""

import math
import unittest

import numpy as np

from source.errors import ContractError, DivergenceError, PreconditionError
from source.geometry import Ball, Domain
from source.grid import Field, Grid
from source.operator import (energy, lattice_zeta, merged, near_diagonal_weight, operator_for,
                             pointwise_flap, residual, series_S, signed_power, superpose, tail)
from source.profiles import (distance_power, explicit_constant, explicit_constant_quadrature,
                             explicit_solution)
from source.quadrature import QuadratureScheme, graded_cuts, ray_rule
from source.solver import SolverConfig, solve_torsion


class TestGrid(unittest.TestCase):
    """Test grids and fields."""

    def setUp(self):
        self.domain = Domain.interval(1.0)
        self.grid = Grid.covering(self.domain, 1.0 / 8.0)

    def test_covering_layout(self):
        """Test box size and interior count of a covering grid."""
        self.assertEqual(self.grid.shape, (21,))
        self.assertAlmostEqual(self.grid.lower[0], -1.25)
        self.assertEqual(self.grid.n_interior, 15)

    def test_unknown_cap(self):
        """Test that grids above the N = 1 cap are refused."""
        with self.assertRaises(ContractError):
            Grid.covering(self.domain, 1.0 / 4096.0)

    def test_dirichlet_field_cut(self):
        """Test that dirichlet fields vanish outside Ω."""
        u = Field.from_function(self.grid, lambda x: np.ones(len(x)))
        self.assertEqual(float(np.sum(u.values)), 15.0)
        with self.assertRaises(ContractError):
            Field(self.grid, np.ones(self.grid.size))

    def test_field_arithmetic(self):
        """Test scaling, sums and node lookup."""
        u = Field.from_function(self.grid, lambda x: 1.0 - x[:, 0] ** 2)
        v = 2.0 * u - u
        np.testing.assert_allclose(v.values, u.values)
        self.assertAlmostEqual(u.at([0.5]), 0.75)
        self.assertAlmostEqual(float(u([0.0625])), 0.5 * (1.0 + (1.0 - 0.125 ** 2)))
        other = Field.zeros(Grid.covering(self.domain, 1.0 / 16.0))
        with self.assertRaises(ContractError):
            u + other


class TestQuadrature(unittest.TestCase):
    """Test panel rules."""

    def test_graded_cuts_refine_both_ends(self):
        """Test that the first and last panels are below the floor."""
        cuts = graded_cuts(0.0, 1.0, 0.15, 1e-6)
        self.assertEqual(cuts[0], 0.0)
        self.assertEqual(cuts[-1], 1.0)
        self.assertLess(cuts[1] - cuts[0], 1e-6)
        self.assertLess(cuts[-1] - cuts[-2], 1e-6)
        self.assertTrue(np.all(np.diff(cuts) > 0.0))

    def test_ray_rule_integrates_singular_endpoint(self):
        """Test ∫_0^1 r^{-1/2} dr = 2 with a break inside."""
        scheme = QuadratureScheme(h=0.1, eps=1e-14, far_radius=1.0)
        r, w = ray_rule([0.5], 1e-14, 1.0, scheme)
        self.assertAlmostEqual(float(w @ r ** -0.5), 2.0 - 2e-7, places=8)

    def test_scheme_validation(self):
        """Test that eps > h is rejected."""
        with self.assertRaises(ContractError):
            QuadratureScheme(h=0.1, eps=0.2, far_radius=1.0)


class TestProfiles(unittest.TestCase):
    """Test closed-form profiles."""

    def test_explicit_constant_values(self):
        """Test 2π/sin(πs) in N = 1 and the N = 2 formula at s = 1/2."""
        self.assertAlmostEqual(explicit_constant(1, 0.5), 2.0 * math.pi)
        self.assertAlmostEqual(explicit_constant(2, 0.5), 2.0 * math.pi ** 2)

    def test_quadrature_oracle_agrees(self):
        """Test the independent quadrature constant against the closed form."""
        for s in (0.3, 0.5, 0.7):
            self.assertAlmostEqual(explicit_constant_quadrature(s) / explicit_constant(1, s),
                                   1.0, places=8)

    def test_explicit_solution_shape(self):
        """Test the closed-form solution at the center and outside."""
        u = explicit_solution(Domain.interval(1.0), 0.5)
        self.assertAlmostEqual(float(u(0.0)), 1.0 / (2.0 * math.pi))
        self.assertEqual(float(u(1.5)), 0.0)
        with self.assertRaises(PreconditionError):
            explicit_solution(Domain.stadium(1.0, 0.5), 0.5)

    def test_distance_power(self):
        """Test d^s sampling."""
        profile = distance_power(Domain.interval(1.0), 0.5, scale=2.0)
        self.assertAlmostEqual(float(profile(0.75)), 1.0)

    def test_pointwise_flap_of_explicit_solution(self):
        """Test that the operator of the explicit solution equals the unit load."""
        domain = Domain.interval(1.0)
        scheme = QuadratureScheme.for_grid(Grid.covering(domain, 1.0 / 64.0))
        u = explicit_solution(domain, 0.5)
        for x in (0.0, 0.4):
            value = pointwise_flap(u, [x], 2.0, 0.5, scheme=scheme, domain=domain)
            self.assertAlmostEqual(value, 1.0, places=4)


class TestDiscreteOperator(unittest.TestCase):
    """Test the lattice energy and its gradient."""

    def setUp(self):
        self.domain = Domain.interval(1.0)
        self.grid = Grid.covering(self.domain, 1.0 / 32.0)
        self.u = Field.from_function(self.grid, lambda x: np.cos(0.5 * math.pi * x[:, 0]))

    def test_lattice_constants(self):
        """Test the lattice zeta value and the finite compensation weight."""
        self.assertAlmostEqual(lattice_zeta(1, 2.0), math.pi ** 2 / 3.0)
        self.assertTrue(math.isfinite(near_diagonal_weight(1, 3.0, 0.5)))
        self.assertTrue(math.isfinite(near_diagonal_weight(2, 2.0, 0.5)))

    def test_signed_power(self):
        """Test the signed power a^{q} = |a|^{q-1}a."""
        np.testing.assert_allclose(signed_power(np.array([-2.0, 3.0]), 3.0), [-8.0, 27.0])
        np.testing.assert_allclose(signed_power(np.array([-4.0]), 1.5), [-8.0])

    def test_energy_homogeneity(self):
        """Test J(tu) = t^p J(u)."""
        for p in (2.0, 3.0):
            base = energy(self.u, p, 0.5)
            self.assertGreater(base, 0.0)
            self.assertAlmostEqual(energy(2.0 * self.u, p, 0.5) / base, 2.0 ** p, places=10)
        self.assertEqual(energy(Field.zeros(self.grid), 3.0, 0.5), 0.0)

    def test_gradient_matches_finite_differences(self):
        """Test the gradient against central differences of the energy at two steps."""
        rng = np.random.default_rng(7)
        for p in (2.0, 3.0):
            op = operator_for(self.grid, p, 0.5)
            x = rng.uniform(0.0, 1.0, op.n)
            g = op.gradient(x)
            d = g * rng.uniform(0.5, 1.5, op.n) / np.max(np.abs(g))
            exact = float(g @ d)
            for eps in (1e-4, 1e-5):
                fd = (op.energy(x + eps * d) - op.energy(x - eps * d)) / (2.0 * eps)
                self.assertLess(abs(fd - exact) / abs(exact), 1e-5, (p, eps))

    def test_linear_operator_symmetric(self):
        """Test ⟨Au, v⟩ = ⟨u, Av⟩ for p = 2."""
        op = operator_for(self.grid, 2.0, 0.3)
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=op.n), rng.normal(size=op.n)
        self.assertAlmostEqual(float(op.apply_linear(a) @ b) / float(a @ op.apply_linear(b)),
                               1.0, places=10)

    def test_residual_linear_for_p2(self):
        """Test that the p = 2 residual with zero load is linear in u."""
        w = Field.from_function(self.grid, lambda x: x[:, 0] * (1.0 - x[:, 0] ** 2))
        both = residual(self.u + w, 0.0, 2.0, 0.5).values
        apart = residual(self.u, 0.0, 2.0, 0.5).values + residual(w, 0.0, 2.0, 0.5).values
        np.testing.assert_allclose(both, apart, rtol=0.0, atol=1e-12 * np.max(np.abs(both)))
        doubled = residual(2.0 * self.u, 0.0, 2.0, 0.5).values
        np.testing.assert_allclose(doubled, 2.0 * residual(self.u, 0.0, 2.0, 0.5).values,
                                   rtol=1e-12, atol=0.0)

    def test_pointwise_homogeneity(self):
        """Test that doubling u scales the operator by 2^{p-1}."""
        points = [[0.0], [0.5], [1.3]]
        base = np.atleast_1d(pointwise_flap(self.u, points, 3.0, 0.5))
        doubled = np.atleast_1d(pointwise_flap(2.0 * self.u, points, 3.0, 0.5))
        np.testing.assert_allclose(doubled / base, 4.0, rtol=1e-12)

    def test_translation_invariance(self):
        """Test that shifting Ω and its grid leaves energy and torsion unchanged."""
        moved = self.grid.translated([0.5])
        shifted = Field.from_function(moved, lambda x: np.cos(0.5 * math.pi * (x[:, 0] - 0.5)))
        for p in (2.0, 3.0):
            self.assertAlmostEqual(energy(shifted, p, 0.5) / energy(self.u, p, 0.5), 1.0,
                                   places=12)
        cfg = SolverConfig(tol=1e-10)
        u = solve_torsion(self.domain, cfg, self.grid)
        v = solve_torsion(moved.domain, cfg, moved)
        np.testing.assert_allclose(v.values, u.values, rtol=0.0, atol=1e-12 * u.sup())

    def test_residual_of_zero_field(self):
        """Test residual(0, f) = -h^N f at interior nodes."""
        res = residual(Field.zeros(self.grid), 1.0, 2.0, 0.5)
        np.testing.assert_allclose(res.interior_values, -self.grid.cell_volume)
        self.assertEqual(float(np.max(np.abs(res.values[~self.grid.interior]))), 0.0)

    def test_free_field_rejected(self):
        """Test that energy refuses free fields."""
        free = Field(self.grid, np.ones(self.grid.size), kind='free')
        with self.assertRaises(ContractError):
            energy(free, 2.0, 0.5)

    def test_exterior_operator_negative(self):
        """Test that a positive field has negative operator outside Ω."""
        values = np.atleast_1d(pointwise_flap(self.u, [[1.3], [-1.71]], 2.0, 0.5))
        self.assertTrue(np.all(values < 0.0))

    def test_boundary_layer_rejected(self):
        """Test the 2h admissibility margin."""
        with self.assertRaises(PreconditionError):
            pointwise_flap(self.u, [0.99], 2.0, 0.5)

    def test_exponent_range(self):
        """Test that singular p is refused."""
        with self.assertRaises(PreconditionError):
            operator_for(self.grid, 1.5, 0.5)


class TestSuperpositionAndTails(unittest.TestCase):
    """Test superposition, tails and the dyadic series."""

    def setUp(self):
        self.domain = Domain.interval(1.0)
        self.grid = Grid.covering(self.domain, 1.0 / 64.0)
        self.w = Field.from_function(self.grid, lambda x: np.sqrt(np.maximum(1.0 - x[:, 0] ** 2, 0.0)))
        self.ball = Ball(np.array([0.5]), 0.1)

    def test_discrete_superposition_identity(self):
        """Test that flap(w) + correction is the operator of the merged field."""
        v = lambda y: np.full(len(np.atleast_2d(y)), 0.3)
        scheme = QuadratureScheme.for_grid(self.grid)
        for p in (2.0, 3.0):
            direct = pointwise_flap(merged(self.w, v, self.ball), [-0.25], p, 0.5)
            total, correction = superpose(self.w, v, self.ball, [-0.25], p, 0.5, scheme)
            self.assertNotEqual(correction, 0.0)
            self.assertAlmostEqual(total / direct, 1.0, places=9)

    def test_superposition_needs_distance(self):
        """Test that points inside the region are refused."""
        scheme = QuadratureScheme.for_grid(self.grid)
        with self.assertRaises(PreconditionError):
            superpose(self.w, self.w, self.ball, [0.5], 2.0, 0.5, scheme)

    def test_tail_of_constant_function(self):
        """Test ∫_{1/2}^{2} r^{-3/2} dr = √2 for the unit function seen from -1."""
        scheme = QuadratureScheme.for_grid(self.grid)
        one = lambda y: np.ones(len(np.atleast_2d(y)))
        value = tail(one, 1.0, 0.5, [-1.0], 0.5, domain=self.domain, scheme=scheme).value
        self.assertAlmostEqual(value, math.sqrt(2.0), places=8)
        nodal = tail(Field.from_function(self.grid, one), 1.0, 0.5, [-1.0], 0.5).value
        self.assertAlmostEqual(nodal / math.sqrt(2.0), 1.0, delta=0.05)

    def test_tail_validation(self):
        """Test that q < 1 is refused."""
        with self.assertRaises(PreconditionError):
            tail(self.w, 0.5, 0.5, [-1.0], 0.5)

    def test_series_S(self):
        """Test convergence, the tail bound and divergence."""
        value = series_S(1.0, 0.1, 0.5, 100)
        self.assertGreater(value.partial, 0.0)
        self.assertGreaterEqual(value.upper, value.partial)
        self.assertLess(series_S(1.0, 1e-6, 0.5, 200).upper, 1e-4)
        with self.assertRaises(DivergenceError):
            series_S(2.0, 0.25, 0.5, 10)


if __name__ == '__main__':
    unittest.main()
