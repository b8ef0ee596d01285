#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Acceptance Suite Module
The eleven property checks run by `fracreg verify`. Each criterion returns a
CriterionResult; a criterion that raises counts as failed and keeps the
error message.

`verify.tolerance_scale` multiplies every acceptance tolerance. Criteria
without a numeric tolerance fail when the scale is negative, so a negative
scale forces the whole suite to fail.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .barriers import BarrierSpec, build_upper_barrier, bump_eval, verify_barrier_bound
from .config import DEFAULT_SEED, RunConfig
from .diagnostics import QuotientField, holder_fit, theorem_main_report
from .errors import FracregError
from .geometry import Domain, as_points, normal_ball
from .grid import Grid
from .operator import merged, operator_for, pointwise_flap, series_S, superpose
from .profiles import explicit_constant_quadrature
from .quadrature import QuadratureScheme
from .solver import (Obstacles, SolverConfig, check_comparison, check_global_subsolution,
                     check_hopf, check_lewy_stampacchia, solve_dirichlet, solve_double_obstacle,
                     solve_torsion)

logger = logging.getLogger(__name__)

CRITERIA_NAMES = {
    1: 'homogeneity',
    2: 'explicit_solution',
    3: 'torsion_scaling',
    4: 'comparison',
    5: 'superposition',
    6: 'lewy_stampacchia',
    7: 'hopf',
    8: 'global_subsolution',
    9: 'barriers',
    10: 'holder_calibration',
    11: 'series',
}


@dataclass
class AcceptanceSettings:
    """Resolutions and campaign sizes of one verify run."""

    solver: SolverConfig
    h1d: float = 1.0 / 256.0
    h2d: float = 1.0 / 64.0
    h_campaign: float = 1.0 / 128.0
    comparison_pairs: int = 100
    superposition_configs: int = 50
    lewy_instances: int = 20
    tolerance_scale: float = 1.0
    seed: int = DEFAULT_SEED
    barrier_R: float = 0.1
    lambda_cap: float = 0.5
    n_lambda: int = 2
    max_points: int = 6
    quadrature: Dict[str, Any] = field(default_factory=dict)
    quick: bool = False

    @classmethod
    def from_run(cls, run: RunConfig) -> 'AcceptanceSettings':
        verify = run.verify
        quick = bool(verify.get('quick', False))
        settings = cls(
            solver=run.solver,
            h2d=float(verify.get('h2d', 1.0 / 64.0)),
            comparison_pairs=int(verify.get('comparison_pairs', 100)),
            superposition_configs=int(verify.get('superposition_configs', 50)),
            lewy_instances=int(verify.get('lewy_instances', 20)),
            tolerance_scale=float(verify.get('tolerance_scale', 1.0)),
            seed=run.seed,
            barrier_R=float(run.barrier.get('R', 0.1)),
            lambda_cap=float(run.barrier.get('lambda_cap', 0.5)),
            n_lambda=int(run.barrier.get('n_lambda', 2)),
            max_points=int(run.barrier.get('max_points', 6)),
            quadrature=dict(run.quadrature),
            quick=quick,
        )
        if quick:
            settings.h1d = 1.0 / 64.0
            settings.h2d = max(settings.h2d, 1.0 / 8.0)
            settings.h_campaign = 1.0 / 32.0
            settings.comparison_pairs = min(settings.comparison_pairs, 10)
            settings.superposition_configs = min(settings.superposition_configs, 5)
            settings.lewy_instances = min(settings.lewy_instances, 4)
        return settings

    def cfg(self, p: float, s: float = 0.5) -> SolverConfig:
        return self.solver.with_(p=p, s=s)

    def scheme(self, grid: Grid) -> QuadratureScheme:
        return QuadratureScheme.for_grid(grid, **self.quadrature)

    def scaled(self, tolerance: float) -> float:
        return tolerance * self.tolerance_scale

    @property
    def strict(self) -> bool:
        return self.tolerance_scale >= 0.0


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    value: float
    tolerance: float
    details: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None
    seconds: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        out = {'criterion': self.number, 'name': self.name, 'pass': bool(self.passed),
               'value': self.value, 'tolerance': self.tolerance, 'details': self.details}
        if self.error is not None:
            out['error'] = self.error
        return out


def _unit_interval() -> Domain:
    return Domain.interval(1.0)


def _unit_disc() -> Domain:
    return Domain.ball(1.0)


# ----------------------------------------------------------------------
# criteria

def criterion_homogeneity(settings: AcceptanceSettings) -> CriterionResult:
    """Doubling the load by 2^{p-1} doubles sup|u/d^s| and leaves every fitted α unchanged."""
    cases = []
    ratio_tol = settings.scaled(2e-8)
    gap_tol = settings.scaled(1e-8)
    worst = 0.0
    passed = True
    for dim, h in ((1, settings.h1d), (2, settings.h2d)):
        domain = _unit_interval() if dim == 1 else _unit_disc()
        grid = Grid.covering(domain, h)
        for p in (2.0, 3.0):
            report = theorem_main_report(domain, 1.0, settings.cfg(p), grid, t=2.0)
            checks = {c.name: c for c in report.checks}
            ratio = checks['scaling_sup'].value
            gap = checks['scaling_alpha'].value
            fitted = checks['holder_fit'].passed and checks['trace_monotone'].passed
            ok = abs(ratio - 2.0) <= ratio_tol and gap <= gap_tol and fitted
            passed = passed and ok
            worst = max(worst, abs(ratio - 2.0))
            cases.append({'dim': dim, 'h': h, 'p': p, 'ratio': ratio, 'alpha_gap': gap,
                          'alphas': [a['trace'].get('alpha') for a in report.anchors],
                          'fitted': fitted, 'pass': ok})
    return CriterionResult(1, CRITERIA_NAMES[1], passed, worst, ratio_tol, {'cases': cases})


def criterion_explicit(settings: AcceptanceSettings) -> CriterionResult:
    """p = 2 solutions on (-1, 1) against (1 - x²)^s / C, with C from the quadrature oracle."""
    domain = _unit_interval()
    tol = settings.scaled(0.05)
    rows = []
    passed = True
    worst = 0.0
    for s in (0.3, 0.5, 0.7):
        constant = explicit_constant_quadrature(s)
        errors = []
        for h in (settings.h1d, 0.5 * settings.h1d):
            grid = Grid.covering(domain, h)
            u = solve_dirichlet(domain, 1.0, settings.cfg(2.0, s), grid)
            x = grid.nodes[grid.interior, 0]
            exact = np.maximum(1.0 - x * x, 0.0) ** s / constant
            errors.append(float(np.max(np.abs(u.interior_values - exact)) / np.max(exact)))
        ok = errors[0] <= tol and errors[1] < errors[0]
        passed = passed and ok
        worst = max(worst, errors[0])
        rows.append({'s': s, 'constant': constant, 'error': errors[0], 'error_refined': errors[1],
                     'pass': ok})
    return CriterionResult(2, CRITERIA_NAMES[2], passed, worst, tol, {'rows': rows})


def criterion_torsion_scaling(settings: AcceptanceSettings) -> CriterionResult:
    """u_R(Rx) = R^{ps/(p-1)} u₁(x) on matched grids, for R = 2."""
    R = 2.0
    tol = settings.scaled(0.05)
    rows = []
    passed = True
    worst = 0.0
    for dim, h in ((1, settings.h1d), (2, settings.h2d)):
        unit = _unit_interval() if dim == 1 else _unit_disc()
        large = unit.scaled(R)
        grid_unit = Grid.covering(unit, h)
        grid_large = Grid.covering(large, R * h)
        for p in (2.0, 3.0):
            cfg = settings.cfg(p)
            u1 = solve_torsion(unit, cfg, grid_unit)
            uR = solve_torsion(large, cfg, grid_large)
            factor = R ** (p * cfg.s / (p - 1.0))
            gap = float(np.max(np.abs(uR.values - factor * u1.values))) / (factor * u1.sup())
            ok = gap <= tol
            passed = passed and ok
            worst = max(worst, gap)
            rows.append({'dim': dim, 'p': p, 'relative_gap': gap, 'pass': ok})
    return CriterionResult(3, CRITERIA_NAMES[3], passed, worst, tol, {'rows': rows})


def _piecewise(breaks: np.ndarray, levels: np.ndarray) -> Callable:
    def load(x):
        pts, _ = as_points(x, 1)
        return levels[np.searchsorted(breaks, pts[:, 0])]
    return load


def criterion_comparison(settings: AcceptanceSettings) -> CriterionResult:
    """Random ordered piecewise-constant loads f₁ ≤ f₂ give ordered solutions."""
    rng = np.random.default_rng(settings.seed)
    domain = _unit_interval()
    grid = Grid.covering(domain, settings.h_campaign)
    failures = 0
    worst = math.inf
    tol = 0.0
    for k in range(settings.comparison_pairs):
        cfg = settings.cfg(2.0 if k % 2 == 0 else 3.0)
        breaks = np.sort(rng.uniform(-1.0, 1.0, 4))
        low = rng.uniform(-1.0, 1.0, 5)
        high = low + rng.uniform(0.0, 1.0, 5) * (1.0 - low)
        f1, f2 = _piecewise(breaks, low), _piecewise(breaks, high)
        u1 = solve_dirichlet(domain, f1, cfg, grid)
        u2 = solve_dirichlet(domain, f2, cfg, grid)
        report = check_comparison(u1, u2, f1, f2, cfg)
        tol = settings.scaled(report.tolerance)
        worst = min(worst, report.value)
        if not report.value >= -tol:
            failures += 1
            logger.warning("Comparison pair %d failed: min(u₂ - u₁) = %.3g", k, report.value)
    count = settings.comparison_pairs
    return CriterionResult(4, CRITERIA_NAMES[4], failures == 0, worst, -tol,
                           {'pairs': count, 'failures': failures})


def criterion_superposition(settings: AcceptanceSettings) -> CriterionResult:
    """Direct quadrature of the merged function against flap(w) plus the ball correction."""
    rng = np.random.default_rng(settings.seed + 5)
    domain = _unit_interval()
    scheme = settings.scheme(Grid.covering(domain, 1.0 / 256.0))
    tol = settings.scaled(1e-6)
    rows = []
    worst = 0.0
    for _ in range(settings.superposition_configs):
        p = float(rng.choice([2.0, 3.0]))
        s = float(rng.choice([0.3, 0.5, 0.7]))
        x0 = float(rng.choice([-1.0, 1.0]))
        R = float(rng.uniform(0.03, 0.12))
        ball = normal_ball(domain, [x0], R)
        slope = float(rng.uniform(-0.5, 0.5))
        level, tilt = float(rng.uniform(0.0, 2.0)), float(rng.uniform(-1.0, 1.0))
        center = float(ball.center[0])

        def w(y, slope=slope, s=s):
            pts, single = as_points(y, 1)
            out = (1.0 + slope * pts[:, 0]) * np.maximum(1.0 - pts[:, 0] ** 2, 0.0) ** s
            return out[0] if single else out

        def v(y, level=level, tilt=tilt, center=center):
            pts, single = as_points(y, 1)
            out = level + tilt * (pts[:, 0] - center)
            return out[0] if single else out

        while True:
            x = rng.uniform(-0.95, 0.95)
            if ball.distance_to([x]) >= ball.radius:
                break
        direct = pointwise_flap(merged(w, v, ball), [x], p, s, scheme=scheme, domain=domain,
                                regions=[ball])
        total, correction = superpose(w, v, ball, [x], p, s, scheme, domain=domain)
        error = abs(direct - total) / max(abs(direct), 1.0)
        worst = max(worst, error)
        rows.append({'p': p, 's': s, 'x': x, 'ball_center': center, 'ball_radius': ball.radius,
                     'direct': direct, 'superposed': total, 'correction': correction,
                     'error': error})
    return CriterionResult(5, CRITERIA_NAMES[5], worst <= tol, worst, tol,
                           {'configs': len(rows), 'rows': rows})


def criterion_lewy_stampacchia(settings: AcceptanceSettings) -> CriterionResult:
    """Smooth double-obstacle instances satisfy the nodal sandwich everywhere in Ω."""
    rng = np.random.default_rng(settings.seed + 6)
    domain = _unit_interval()
    grid = Grid.covering(domain, settings.h_campaign)
    rows = []
    failures = 0
    for k in range(settings.lewy_instances):
        cfg = settings.cfg(2.0 if k % 2 == 0 else 3.0)
        a1, c1, r1, b1 = rng.uniform(0.2, 1.0), rng.uniform(-0.5, 0.5), \
            rng.uniform(0.2, 0.5), rng.uniform(0.1, 0.5)
        a2, c2, r2, g0 = rng.uniform(0.0, 0.5), rng.uniform(-0.5, 0.5), \
            rng.uniform(0.2, 0.5), rng.uniform(0.05, 0.3)

        def lower(x, a1=a1, c1=c1, r1=r1, b1=b1):
            return a1 * bump_eval((np.asarray(x) - c1) / r1) - b1

        def upper(x, a2=a2, c2=c2, r2=r2, g0=g0, lower=lower):
            return lower(x) + g0 + a2 * bump_eval((np.asarray(x) - c2) / r2)

        obs = Obstacles(lower, upper)
        u = solve_double_obstacle(domain, obs, cfg, grid)
        report = check_lewy_stampacchia(u, obs, cfg, tol=settings.scaled(10.0 * cfg.tol))
        failures += not report.passed
        rows.append({'p': cfg.p, 'violations': report.details['violations'],
                     'fraction': report.value})
    fraction = min((row['fraction'] for row in rows), default=1.0)
    return CriterionResult(6, CRITERIA_NAMES[6], failures == 0, fraction, 1.0,
                           {'instances': len(rows), 'failures': failures, 'rows': rows})


def _torsion_cases(settings: AcceptanceSettings):
    yield _unit_interval(), settings.h1d, 2.0
    yield _unit_interval(), settings.h1d, 3.0
    yield _unit_disc(), settings.h2d, 2.0


def criterion_hopf(settings: AcceptanceSettings) -> CriterionResult:
    """min u/d^s of torsion functions is positive and stable across one refinement."""
    rows = []
    passed = settings.strict
    worst = math.inf
    for domain, h, p in _torsion_cases(settings):
        cfg = settings.cfg(p)
        grid = Grid.covering(domain, h)
        u = solve_torsion(domain, cfg, grid)
        u_fine = solve_torsion(domain, cfg, grid.refined())
        report = check_hopf(u, domain, cfg, u_refined=u_fine)
        passed = passed and report.passed
        worst = min(worst, report.value)
        rows.append({'domain': domain.kind, 'p': p, 'h': h, 'pass': report.passed,
                     **report.details})
    return CriterionResult(7, CRITERIA_NAMES[7], passed, worst, 0.0, {'rows': rows})


def criterion_global_subsolution(settings: AcceptanceSettings) -> CriterionResult:
    """The operator of the torsion function stays ≤ 1 inside Ω and outside Ω̄."""
    rows = []
    worst = -math.inf
    tol = 0.0
    for domain, h, p in _torsion_cases(settings):
        cfg = settings.cfg(p)
        u = solve_torsion(domain, cfg, Grid.covering(domain, h))
        report = check_global_subsolution(u, cfg, n_points=200, seed=settings.seed)
        tol = settings.scaled(10.0 * cfg.tol)
        worst = max(worst, report.value)
        rows.append({'domain': domain.kind, 'p': p, 'h': h, 'max': report.value,
                     **report.details})
    return CriterionResult(8, CRITERIA_NAMES[8], worst <= 1.0 + tol, worst, 1.0 + tol,
                           {'rows': rows})


def criterion_barriers(settings: AcceptanceSettings) -> CriterionResult:
    """Bump barrier bound with refinement stability, and the upper-obstacle barrier claims."""
    domain = _unit_interval()
    # the R/8 opening radius must stay above 2h
    h = min(settings.h1d, 1.0 / 256.0)
    grid = Grid.covering(domain, h)
    cfg = settings.cfg(2.0)
    spec = BarrierSpec('bump-lower', domain, np.array([-1.0]), settings.barrier_R,
                       p=cfg.p, s=cfg.s, lambda_cap=settings.lambda_cap)
    bound = verify_barrier_bound(spec, grid, settings.scheme(grid), n_lambda=settings.n_lambda,
                                 max_points=settings.max_points)
    xbar = np.array([-1.0 + 0.25 * settings.barrier_R])
    _, upper = build_upper_barrier(domain, settings.barrier_R, xbar, cfg, grid,
                                   anchor=np.array([-1.0]))
    passed = settings.strict and bound.passed and upper.passed
    details = {
        'C6': bound.details['C6'],
        'C6_refined': bound.details['C6_refined'],
        'lambda_1': bound.details['lambda_1'],
        'bound_pass': bound.passed,
        'upper_pass': upper.passed,
        'v_at_xbar': upper.details['v_at_xbar'],
        'lower_constant': upper.details['lower_constant'],
        'upper_constant': upper.details['upper_constant'],
    }
    return CriterionResult(9, CRITERIA_NAMES[9], bool(passed), bound.value, bound.tolerance, details)


def criterion_holder_calibration(settings: AcceptanceSettings) -> CriterionResult:
    """Synthetic |x - x₁|^β quotients give back β; the residual is the energy gradient."""
    domain = _unit_interval()
    grid = Grid.covering(domain, 1.0 / 512.0)
    fit_tol = settings.scaled(0.05)
    fits = []
    fit_ok = True
    for beta in (0.2, 0.5, 0.8):
        v = QuotientField.from_function(grid, lambda x, b=beta: np.abs(x[:, 0] + 1.0) ** b, 0.5)
        trace = holder_fit(v, [-1.0], R0=0.5, n_levels=3, tol=settings.solver.tol)
        ok = abs(trace.alpha - beta) <= fit_tol
        fit_ok = fit_ok and ok
        fits.append({'beta': beta, 'alpha': trace.alpha, 'pass': ok})

    rng = np.random.default_rng(settings.seed + 10)
    coarse = Grid.covering(domain, 1.0 / 64.0)
    grad_tol = settings.scaled(1e-5)
    grads = []
    for p in (2.0, 3.0):
        op = operator_for(coarse, p, 0.5)
        u = rng.uniform(0.0, 1.0, op.n)
        g = op.gradient(u)
        # ⟨g, φ⟩ ≥ ‖g‖²/(2‖g‖∞) > 0 for a mixed-sign φ following g
        phi = g * rng.uniform(0.5, 1.5, op.n) / float(np.max(np.abs(g)))
        exact = float(g @ phi)
        for delta in (1e-4, 1e-5):
            fd = (op.energy(u + delta * phi) - op.energy(u - delta * phi)) / (2.0 * delta)
            grads.append({'p': p, 'delta': delta, 'finite_difference': fd, 'gradient': exact,
                          'relative_error': abs(fd - exact) / abs(exact)})
    grad_worst = max(row['relative_error'] for row in grads)
    passed = fit_ok and grad_worst <= grad_tol
    worst_fit = max(abs(f['alpha'] - f['beta']) for f in fits)
    return CriterionResult(10, CRITERIA_NAMES[10], passed, worst_fit, fit_tol,
                           {'fits': fits, 'gradient': grads, 'gradient_tolerance': grad_tol})


def criterion_series(settings: AcceptanceSettings) -> CriterionResult:
    """S₁(10⁻⁶) at s = 1/2 is tiny and S₁ grows with α₁."""
    tol = settings.scaled(1e-4)
    small = series_S(1.0, 1e-6, 0.5, terms=200).upper
    alphas = np.linspace(0.05, 0.45, 10)
    values = [series_S(1.0, float(a), 0.5, terms=400).partial for a in alphas]
    monotone = all(b > a for a, b in zip(values, values[1:]))
    passed = small < tol and monotone and settings.strict
    return CriterionResult(11, CRITERIA_NAMES[11], passed, small, tol,
                           {'alphas': alphas.tolist(), 'values': values, 'monotone': monotone})


CRITERIA: Dict[int, Callable[[AcceptanceSettings], CriterionResult]] = {
    1: criterion_homogeneity,
    2: criterion_explicit,
    3: criterion_torsion_scaling,
    4: criterion_comparison,
    5: criterion_superposition,
    6: criterion_lewy_stampacchia,
    7: criterion_hopf,
    8: criterion_global_subsolution,
    9: criterion_barriers,
    10: criterion_holder_calibration,
    11: criterion_series,
}


def run_criterion(number: int, settings: AcceptanceSettings) -> CriterionResult:
    """Run one criterion; errors become a failed result."""
    start = time.perf_counter()
    try:
        result = CRITERIA[number](settings)
    except FracregError as exc:
        logger.error("Criterion %d (%s) raised %s: %s", number, CRITERIA_NAMES[number],
                     type(exc).__name__, exc)
        result = CriterionResult(number, CRITERIA_NAMES[number], False, math.nan, math.nan,
                                 error=f"{type(exc).__name__}: {exc}")
    result.seconds = time.perf_counter() - start
    logger.info("Criterion %d (%s): %s in %.1fs", number, result.name,
                'pass' if result.passed else 'FAIL', result.seconds)
    return result


def run_acceptance(settings: AcceptanceSettings,
                   criteria: Optional[Sequence[int]] = None) -> List[CriterionResult]:
    """Run the selected criteria (default: all eleven) in order."""
    selected = sorted(set(criteria)) if criteria else sorted(CRITERIA)
    return [run_criterion(number, settings) for number in selected]
