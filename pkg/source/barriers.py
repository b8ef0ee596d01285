#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Barriers Module
Explicit barriers near a boundary point x₀ and numerical checks of their
defining bounds:

* bump-perturbed distance powers (1 ± λφ)·d_Ω^s, whose operator stays
  bounded by C(1 + |λ|/R^s),
* the superposed barrier that replaces a base function by u on the normal
  ball and gains a drop proportional to the excess,
* the upper barrier obtained from a double obstacle problem between a
  torsion function of an annulus and a reversed small torsion function.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConstructionError, PreconditionError
from .geometry import AnnulusSet, Ball, Domain, as_points, opened_region
from .grid import Field, Grid
from .operator import merged, pointwise_flap, superpose
from .quadrature import QuadratureScheme
from .report import CheckReport
from .solver import Obstacles, SolverConfig, solve_dirichlet, solve_double_obstacle

logger = logging.getLogger(__name__)

BARRIER_KINDS = ('bump-lower', 'bump-upper', 'superposed', 'obstacle-upper')

# recorded in every barrier report so fitted constants are reproducible
BUMP_PROFILE = 'exp-smooth-step'

# doubling cap of the upper-obstacle multiplier
LAMBDA_CAP = 2.0 ** 30


def smooth_step(t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """S(t) = q(t) / (q(t) + q(1 - t)) with q(t) = exp(-1/t) for t > 0, else 0."""
    t = np.asarray(t, dtype=float)

    def q(a):
        with np.errstate(divide='ignore', over='ignore'):
            return np.where(a > 0.0, np.exp(-1.0 / np.where(a > 0.0, a, 1.0)), 0.0)

    num = q(t)
    out = num / (num + q(1.0 - t))
    return float(out) if out.ndim == 0 else out


def bump_profile(r: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Radial profile g: 1 on [0, 1/2], 0 on [1, ∞) and S(2(1 - r)) between."""
    r = np.asarray(r, dtype=float)
    out = np.where(r <= 0.5, 1.0, np.where(r >= 1.0, 0.0, smooth_step(2.0 * (1.0 - r))))
    return float(out) if out.ndim == 0 else out


def bump_eval(x) -> Union[float, np.ndarray]:
    """
    Smooth bump φ(x) = g(|x|) supported in the unit ball.

    A scalar is a 1D point; for arrays the last axis holds the coordinates.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return bump_profile(abs(float(x)))
    return bump_profile(np.linalg.norm(x, axis=-1))


@dataclass(frozen=True, eq=False)
class BarrierSpec:
    """
    One barrier near the boundary point `anchor`.

    Attributes:
        kind: One of BARRIER_KINDS
        domain: The domain Ω
        anchor: Boundary point x₀
        R: Scale, R < ρ/4
        lam: Bump amplitude λ
        multiplier: m (lower kinds) or M (upper kinds)
        p: Growth exponent
        s: Order
        lambda_cap: λ₁, the largest |λ| swept for bump kinds
    """

    kind: str
    domain: Domain
    anchor: np.ndarray
    R: float
    lam: float = 0.0
    multiplier: float = 1.0
    p: float = 2.0
    s: float = 0.5
    lambda_cap: float = 0.5

    def __post_init__(self):
        if self.kind not in BARRIER_KINDS:
            raise PreconditionError(f"Unknown barrier kind '{self.kind}'")
        anchor = np.asarray(self.anchor, dtype=float).reshape(self.domain.dim)
        object.__setattr__(self, 'anchor', anchor)
        if not self.domain.on_boundary(anchor):
            raise PreconditionError("Barriers are anchored at boundary points")
        rho = self.domain.interior_sphere_radius()
        if not 0.0 < self.R < rho / 4.0:
            raise PreconditionError(f"Barriers need 0 < R < ρ/4 = {rho / 4.0:g}, got R = {self.R:g}")
        if self.kind.startswith('bump') and abs(self.lam) > self.lambda_cap:
            raise PreconditionError(f"|λ| = {abs(self.lam):g} exceeds λ₁ = {self.lambda_cap:g}")

    def with_lambda(self, lam: float) -> 'BarrierSpec':
        return BarrierSpec(self.kind, self.domain, self.anchor, self.R, lam, self.multiplier,
                           self.p, self.s, self.lambda_cap)

    def function(self) -> Callable[[np.ndarray], np.ndarray]:
        """w_λ as a vectorized function of (m, N) point arrays."""
        return lambda y: barrier_w_lambda(self, y)

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'anchor': self.anchor.tolist(), 'R': self.R,
                'lambda': self.lam, 'multiplier': self.multiplier, 'bump': BUMP_PROFILE}


def barrier_w_lambda(spec: BarrierSpec, x) -> Union[float, np.ndarray]:
    """
    Bump-perturbed distance power.

    bump-lower: (1 + λφ(2(x - x₀)/R))·d_Ω^s(x)
    bump-upper: M(1 - λφ((x - x₀)/R))·d_Ω^s(x)
    """
    if spec.kind not in ('bump-lower', 'bump-upper'):
        raise PreconditionError("barrier_w_lambda needs a bump kind")
    pts, single = as_points(x, spec.domain.dim)
    ds = spec.domain.distance(pts) ** spec.s
    if spec.kind == 'bump-lower':
        out = (1.0 + spec.lam * bump_eval(2.0 * (pts - spec.anchor) / spec.R)) * ds
    else:
        out = spec.multiplier * (1.0 - spec.lam * bump_eval((pts - spec.anchor) / spec.R)) * ds
    return float(out[0]) if single else out


def _admissible_nodes(grid: Grid, center: np.ndarray, radius: float, limit: int) -> np.ndarray:
    """Evenly thinned nodes of D_radius(center) with d ≥ 2h."""
    gap = np.linalg.norm(grid.nodes - center, axis=1)
    keep = np.flatnonzero(grid.interior & (grid.distance >= 2.0 * grid.h)
                          & (gap < radius))
    if keep.size > limit:
        keep = keep[np.linspace(0, keep.size - 1, limit).round().astype(int)]
    return grid.nodes[keep]


def _sweep(spec: BarrierSpec, lambdas: Sequence[float], points: np.ndarray,
           scheme: QuadratureScheme) -> List[dict]:
    rows = []
    for lam in lambdas:
        w = spec.with_lambda(lam)
        values = np.atleast_1d(pointwise_flap(w.function(), points, spec.p, spec.s,
                                              scheme=scheme, domain=spec.domain))
        k_lam = float(np.max(np.abs(values)))
        rows.append({'lambda': float(lam), 'K': k_lam,
                     'ratio': k_lam / (1.0 + abs(lam) / spec.R ** spec.s)})
        logger.debug("λ = %+.3f: K = %.6g", lam, k_lam)
    return rows


def verify_barrier_bound(spec: BarrierSpec, grid: Grid, scheme: QuadratureScheme,
                         n_lambda: int = 2, max_points: int = 6) -> CheckReport:
    """
    λ-sweep of K(λ) = sup |(-Δ)_p^s w_λ| over D_{R/2}(x₀) ∩ {d ≥ 2h}.

    The sweep is the sign-symmetric grid of 2·n_lambda + 1 values in
    [-λ₁, λ₁]. The bound holds when K(λ)/(1 + |λ|/R^s) stays finite and its
    maximum C₆ agrees within a factor 2 with the same sweep on the refined
    grid.

    Returns:
        CheckReport with value C₆ and details: the sweep rows on both
        levels, λ₁ and the half-space constant C_half = max K(λ)R^s/|λ|
    """
    if spec.kind not in ('bump-lower', 'bump-upper'):
        raise PreconditionError("verify_barrier_bound needs a bump kind")
    steps = spec.lambda_cap * np.arange(1, n_lambda + 1) / n_lambda
    lambdas = np.concatenate([-steps[::-1], [0.0], steps])
    levels = []
    for level_grid, level_scheme in ((grid, scheme), (grid.refined(), scheme.refined())):
        points = _admissible_nodes(level_grid, spec.anchor, 0.5 * spec.R, max_points)
        if points.shape[0] == 0:
            raise PreconditionError("No admissible node in D_{R/2}; refine the grid")
        levels.append(_sweep(spec, lambdas, points, level_scheme))
    coarse, fine = levels
    c6 = max(row['ratio'] for row in coarse)
    c6_fine = max(row['ratio'] for row in fine)
    finite = np.isfinite(c6) and np.isfinite(c6_fine) and c6 > 0.0
    stable = finite and 0.5 <= c6_fine / c6 <= 2.0

    base = next(row['ratio'] for row in coarse if row['lambda'] == 0.0)
    sane = [abs(row['lambda']) for row in coarse
            if 1.0 - abs(row['lambda']) >= 0.5 and row['ratio'] <= 2.0 * base]
    half = [row['K'] * spec.R ** spec.s / abs(row['lambda']) for row in coarse if row['lambda'] != 0.0]
    details = {
        'barrier': spec.to_dict(),
        'rows': coarse,
        'rows_refined': fine,
        'C6': c6,
        'C6_refined': c6_fine,
        'lambda_1': max(sane) if sane else 0.0,
        'C_half': max(half) if half else None,
    }
    return CheckReport('barrier_bound', bool(stable), c6, 2.0, details)


def build_superposed(spec: BarrierSpec, w: Union[Field, Callable], u: Union[Field, Callable],
                     ball: Ball, scheme: QuadratureScheme, grid: Optional[Grid] = None,
                     max_points: int = 6):
    """
    Replace w by u on the normal ball and measure the operator drop on
    D_R(x₀).

    Every evaluation point reports the total (-Δ)_p^s w̃ and the correction
    relative to w. The fitted drop constant is c = min -correction·R^s/Ex^{p-1}
    with Ex the mean of |u/d^s - m| over the ball. When u ≥ w + δ on the
    ball, the correction must not exceed -2^{2-p}δ^{p-1}∫_B |x - y|^{-N-ps} dy.

    Returns:
        (merged function or Field, CheckReport)

    Raises:
        PreconditionError: If the ball meets D_R(x₀)
    """
    domain = spec.domain
    if float(np.linalg.norm(ball.center - spec.anchor)) - ball.radius < spec.R:
        raise PreconditionError("The merge ball overlaps the evaluation region D_R(x₀)")
    grid = w.grid if isinstance(w, Field) else grid
    if grid is None:
        raise PreconditionError("Evaluation points come from a grid; pass one for functions")
    points = _admissible_nodes(grid, spec.anchor, spec.R, max_points)
    if isinstance(w, Field):
        inside = ball.contains(grid.nodes)
        nodes = grid.nodes[inside]
        weights = np.full(nodes.shape[0], grid.cell_volume)
        w_at = w.values[inside]
        u_at = u.values[inside] if isinstance(u, Field) else np.asarray(u(nodes), dtype=float)
    else:
        nodes, weights = ball.quadrature(scheme.ball_order)
        w_at = np.asarray(w(nodes), dtype=float).reshape(-1)
        u_at = np.asarray(u(nodes), dtype=float).reshape(-1)
    ds = domain.distance(nodes) ** spec.s
    ex = float(weights @ np.abs(u_at / ds - spec.multiplier)) / float(np.sum(weights))
    gap = float(np.min(u_at - w_at))

    rows = []
    drop_ok = True
    for x in points:
        total, correction = superpose(w, u, ball, x, spec.p, spec.s, scheme, domain=domain)
        row = {'x': x.tolist(), 'total': total, 'base': total - correction,
               'correction': correction}
        if gap > 0.0:
            mass = float(weights @ np.linalg.norm(nodes - x, axis=1) ** (-(domain.dim + spec.p * spec.s)))
            bound = -2.0 ** (2.0 - spec.p) * gap ** (spec.p - 1.0) * mass
            row['drop_bound'] = bound
            drop_ok = drop_ok and correction <= bound + 1e-9 * max(1.0, abs(bound))
        rows.append(row)
    if ex > 0.0:
        c_fit = min(-row['correction'] * spec.R ** spec.s / ex ** (spec.p - 1.0) for row in rows)
    else:
        c_fit = 0.0
    details = {'barrier': spec.to_dict(), 'excess': ex, 'delta': gap, 'c_fit': c_fit,
               'rows': rows}
    report = CheckReport('superposed_drop', bool(drop_ok), c_fit, 0.0, details)
    return merged(w, u, ball), report


def build_upper_barrier(domain: Domain, R: float, xbar, cfg: SolverConfig, grid: Grid,
                        anchor=None) -> Tuple[Field, CheckReport]:
    """
    Upper barrier from a double obstacle problem.

    1. E_R: opening of D_{4R} \\ D_{3R/4} by balls of radius R/8.
    2. Lower obstacle φ = R^{-s/(p-1)}·(torsion function of E_R).
    3. Upper obstacle ψ = λR^{-s/(p-1)}·(u(x̄) - u)_+ with u the torsion
       function of B_{R/8}(x̄); λ doubles until ψ ≥ φ.
    4. v solves the double obstacle problem and is extended outside D_{3R}
       by max(v, c·d^s), c the measured min of v/d^s on D_{3R} \\ D_R.

    Args:
        domain: The domain Ω
        R: Scale, R < ρ/4 and R/8 ≥ 2h
        xbar: Point of D_{R/2}(x₀); snapped to the nearest interior node
        cfg: Solver settings
        grid: Grid covering Ω
        anchor: Boundary point x₀ (default: the projection of x̄)

    Returns:
        (extended barrier Field, CheckReport of the four barrier claims)

    Raises:
        PreconditionError: If R or x̄ are out of range
        ConstructionError: If λ reaches its cap before ψ ≥ φ
    """
    p, s = cfg.p, cfg.s
    rho = domain.interior_sphere_radius()
    if not 0.0 < R < rho / 4.0:
        raise PreconditionError(f"Upper barriers need 0 < R < ρ/4 = {rho / 4.0:g}, got R = {R:g}")
    flat, _ = grid.locate(xbar)
    if not grid.interior[flat[0]]:
        raise PreconditionError("x̄ must lie inside Ω")
    xbar = grid.nodes[flat[0]]
    x0 = domain.metric_projection(xbar) if anchor is None else \
        np.asarray(anchor, dtype=float).reshape(domain.dim)
    if not float(np.linalg.norm(xbar - x0)) < 0.5 * R:
        raise PreconditionError("x̄ must lie in D_{R/2}(x₀)")
    scale = R ** (-s / (p - 1.0))
    gap = np.linalg.norm(grid.nodes - x0, axis=1)

    region = opened_region(domain, AnnulusSet(x0, 0.75 * R, 4.0 * R), R / 8.0, grid)
    lower = scale * solve_dirichlet(domain, 1.0, cfg, grid, mask=region.mask)

    small = np.linalg.norm(grid.nodes - xbar, axis=1) < R / 8.0
    u_small = solve_dirichlet(domain, 1.0, cfg, grid, mask=small)
    peak = float(u_small.values[flat[0]])
    reversed_small = np.maximum(peak - u_small.values, 0.0)
    interior = grid.interior
    lam = 1.0
    while np.any(lam * scale * reversed_small[interior] < lower.values[interior]):
        lam *= 2.0
        if lam > LAMBDA_CAP:
            raise ConstructionError("Upper obstacle multiplier reached its cap before ψ ≥ φ")
    if lam > 1.0:
        logger.info("Upper obstacle multiplier raised to λ = %g", lam)
    upper = Field(grid, np.where(interior, lam * scale * reversed_small, 0.0))

    v = solve_double_obstacle(domain, Obstacles(lower, upper), cfg, grid)
    ds = np.where(interior, grid.distance, 0.0) ** s
    ring = interior & (grid.distance >= grid.h) & (gap >= R) & (gap < 3.0 * R)
    c_ring = float(np.min(v.values[ring] / ds[ring]))
    extended = np.where(gap >= 3.0 * R, np.maximum(v.values, c_ring * ds), v.values)
    v_ext = Field(grid, np.where(interior, extended, 0.0))

    tol = 10.0 * cfg.tol
    points = _admissible_nodes(grid, x0, 2.0 * R, grid.size)
    flap = np.atleast_1d(pointwise_flap(v_ext, points, p, s)) if points.shape[0] else np.zeros(1)
    c_operator = float(np.max(np.abs(flap))) * R ** s
    outside = interior & (grid.distance >= grid.h) & (gap >= R)
    c_lower = float(np.min(v_ext.values[outside] / ds[outside]))
    in_2r = interior & (gap < 2.0 * R)
    c_upper = float(np.max(np.abs(v_ext.values[in_2r]))) / R ** s
    at_xbar = float(v_ext.values[flat[0]])
    ordered = bool(np.all(lower.values - tol <= v.values) and np.all(v.values <= upper.values + tol))
    inradius = region.inradius()

    details = {
        'anchor': x0.tolist(),
        'xbar': xbar.tolist(),
        'R': R,
        'lambda': lam,
        'operator_bound': c_operator,
        'v_at_xbar': at_xbar,
        'lower_constant': c_lower,
        'upper_constant': c_upper,
        'extension_constant': c_ring,
        'ordered': ordered,
        'nonnegative': bool(np.min(v_ext.values) >= -tol),
        'region_inradius': inradius,
        'region_inradius_ok': inradius >= R / 16.0,
        'bump': BUMP_PROFILE,
    }
    passed = (at_xbar == 0.0 and c_lower > 0.0 and np.isfinite(c_operator)
              and np.isfinite(c_upper) and ordered and details['nonnegative'])
    return v_ext, CheckReport('upper_barrier', bool(passed), c_lower, 0.0, details)
