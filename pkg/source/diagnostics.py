#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Diagnostics Module
Boundary-regularity measurements on solutions: the quotient v = u/d_Ω^s,
the nonlocal excess on normal balls, oscillation of v on dyadic discs
D_{R₀/8ⁿ}(x₁), Hölder-exponent fits, and the main report that checks the
scaling law ‖u/d^s‖ ∝ ‖f‖^{1/(p-1)}.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from .errors import ContractError, FitError, PreconditionError, ResolutionError
from .geometry import Domain, normal_ball
from .grid import Field, Grid
from .operator import tail
from .report import CheckReport, DiagnosticsReport
from .solver import Load, SolverConfig, solve_dirichlet

logger = logging.getLogger(__name__)

DYADIC_BASE = 8.0
MIN_NODES = 20

# smallest default dyadic radius, in grid spacings
FIT_RADIUS_SPACINGS = 5.0


@dataclass(frozen=True, eq=False)
class QuotientField:
    """
    v = u/d_Ω^s on the included nodes; excluded nodes hold NaN.

    Nodes of Ω with d_Ω < h_cut are excluded. Synthetic quotients built by
    `from_function` may also include the nodes on ∂Ω.
    """

    grid: Grid
    values: np.ndarray
    included: np.ndarray
    s: float
    h_cut: float

    def sup(self) -> float:
        if not np.any(self.included):
            return 0.0
        return float(np.max(np.abs(self.values[self.included])))

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes[self.included]

    @property
    def included_values(self) -> np.ndarray:
        return self.values[self.included]

    def scaled(self, t: float) -> 'QuotientField':
        return QuotientField(self.grid, t * self.values, self.included, self.s, self.h_cut)

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[[np.ndarray], np.ndarray], s: float,
                      include_boundary: bool = True) -> 'QuotientField':
        """Sample a prescribed quotient on Ω (and on ∂Ω when asked), with no exclusion."""
        included = grid.interior.copy()
        if include_boundary:
            included |= np.atleast_1d(grid.domain.on_boundary(grid.nodes))
        values = np.full(grid.size, np.nan)
        values[included] = np.asarray(func(grid.nodes[included]), dtype=float).reshape(-1)
        return cls(grid, values, included, float(s), 0.0)


def quotient(u: Field, domain: Domain, s: float) -> QuotientField:
    """
    The quotient u/d_Ω^s at interior nodes with d_Ω ≥ h.

    Raises:
        ContractError: If u is a free field or lives on another domain's grid
    """
    grid = u.grid
    if u.kind != 'dirichlet':
        raise ContractError("Quotients are taken of dirichlet fields")
    if grid.domain != domain:
        raise ContractError("Field lives on a grid of another domain")
    included = grid.interior & (grid.distance >= grid.h * (1.0 - 1e-12))
    values = np.full(grid.size, np.nan)
    values[included] = u.values[included] / grid.distance[included] ** s
    return QuotientField(grid, values, included, float(s), grid.h)


@dataclass(frozen=True)
class ExcessValue:
    k: float
    R: float
    x0: tuple
    value: float
    nodes: int

    def to_dict(self) -> dict:
        return {'k': self.k, 'R': self.R, 'x0': list(self.x0), 'value': self.value,
                'nodes': self.nodes}


def excess(u: Union[Field, QuotientField], k: float, R: float, x0, domain: Domain,
           s: Optional[float] = None, min_nodes: int = MIN_NODES) -> ExcessValue:
    """
    Nonlocal excess: the mean of |u/d^s - k| over the grid nodes of the
    normal ball at x₀.

    Args:
        u: A dirichlet Field (s required) or a QuotientField
        k: Level
        R: Scale of the normal ball
        x0: Boundary point
        domain: The domain Ω
        s: Order, for Field input
        min_nodes: Node floor

    Raises:
        PreconditionError: If the normal ball cannot be built
        ResolutionError: If the ball holds fewer than min_nodes nodes
    """
    ball = normal_ball(domain, x0, R)
    if isinstance(u, QuotientField):
        grid, v = u.grid, u.values
    else:
        if s is None:
            raise PreconditionError("Excess of a field needs the order s")
        grid = u.grid
        with np.errstate(divide='ignore', invalid='ignore'):
            v = np.where(grid.interior, u.values / grid.distance ** s, np.nan)
    inside = ball.contains(grid.nodes)
    count = int(np.count_nonzero(inside))
    if count < min_nodes:
        raise ResolutionError(
            f"Normal ball at scale R = {R:g} holds {count} nodes, fewer than {min_nodes}"
        )
    value = math.fsum(np.abs(v[inside] - k)) / count
    return ExcessValue(k=float(k), R=float(R), x0=tuple(float(c) for c in ball.anchor),
                       value=value, nodes=count)


def _disc(v: QuotientField, x1, r: float) -> np.ndarray:
    gap = np.linalg.norm(v.grid.nodes - np.asarray(x1, dtype=float).reshape(v.grid.dim), axis=1)
    return v.included & (gap <= r * (1.0 + 1e-12))


def oscillation(v: QuotientField, x1, r: float, min_nodes: int = MIN_NODES) -> float:
    """
    max - min of v over the included nodes of the disc D_r(x₁).

    Raises:
        ResolutionError: If fewer than min_nodes nodes fall in the disc
    """
    inside = _disc(v, x1, r)
    count = int(np.count_nonzero(inside))
    if count < min_nodes:
        raise ResolutionError(f"D_r(x₁) with r = {r:g} holds {count} nodes, fewer than {min_nodes}")
    values = v.values[inside]
    return float(np.max(values) - np.min(values))


@dataclass
class OscillationTrace:
    """Dyadic oscillations at one boundary point and their log-log fit."""

    anchor: tuple
    radii: List[float]
    osc: List[float]
    alpha: Optional[float] = None
    C: Optional[float] = None
    residual: Optional[float] = None
    used: List[bool] = field(default_factory=list)
    monotone: bool = True
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, object]:
        out = {'radii': self.radii, 'osc': self.osc, 'alpha': self.alpha, 'C': self.C,
               'residual': self.residual, 'used': self.used, 'monotone': self.monotone}
        if self.error:
            out['error'] = self.error
        return out


def holder_fit(v: QuotientField, x1, R0: float, n_levels: int, tol: float = 1e-8,
               min_nodes: int = 4) -> OscillationTrace:
    """
    Fit osc_{D_r(x₁)} v ≈ C r^α over the radii R_n = R₀/8ⁿ, n < n_levels.

    Levels whose oscillation is at or below the noise floor, or whose disc
    holds fewer than min_nodes nodes, are reported but left out of the
    least-squares fit. The floor is relative, 100·tol·sup|v| rather than an
    absolute 100·tol, so the set of used levels and the fitted α do not
    change when v is multiplied by a positive constant.

    Raises:
        FitError: If n_levels < 3 or fewer than 3 levels remain
    """
    if n_levels < 3:
        raise FitError("A Hölder fit needs at least 3 dyadic levels")
    x1 = np.asarray(x1, dtype=float).reshape(v.grid.dim)
    radii = [R0 / DYADIC_BASE ** n for n in range(n_levels)]
    floor = 100.0 * tol * v.sup()
    osc: List[float] = []
    used: List[bool] = []
    for r in radii:
        try:
            value = oscillation(v, x1, r, min_nodes=min_nodes)
        except ResolutionError as exc:
            logger.warning("Dropping level r = %g: %s", r, exc)
            osc.append(float('nan'))
            used.append(False)
            continue
        osc.append(value)
        keep = value > floor
        if not keep:
            logger.info("Dropping level r = %g: oscillation %.3g below noise floor %.3g",
                        r, value, floor)
        used.append(keep)

    finite = [o for o in osc if np.isfinite(o)]
    slack = 10.0 * tol * max(v.sup(), 1.0)
    monotone = all(b <= a + slack for a, b in zip(finite, finite[1:]))
    trace = OscillationTrace(anchor=tuple(float(c) for c in x1), radii=radii, osc=osc,
                             used=used, monotone=monotone)
    if sum(used) < 3:
        raise FitError(f"Only {sum(used)} usable dyadic levels at x₁ = {trace.anchor}")
    log_r = np.log([r for r, u in zip(radii, used) if u])
    log_o = np.log([o for o, u in zip(osc, used) if u])
    slope, intercept = np.polyfit(log_r, log_o, 1)
    fitted = slope * log_r + intercept
    trace.alpha = float(slope)
    trace.C = float(np.exp(intercept))
    trace.residual = float(np.sqrt(np.mean((log_o - fitted) ** 2)))
    return trace


def holder_seminorm(v: QuotientField, alpha: float, block: int = 512) -> float:
    """max |v(x) - v(y)| / |x - y|^α over pairs of included nodes."""
    nodes = v.nodes
    values = v.included_values
    best = 0.0
    for start in range(0, nodes.shape[0], block):
        rows = slice(start, start + block)
        dist = np.linalg.norm(nodes[rows, None, :] - nodes[None, :, :], axis=2)
        diff = np.abs(values[rows, None] - values[None, :])
        with np.errstate(divide='ignore', invalid='ignore'):
            ratio = np.where(dist > 0.0, diff / dist ** alpha, 0.0)
        best = max(best, float(np.max(ratio)))
    return best


def s_normal_derivative(u: Field, domain: Domain, x0, s: float, n_points: int = 6) -> float:
    """
    lim u(x₀ + tν)/t^s as t → 0, extrapolated by a linear least-squares fit
    of u(x₀ + tν)/t^s over t = 2h, ..., (n_points + 1)h.
    """
    x0 = np.asarray(x0, dtype=float).reshape(domain.dim)
    nu = domain.inner_normal(x0)
    h = u.grid.h
    t = h * np.arange(2, n_points + 2)
    samples = np.asarray(u(x0 + t[:, None] * nu[None, :]), dtype=float).reshape(-1)
    _, intercept = np.polyfit(t, samples / t ** s, 1)
    return float(intercept)


def _scaled_load(f: Load, factor: float) -> Load:
    if isinstance(f, Field):
        return f * factor
    if callable(f):
        return lambda x: factor * np.asarray(f(x), dtype=float)
    return factor * float(f)


def _load_sup(grid: Grid, f: Load) -> float:
    if isinstance(f, Field):
        return f.sup()
    if callable(f):
        return float(np.max(np.abs(np.asarray(f(grid.nodes[grid.interior]), dtype=float))))
    return abs(float(f))


def _traces(v: QuotientField, anchors: np.ndarray, R0: float, n_levels: int,
            tol: float) -> List[OscillationTrace]:
    out = []
    for x1 in anchors:
        try:
            out.append(holder_fit(v, x1, R0, n_levels, tol=tol))
        except FitError as exc:
            logger.warning("No Hölder fit at %s: %s", x1, exc)
            out.append(OscillationTrace(anchor=tuple(float(c) for c in x1), radii=[], osc=[],
                                        error=str(exc)))
    return out


def default_excess_scale(domain: Domain) -> float:
    return 0.9 * domain.interior_sphere_radius() / 4.0


def default_fit_radius(domain: Domain, grid: Grid, n_levels: int) -> float:
    """
    Largest dyadic radius R₀ for the report: half the diameter, raised until
    the smallest radius R₀/8^(n_levels-1) spans FIT_RADIUS_SPACINGS grid
    spacings.
    """
    smallest = FIT_RADIUS_SPACINGS * grid.h * DYADIC_BASE ** (n_levels - 1)
    return max(0.5 * domain.diameter, smallest)


def _trace_usable(trace: OscillationTrace) -> bool:
    return trace.error is None and trace.alpha is not None and len(trace.osc) > 0


def theorem_main_report(domain: Domain, f: Load, cfg: SolverConfig, grid: Grid, t: float = 2.0,
                        anchors: Optional[Sequence] = None, R0: Optional[float] = None,
                        n_levels: int = 3, n_anchors: int = 4) -> DiagnosticsReport:
    """
    Solve, measure the quotient and its dyadic decay at the anchors, then
    rerun with the load t^{p-1}f and check sup|v'| = t·sup|v| and identical
    fitted exponents. An anchor without a fitted α fails the holder_fit and
    scaling_alpha checks. Each anchor row also carries the lower weak-Harnack
    monitor at level 0 on the excess scale.

    Args:
        domain: The domain Ω
        f: Load
        cfg: Solver settings
        grid: Grid covering Ω
        t: Scaling factor
        anchors: Boundary points (default: n_anchors points of ∂Ω, both
            endpoints in N = 1)
        R0: Largest dyadic radius (default: `default_fit_radius`)
        n_levels: Number of dyadic levels
        n_anchors: Anchor count when none are given

    Raises:
        NonConvergenceError: Propagated from the solver
    """
    p, s = cfg.p, cfg.s
    anchors = domain.boundary_points(n_anchors) if anchors is None else \
        np.asarray(anchors, dtype=float).reshape(-1, domain.dim)
    R0 = default_fit_radius(domain, grid, n_levels) if R0 is None else R0

    u, info = solve_dirichlet(domain, f, cfg, grid, return_info=True)
    v = quotient(u, domain, s)
    traces = _traces(v, anchors, R0, n_levels, cfg.tol)

    u_scaled = solve_dirichlet(domain, _scaled_load(f, t ** (p - 1.0)), cfg, grid)
    v_scaled = quotient(u_scaled, domain, s)
    traces_scaled = _traces(v_scaled, anchors, R0, n_levels, cfg.tol)

    sup_v, sup_scaled = v.sup(), v_scaled.sup()
    ratio = sup_scaled / sup_v if sup_v > 0.0 else (t if sup_scaled == 0.0 else np.inf)
    checks = [CheckReport('scaling_sup', abs(ratio - t) <= 1e-8 * t, ratio, 1e-8 * t,
                          {'sup': sup_v, 'sup_scaled': sup_scaled, 't': t})]

    # a zero solution has no oscillation to fit
    trivial = sup_v == 0.0 and sup_scaled == 0.0
    usable = sum(_trace_usable(tr) for tr in traces)
    checks.append(CheckReport('holder_fit', trivial or usable == len(traces), float(usable),
                              float(len(traces)),
                              {'errors': [tr.error for tr in traces if tr.error]}))

    gaps = []
    for a, b in zip(traces, traces_scaled):
        if a.alpha is None or b.alpha is None:
            gaps.append(0.0 if trivial else np.inf)
        else:
            gaps.append(abs(a.alpha - b.alpha))
    worst_gap = max(gaps) if gaps else 0.0
    checks.append(CheckReport('scaling_alpha', worst_gap <= 1e-8, worst_gap, 1e-8))
    monotone = sum(tr.monotone and (trivial or _trace_usable(tr)) for tr in traces)
    checks.append(CheckReport('trace_monotone', monotone == len(traces), float(monotone),
                              float(len(traces))))

    alphas = [tr.alpha for tr in traces if tr.alpha is not None]
    f_sup = _load_sup(grid, f)
    if f_sup > 0.0:
        if alphas:
            alpha = min(max(min(alphas), 0.0), 1.0)
            norm = sup_v + holder_seminorm(v, alpha)
            constant = norm / f_sup ** (1.0 / (p - 1.0))
            checks.append(CheckReport('holder_norm', bool(np.isfinite(constant)), constant,
                                      np.inf, {'alpha': alpha, 'norm': norm}))
        else:
            checks.append(CheckReport('holder_norm', False, np.inf, np.inf,
                                      {'error': 'no fitted exponent'}))

    R_ex = default_excess_scale(domain)
    excess_rows, tail_rows, anchor_rows = [], [], []
    for x1, trace in zip(anchors, traces):
        row = {'x1': x1.tolist(), 'trace': trace.to_dict(),
               's_normal_derivative': s_normal_derivative(u, domain, x1, s)}
        try:
            row['harnack'] = harnack_report(u, 0.0, R_ex, x1, domain, p, s, tol=cfg.tol).to_dict()
        except (ResolutionError, PreconditionError) as exc:
            row['harnack'] = {'name': 'harnack_lower', 'error': str(exc)}
        anchor_rows.append(row)
        try:
            excess_rows.append(excess(v, 0.0, R_ex, x1, domain).to_dict())
        except ResolutionError as exc:
            excess_rows.append({'k': 0.0, 'R': R_ex, 'x0': x1.tolist(), 'error': str(exc)})
        for q in sorted({1.0, p - 1.0}):
            tail_rows.append(tail(u, q, R_ex, x1, s).to_dict())

    return DiagnosticsReport(
        domain=domain.to_dict(), p=p, s=s, h=grid.h, n=grid.n_interior,
        sup_quotient=sup_v, anchors=anchor_rows, excess=excess_rows, tails=tail_rows,
        checks=checks, meta={'solve': info.to_dict(), 'R0': R0, 'n_levels': n_levels},
    )


def harnack_report(u: Field, level: float, R: float, x0, domain: Domain, p: float, s: float,
                   side: str = 'lower', tol: float = 1e-8) -> CheckReport:
    """
    Weak-Harnack monitor on D_{R/2}(x₀).

    side='lower' reports inf (v - m) / Ex(u, m); side='upper' reports
    inf (M - v) / Ex(u, M). Both come with the tails tail₁ and tail_{p-1} and
    the sign of sup u on D_{R/2}. The check passes when the infimum is
    nonnegative up to tol·max(1, sup|v|).
    """
    if side not in ('lower', 'upper'):
        raise PreconditionError(f"side must be 'lower' or 'upper', got {side}")
    v = quotient(u, domain, s)
    ex = excess(v, level, R, x0, domain)
    half = _disc(v, x0, 0.5 * R)
    if not np.any(half):
        raise ResolutionError(f"D_(R/2) at R = {R:g} holds no included node")
    gap = v.values[half] - level if side == 'lower' else level - v.values[half]
    inf_gap = float(np.min(gap))
    ratio = inf_gap / ex.value if ex.value > 0.0 else None
    x0 = np.asarray(x0, dtype=float).reshape(domain.dim)
    near = np.linalg.norm(u.grid.nodes - x0, axis=1) < 0.5 * R
    details = {
        'side': side,
        'level': level,
        'excess': ex.value,
        'inf_gap': inf_gap,
        'ratio': ratio,
        'sup_u_half': float(np.max(u.values[near])) if np.any(near) else 0.0,
        'tails': [tail(u, q, R, x0, s).to_dict() for q in sorted({1.0, p - 1.0})],
    }
    slack = tol * max(1.0, v.sup())
    return CheckReport(f'harnack_{side}', inf_gap >= -slack, inf_gap, -slack, details)
