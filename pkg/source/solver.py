#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Solver Module
Dirichlet, torsion and double-obstacle problems by minimization of the
discrete energy J(u) - <f, u>, and the report-only checks built on them:
comparison, global subsolution, Hopf positivity, torsion bounds and the
Lewy-Stampacchia sandwich.

The default method is a two-point-step (Barzilai-Borwein) gradient iteration
with a nonmonotone Armijo safeguard, projected onto the obstacle box when
obstacles are present.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import minimize
from scipy.sparse.linalg import LinearOperator, cg

from .errors import (ConfigError, ContractError, NonConvergenceError, NumericError,
                     PreconditionError)
from .geometry import Domain
from .grid import Field, Grid
from .operator import DiscreteOperator, nth_root, operator_for, pointwise_flap
from .report import CheckReport

logger = logging.getLogger(__name__)

METHODS = ('bb', 'lbfgs')

Load = Union[Field, Callable[[np.ndarray], np.ndarray], float]

# Barzilai-Borwein step clamp
_ALPHA_MIN = 1e-30
_ALPHA_MAX = 1e30
# relative slack of the descent check
_DESCENT_SLACK = 4.0 * np.finfo(float).eps


@dataclass(frozen=True)
class SolverConfig:
    """
    Solver settings.

    Attributes:
        p: Growth exponent, p >= 2
        s: Order, 0 < s < 1
        tol: Relative residual tolerance
        max_iter: Iteration cap
        method: 'bb' (two-point step) or 'lbfgs' (limited-memory quasi-Newton)
        armijo: Sufficient-decrease constant
        backtrack: Step reduction factor of the line search
        nonmonotone_window: Number of past energies the line search compares
            against; 1 gives a monotone search
        project: Enforce obstacles by clamping
        compensate: Near-diagonal kernel compensation
        workers: Threads for blocked assembly
    """

    p: float = 2.0
    s: float = 0.5
    tol: float = 1e-8
    max_iter: int = 50000
    method: str = 'bb'
    armijo: float = 1e-4
    backtrack: float = 0.5
    nonmonotone_window: int = 10
    project: bool = True
    compensate: bool = True
    workers: int = 1

    def __post_init__(self):
        if not self.p >= 2.0:
            raise ConfigError(f"p must be at least 2, got {self.p}")
        if not 0.0 < self.s < 1.0:
            raise ConfigError(f"s must lie in (0, 1), got {self.s}")
        if not self.tol > 0.0:
            raise ConfigError("Solver tolerance must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.method not in METHODS:
            raise ConfigError(f"Unknown method '{self.method}'; choose from {METHODS}")
        if not 0.0 < self.armijo < 1.0 or not 0.0 < self.backtrack < 1.0:
            raise ConfigError("Line-search constants must lie in (0, 1)")
        if self.nonmonotone_window < 1:
            raise ConfigError("nonmonotone_window must be at least 1")

    def with_(self, **changes) -> 'SolverConfig':
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Obstacles:
    """Lower and upper obstacles; None stands for ∓∞."""

    lower: Optional[Union[Field, Callable, float]] = None
    upper: Optional[Union[Field, Callable, float]] = None

    def bounds(self, grid: Grid, nodes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Obstacle values on the given nodes.

        Raises:
            ContractError: If the lower obstacle exceeds the upper one
        """
        lo = _node_values(grid, self.lower, nodes, -np.inf)
        hi = _node_values(grid, self.upper, nodes, np.inf)
        if np.any(lo > hi):
            raise ContractError("Obstacles are infeasible: lower exceeds upper at some node")
        return lo, hi


def _node_values(grid: Grid, obj, nodes: np.ndarray, default: float) -> np.ndarray:
    if obj is None:
        return np.full(nodes.size, default)
    if isinstance(obj, Field):
        if not obj.grid.same_as(grid):
            raise ContractError("Obstacle lives on a different grid")
        return obj.values[nodes].astype(float)
    if callable(obj):
        return np.broadcast_to(np.asarray(obj(grid.nodes[nodes]), dtype=float).reshape(-1),
                               (nodes.size,)).copy()
    return np.full(nodes.size, float(obj))


def _full_load(grid: Grid, f: Load) -> np.ndarray:
    if isinstance(f, Field):
        if not f.grid.same_as(grid):
            raise ContractError("Load lives on a different grid")
        return f.values.astype(float)
    if callable(f):
        return np.broadcast_to(np.asarray(f(grid.nodes), dtype=float).reshape(-1),
                               (grid.size,)).copy()
    return np.full(grid.size, float(f))


@dataclass
class SolveInfo:
    """
    Iteration record of one solve.

    energies[k] is the objective after the k-th accepted step (k = 0 is the
    starting point) and reference_energies[k] the value it was accepted
    against: the window maximum for BB, the previous energy for L-BFGS-B.
    """

    method: str
    iterations: int = 0
    residual_norm: float = 0.0
    threshold: float = 0.0
    converged: bool = True
    descent: bool = True
    energies: List[float] = field(default_factory=list)
    reference_energies: List[float] = field(default_factory=list)
    residual_history: List[float] = field(default_factory=list)

    def check_descent(self) -> bool:
        """
        Every accepted energy lies at or below its reference and the last
        one at or below the first, up to a few ulps. Sets `descent`.
        """
        ok = True
        for value, reference in zip(self.energies[1:], self.reference_energies[1:]):
            if value > reference + _DESCENT_SLACK * abs(reference):
                ok = False
                break
        if ok and self.energies:
            first, last = self.energies[0], self.energies[-1]
            ok = last <= first + _DESCENT_SLACK * abs(first)
        self.descent = ok
        return ok

    def to_dict(self) -> dict:
        return {'method': self.method, 'iterations': self.iterations,
                'residual_norm': self.residual_norm, 'threshold': self.threshold,
                'converged': self.converged, 'descent': self.descent}


# ----------------------------------------------------------------------
# minimization

def _projected_gradient(x: np.ndarray, g: np.ndarray, lo: Optional[np.ndarray],
                        hi: Optional[np.ndarray]) -> np.ndarray:
    """Gradient with the components blocked by active bounds removed."""
    if lo is None:
        return g
    pg = g.copy()
    pg[(x <= lo) & (g > 0.0)] = 0.0
    pg[(x >= hi) & (g < 0.0)] = 0.0
    pg[lo == hi] = 0.0
    return pg


def _linear_solve(op: DiscreteOperator, b: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Conjugate gradients on the p = 2 operator of the same kernel."""
    n = b.size
    matrix = LinearOperator((n, n), matvec=op.apply_linear, dtype=float)
    rtol = 0.5 * cfg.tol / math.sqrt(n)
    x, status = cg(matrix, b, rtol=rtol, atol=0.0, maxiter=cfg.max_iter)
    if status > 0:
        logger.warning("Conjugate gradients stopped after %d iterations", status)
    return x


def _barzilai_borwein(op: DiscreteOperator, b: np.ndarray, x: np.ndarray,
                      lo: Optional[np.ndarray], hi: Optional[np.ndarray],
                      threshold: float, cfg: SolverConfig, info: SolveInfo) -> np.ndarray:
    bounded = lo is not None

    def objective(z: np.ndarray) -> Tuple[float, np.ndarray]:
        value, grad = op.energy_and_gradient(z)
        return value - float(b @ z), grad - b

    value, grad = objective(x)
    window = deque([value], maxlen=cfg.nonmonotone_window)
    info.energies.append(value)
    info.reference_energies.append(value)
    res = float(np.max(np.abs(_projected_gradient(x, grad, lo, hi))))
    info.residual_history.append(res)
    x_scale = float(np.max(np.abs(x)))
    g_scale = float(np.max(np.abs(grad)))
    alpha = x_scale / g_scale if x_scale > 0.0 and g_scale > 0.0 else 1.0 / max(g_scale, 1e-300)

    for iteration in range(1, cfg.max_iter + 1):
        if res <= threshold:
            info.iterations = iteration - 1
            info.residual_norm = res
            info.converged = True
            return x
        trial = x - alpha * grad
        if bounded:
            trial = np.clip(trial, lo, hi)
        step = trial - x
        slope = float(grad @ step)
        reference = max(window)
        lam = 1.0
        while True:
            x_new = trial if lam == 1.0 else x + lam * step
            if bounded and lam != 1.0:
                x_new = np.clip(x_new, lo, hi)
            value_new, grad_new = objective(x_new)
            if value_new <= reference + cfg.armijo * lam * slope:
                break
            lam *= cfg.backtrack
            if lam < 1e-20:
                info.iterations = iteration
                info.residual_norm = res
                info.converged = False
                raise NonConvergenceError(
                    f"Line search stalled at residual {res:.3e} (threshold {threshold:.3e})",
                    residual_norm=res, iterations=iteration,
                )
        s_vec = x_new - x
        y_vec = grad_new - grad
        sy = float(s_vec @ y_vec)
        if sy > 0.0:
            alpha = min(max(float(s_vec @ s_vec) / sy, _ALPHA_MIN), _ALPHA_MAX)
        x, value, grad = x_new, value_new, grad_new
        window.append(value)
        info.energies.append(value)
        info.reference_energies.append(reference)
        res = float(np.max(np.abs(_projected_gradient(x, grad, lo, hi))))
        info.residual_history.append(res)
        if iteration % 500 == 0:
            logger.debug("iteration %d: residual %.3e, energy %.12e", iteration, res, value)

    info.iterations = cfg.max_iter
    info.residual_norm = res
    info.converged = res <= threshold
    if not info.converged:
        raise NonConvergenceError(
            f"No convergence in {cfg.max_iter} iterations (residual {res:.3e}, "
            f"threshold {threshold:.3e})",
            residual_norm=res, iterations=cfg.max_iter,
        )
    return x


def _quasi_newton(op: DiscreteOperator, b: np.ndarray, x: np.ndarray,
                  lo: Optional[np.ndarray], hi: Optional[np.ndarray],
                  threshold: float, cfg: SolverConfig, info: SolveInfo) -> np.ndarray:
    def objective(z: np.ndarray) -> Tuple[float, np.ndarray]:
        value, grad = op.energy_and_gradient(z)
        return value - float(b @ z), grad - b

    def record(z: np.ndarray) -> None:
        value, grad = objective(z)
        info.reference_energies.append(info.energies[-1] if info.energies else value)
        info.energies.append(value)
        info.residual_history.append(float(np.max(np.abs(_projected_gradient(z, grad, lo, hi)))))

    record(x)

    bounds = None if lo is None else list(zip(lo, hi))
    result = minimize(objective, x, jac=True, method='L-BFGS-B', bounds=bounds, callback=record,
                      options={'maxiter': cfg.max_iter, 'maxcor': 10, 'gtol': threshold,
                               'ftol': 0.0})
    x = result.x
    if lo is not None:
        x = np.clip(x, lo, hi)
    _, grad = objective(x)
    res = float(np.max(np.abs(_projected_gradient(x, grad, lo, hi))))
    info.iterations = int(result.nit)
    info.residual_norm = res
    info.converged = res <= threshold
    if not info.converged:
        raise NonConvergenceError(
            f"L-BFGS-B ended ({result.message}) at residual {res:.3e}, threshold {threshold:.3e}",
            residual_norm=res, iterations=int(result.nit),
        )
    return x


def _minimize(op: DiscreteOperator, b: np.ndarray, cfg: SolverConfig,
              lo: Optional[np.ndarray] = None, hi: Optional[np.ndarray] = None,
              x0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, SolveInfo]:
    info = SolveInfo(method=cfg.method)
    b_scale = float(np.max(np.abs(b)))
    threshold = cfg.tol * b_scale if b_scale > 0.0 else cfg.tol
    info.threshold = threshold

    if x0 is None:
        if b_scale == 0.0:
            x0 = np.zeros(op.n)
        elif op.linear:
            x0 = _linear_solve(op, b, cfg)
        else:
            order = np.searchsorted(np.flatnonzero(op.mask), op.nodes)
            linear = DiscreteOperator(op.grid, 2.0, op.s, mask=op.mask, compensate=cfg.compensate,
                                      workers=op.workers, order=order)
            w = _linear_solve(linear, b, cfg)
            curvature = op.p * op.energy(w)
            work = float(b @ w)
            x0 = nth_root(work / curvature, op.p - 1.0) * w if curvature > 0.0 and work > 0.0 else w
    if lo is not None:
        x0 = np.clip(x0, lo, hi)
        if np.all(lo == hi):
            info.iterations = 0
            return x0, info

    if cfg.method == 'lbfgs':
        x = _quasi_newton(op, b, x0, lo, hi, threshold, cfg, info)
    else:
        x = _barzilai_borwein(op, b, x0, lo, hi, threshold, cfg, info)
    if not info.check_descent():
        raise NumericError(
            f"{cfg.method} accepted a step above its reference energy "
            f"(start {info.energies[0]:.12e}, end {info.energies[-1]:.12e})"
        )
    logger.info("%s solve on %d nodes: %d iterations, residual %.3e",
                cfg.method, op.n, info.iterations, info.residual_norm)
    return x, info


def _check_grid(domain: Domain, grid: Grid) -> None:
    if grid.domain != domain:
        raise ContractError("Grid was built for a different domain")


def _to_field(grid: Grid, op: DiscreteOperator, x: np.ndarray) -> Field:
    values = np.zeros(grid.size)
    values[op.nodes] = x
    kind = 'dirichlet' if not np.any(op.mask & ~grid.interior) else 'free'
    return Field(grid, values, kind)


def _operator(grid: Grid, cfg: SolverConfig, mask: Optional[np.ndarray],
              node_order: Optional[np.ndarray]) -> DiscreteOperator:
    if node_order is not None:
        return DiscreteOperator(grid, cfg.p, cfg.s, mask=mask, compensate=cfg.compensate,
                                workers=cfg.workers, order=node_order)
    return operator_for(grid, cfg.p, cfg.s, mask=mask, compensate=cfg.compensate,
                        workers=cfg.workers)


def solve_dirichlet(domain: Domain, f: Load, cfg: SolverConfig, grid: Grid, *,
                    mask: Optional[np.ndarray] = None,
                    node_order: Optional[np.ndarray] = None,
                    return_info: bool = False):
    """
    Solve (-Δ)_p^s u = f in Ω, u = 0 outside.

    Args:
        domain: The domain Ω
        f: Load as a Field, a function or a constant
        cfg: Solver settings
        grid: Grid covering Ω
        mask: Nodes carrying unknowns (default: the nodes of Ω)
        node_order: Optional permutation of the unknowns
        return_info: Also return the SolveInfo record

    Returns:
        The solution Field, or (Field, SolveInfo)

    Raises:
        NonConvergenceError: If the iteration cap is reached
    """
    _check_grid(domain, grid)
    op = _operator(grid, cfg, mask, node_order)
    b = op.hN * _full_load(grid, f)[op.nodes]
    if not np.all(np.isfinite(b)):
        raise PreconditionError("Load must be bounded on Ω")
    x, info = _minimize(op, b, cfg)
    u = _to_field(grid, op, x)
    return (u, info) if return_info else u


def solve_torsion(domain: Domain, cfg: SolverConfig, grid: Grid, **kwargs):
    """Torsion function: the Dirichlet solution with f ≡ 1."""
    return solve_dirichlet(domain, 1.0, cfg, grid, **kwargs)


def solve_double_obstacle(domain: Domain, obs: Obstacles, cfg: SolverConfig, grid: Grid, *,
                          f: Load = 0.0, return_info: bool = False):
    """
    Minimize J(u) - <f, u> over the nodal box φ ≤ u ≤ ψ.

    Raises:
        ContractError: If the obstacles are infeasible
        ConfigError: If projection is switched off
        NonConvergenceError: If the iteration cap is reached
    """
    _check_grid(domain, grid)
    if not cfg.project:
        raise ConfigError("Obstacle problems are solved by projection; enable solver.project")
    op = _operator(grid, cfg, None, None)
    lo, hi = obs.bounds(grid, op.nodes)
    b = op.hN * _full_load(grid, f)[op.nodes]
    x, info = _minimize(op, b, cfg, lo=lo, hi=hi, x0=np.zeros(op.n))
    u = _to_field(grid, op, x)
    return (u, info) if return_info else u


# ----------------------------------------------------------------------
# checks

def kkt_report(u: Field, obs: Obstacles, cfg: SolverConfig, f: Load = 0.0) -> CheckReport:
    """
    First-order conditions of the obstacle problem: residual ≥ -tol where
    u = φ, ≤ tol where u = ψ, and |residual| ≤ tol in between.
    """
    grid = u.grid
    op = operator_for(grid, cfg.p, cfg.s, compensate=cfg.compensate)
    lo, hi = obs.bounds(grid, op.nodes)
    x = op.values_of(u)
    b = op.hN * _full_load(grid, f)[op.nodes]
    res = op.gradient(x) - b
    b_scale = float(np.max(np.abs(b)))
    tol = 10.0 * cfg.tol * (b_scale if b_scale > 0.0 else 1.0)
    at_lo = x <= lo
    at_hi = x >= hi
    free = ~at_lo & ~at_hi
    worst = max(
        float(np.max(-res[at_lo & ~at_hi], initial=-np.inf)),
        float(np.max(res[at_hi & ~at_lo], initial=-np.inf)),
        float(np.max(np.abs(res[free]), initial=-np.inf)),
        0.0,
    )
    return CheckReport('kkt', worst <= tol, worst, tol,
                       {'lower_contacts': int(np.count_nonzero(at_lo)),
                        'upper_contacts': int(np.count_nonzero(at_hi))})


def check_comparison(u: Field, v: Field, fu: Load, fv: Load, cfg: SolverConfig) -> CheckReport:
    """
    Discrete comparison principle: fu ≤ fv should force u ≤ v.

    Raises:
        PreconditionError: If fu > fv at some node of Ω
    """
    if not u.grid.same_as(v.grid):
        raise ContractError("Compared fields live on different grids")
    grid = u.grid
    load_u = _full_load(grid, fu)[grid.interior]
    load_v = _full_load(grid, fv)[grid.interior]
    if np.any(load_u > load_v):
        raise PreconditionError("Comparison needs fu <= fv at every node of Ω")
    gap = float(np.min(v.values - u.values))
    tol = 10.0 * cfg.tol * max(1.0, u.sup(), v.sup())
    return CheckReport('comparison', gap >= -tol, gap, tol)


def _global_samples(u: Field, n_points: int, seed: int) -> np.ndarray:
    grid = u.grid
    domain = grid.domain
    rng = np.random.default_rng(seed)
    inner = np.flatnonzero(grid.interior & (grid.distance >= 2.0 * grid.h))
    outer = np.flatnonzero(grid.signed_distance < -domain.boundary_tolerance())
    n_inner = n_points // 2
    n_outer = n_points // 4
    n_free = n_points - n_inner - n_outer
    picks = [grid.nodes[inner[np.linspace(0, inner.size - 1, min(n_inner, inner.size)).astype(int)]],
             grid.nodes[outer[np.linspace(0, outer.size - 1, min(n_outer, outer.size)).astype(int)]]]
    lo, hi = domain.bounding_box()
    pad = 0.5 * (hi - lo)
    free: List[np.ndarray] = []
    while len(free) < n_free:
        candidate = rng.uniform(lo - pad, hi + pad)
        if domain.signed_distance(candidate) < -0.05 * grid.h:
            free.append(candidate)
    picks.append(np.array(free).reshape(-1, grid.dim))
    return np.vstack(picks)


def check_global_subsolution(u: Field, cfg: SolverConfig, scheme=None, n_points: int = 200,
                             seed: int = 0xF5AC) -> CheckReport:
    """
    The torsion function is a global subsolution: its operator is ≤ 1 at
    interior nodes and at points outside Ω̄.
    """
    points = _global_samples(u, n_points, seed)
    values = np.atleast_1d(pointwise_flap(u, points, cfg.p, cfg.s))
    inside = np.atleast_1d(u.grid.domain.contains(points))
    tol = 10.0 * cfg.tol
    worst = float(np.max(values))
    details = {
        'points': int(points.shape[0]),
        'interior_min': float(np.min(values[inside])) if np.any(inside) else None,
        'interior_max': float(np.max(values[inside])) if np.any(inside) else None,
        'exterior_max': float(np.max(values[~inside])) if np.any(~inside) else None,
    }
    return CheckReport('global_subsolution', worst <= 1.0 + tol, worst, 1.0 + tol, details)


def hopf_constant(u: Field, s: float) -> float:
    grid = u.grid
    keep = grid.interior & (grid.distance >= grid.h)
    return float(np.min(u.values[keep] / grid.distance[keep] ** s))


def check_hopf(u: Field, domain: Domain, cfg: SolverConfig,
               u_refined: Optional[Field] = None) -> CheckReport:
    """
    Hopf positivity: c = min u/d^s over nodes with d ≥ h is positive, and
    stable within a factor 2 across one refinement when a refined solve is
    supplied.
    """
    _check_grid(domain, u.grid)
    c = hopf_constant(u, cfg.s)
    details = {'c_emp': c}
    stable = True
    if u_refined is not None:
        c_ref = hopf_constant(u_refined, cfg.s)
        details['c_emp_refined'] = c_ref
        stable = c > 0.0 and 0.5 <= c_ref / c <= 2.0
    return CheckReport('hopf', c > 0.0 and stable, c, 0.0, details)


def torsion_bounds(u: Field, domain: Domain, cfg: SolverConfig,
                   R: Optional[float] = None) -> CheckReport:
    """
    Two-sided torsion estimate: u / (R^{s/(p-1)} d^s) over nodes with d ≥ h
    lies in [1/C, C]; reports both ends and the spread C² = max/min.
    """
    grid = u.grid
    R = 0.5 * domain.diameter if R is None else R
    keep = grid.interior & (grid.distance >= grid.h)
    ratio = u.values[keep] / (R ** (cfg.s / (cfg.p - 1.0)) * grid.distance[keep] ** cfg.s)
    low, high = float(np.min(ratio)), float(np.max(ratio))
    spread = high / low if low > 0.0 else np.inf
    return CheckReport('torsion_bounds', low > 0.0 and np.isfinite(spread), spread, np.inf,
                       {'min': low, 'max': high})


def check_lewy_stampacchia(u: Field, obs: Obstacles, cfg: SolverConfig,
                           tol: Optional[float] = None) -> CheckReport:
    """
    Nodal sandwich min(0, Lψ) - tol ≤ Lu ≤ max(0, Lφ) + tol, with L the
    discrete residual at zero load. Obstacles are sampled as dirichlet
    fields; tol defaults to 10·cfg.tol.
    """
    grid = u.grid
    op = operator_for(grid, cfg.p, cfg.s, compensate=cfg.compensate)

    def applied(obj, missing: float) -> np.ndarray:
        if obj is None:
            return np.full(op.n, missing)
        if not isinstance(obj, Field):
            obj = Field.from_function(grid, obj if callable(obj) else (lambda x: float(obj)))
        return op.gradient(op.values_of(obj))

    lower = applied(obs.lower, np.inf)
    upper = applied(obs.upper, -np.inf)
    value = op.gradient(op.values_of(u))
    tol = 10.0 * cfg.tol if tol is None else tol
    ok = (value >= np.minimum(0.0, upper) - tol) & (value <= np.maximum(0.0, lower) + tol)
    fraction = float(np.count_nonzero(ok)) / ok.size
    return CheckReport('lewy_stampacchia', bool(np.all(ok)), fraction, 1.0,
                       {'nodes': int(ok.size), 'violations': int(ok.size - np.count_nonzero(ok))})
