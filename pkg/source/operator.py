#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Operator Module
Pointwise and variational evaluation of the fractional p-Laplacian

    (-Δ)_p^s u(x) = 2 P.V. ∫ (u(x) - u(y))^{p-1} / |x - y|^{N+ps} dy,

where a^{p-1} = |a|^{p-2} a. Closed-form functions are evaluated by
symmetric-pair ray quadrature; grid fields go through the all-pairs lattice
discretization of the energy, whose gradient is the discrete operator.
"""

import logging
import math
import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from scipy.signal import fftconvolve

from .errors import ContractError, DivergenceError, NumericError, PreconditionError
from .geometry import Ball, Domain, as_points
from .grid import Field, Grid
from .quadrature import QuadratureScheme, angular_integral, ray_rule, sphere_measure

logger = logging.getLogger(__name__)

FieldOrFunction = Union[Field, Callable[[np.ndarray], np.ndarray]]
Load = Union[Field, Callable[[np.ndarray], np.ndarray], float]

# Kernel matrices up to this many entries are kept in memory
DENSE_LIMIT = 1 << 24
BLOCK_ENTRIES = 1 << 22


def signed_power(a: np.ndarray, q: float) -> np.ndarray:
    """a^q := |a|^{q-1} a, with exact integer fast paths."""
    if q == 1.0:
        return np.array(a, dtype=float, copy=True)
    if q == 2.0:
        return np.abs(a) * a
    return np.abs(a) ** (q - 1.0) * a


def abs_power(a: np.ndarray, q: float) -> np.ndarray:
    if q == 1.0:
        return np.abs(a)
    if q == 2.0:
        return a * a
    if q == 3.0:
        return a * a * np.abs(a)
    return np.abs(a) ** q


def nth_root(x: float, q: float) -> float:
    """x^{1/q} for x ≥ 0, exact for q ∈ {1, 2}."""
    if q == 1.0:
        return x
    if q == 2.0:
        return math.sqrt(x)
    return x ** (1.0 / q)


def check_exponents(p: float, s: float) -> None:
    if not p >= 2.0:
        raise PreconditionError(f"Only the degenerate range p >= 2 is supported, got p = {p}")
    if not 0.0 < s < 1.0:
        raise PreconditionError(f"s must lie in (0, 1), got s = {s}")


# ----------------------------------------------------------------------
# lattice constants

@lru_cache(maxsize=64)
def lattice_zeta(dim: int, sigma: float) -> float:
    """
    Σ_{k ∈ Z^N, k ≠ 0} |k|^{-σ}, analytically continued in σ.

    N = 1 gives 2ζ(σ); N = 2 factors as 4ζ(σ/2)β(σ/2) with the Dirichlet
    beta function written through Hurwitz zeta values.
    """
    if dim == 1:
        return float(2 * mpmath.zeta(sigma))
    t = mpmath.mpf(sigma) / 2
    beta = mpmath.power(4, -t) * (mpmath.zeta(t, mpmath.mpf(1) / 4) - mpmath.zeta(t, mpmath.mpf(3) / 4))
    return float(4 * mpmath.zeta(t) * beta)


@lru_cache(maxsize=64)
def near_diagonal_weight(dim: int, p: float, s: float) -> float:
    """
    Relative correction δ of the nearest-neighbour kernel weights.

    Chosen so the lattice energy of a linear profile matches the continuum
    one: the regularized lattice sum of |e·k|^p |k|^{-N-ps} is cancelled by
    the extra nearest-neighbour mass (angular average in N = 2).
    """
    sigma = dim + p * s - p
    return -0.5 * lattice_zeta(dim, sigma) if dim == 1 else -0.25 * lattice_zeta(dim, sigma)


# ----------------------------------------------------------------------
# discrete operator

class DiscreteOperator:
    """
    All-pairs lattice discretization on the active nodes of a grid.

    The discrete energy is

        J(u) = (1/p) [ h^{2N} Σ_{x≠y} K_xy |u_x - u_y|^p + 2 h^N Σ_x e_x |u_x|^p ],

    with K_xy = |x - y|^{-N-ps}, nearest neighbours weighted by (1 + δ), and
    e_x = h^N Σ_{y inactive} K_xy the exact lattice sum over every inactive
    node of Z^N, obtained from the lattice zeta value minus the active row
    sum. Its gradient, divided by h^N, approximates the operator.
    """

    def __init__(self, grid: Grid, p: float, s: float, mask: Optional[np.ndarray] = None,
                 compensate: bool = True, workers: int = 1,
                 order: Optional[np.ndarray] = None, linear_fast_path: bool = True):
        check_exponents(p, s)
        self.grid = grid
        self.p = float(p)
        self.s = float(s)
        self.dim = grid.dim
        self.h = grid.h
        self.hN = grid.cell_volume
        self.mask = grid.interior.copy() if mask is None else np.asarray(mask, dtype=bool).copy()
        if self.mask.shape != (grid.size,):
            raise ContractError("Operator mask does not match the grid")
        self.nodes = np.flatnonzero(self.mask)
        if order is not None:
            order = np.asarray(order)
            if sorted(order.tolist()) != list(range(self.nodes.size)):
                raise ContractError("Node order must be a permutation of the active nodes")
            self.nodes = self.nodes[order]
        self.n = int(self.nodes.size)
        if self.n == 0:
            raise ContractError("Operator has no active node")
        self.workers = max(int(workers), 1)
        self.linear = self.p == 2.0 and linear_fast_path
        self.delta = near_diagonal_weight(self.dim, self.p, self.s) if compensate else 0.0

        self._index = grid.index[self.nodes]
        self._table = self._kernel_table()
        self._signed_table: Optional[np.ndarray] = None
        self._dense = self._build_dense() if self.n * self.n <= DENSE_LIMIT else None
        if self.n * self.n > DENSE_LIMIT:
            logger.info("Operator on %d nodes uses blocked assembly", self.n)

        zeta = lattice_zeta(self.dim, self.dim + self.p * self.s)
        self.kappa_total = self.h ** (-self.p * self.s) * (zeta + 2 * self.dim * self.delta)
        self.row_sums = self._row_sums()
        self.exterior = self.kappa_total - self.hN * self.row_sums
        if np.any(self.exterior <= 0.0):
            raise NumericError("Exterior lattice mass is not positive")

    # kernel ------------------------------------------------------------

    def _kernel_table(self) -> np.ndarray:
        axes = np.meshgrid(*[np.arange(n, dtype=float) for n in self.grid.shape], indexing='ij')
        radius2 = sum(a * a for a in axes)
        with np.errstate(divide='ignore'):
            table = radius2 ** (-0.5 * (self.dim + self.p * self.s))
        table *= self.h ** (-(self.dim + self.p * self.s))
        table[(0,) * self.dim] = 0.0
        neighbours = radius2 == 1.0
        table[neighbours] *= 1.0 + self.delta
        return table

    def kernel_rows(self, r0: int, r1: int) -> np.ndarray:
        """Kernel block K[r0:r1, :] between active nodes."""
        if self._dense is not None:
            return self._dense[r0:r1]
        offsets = tuple(np.abs(self._index[r0:r1, None, a] - self._index[None, :, a])
                        for a in range(self.dim))
        return self._table[offsets]

    def _blocks(self) -> List[Tuple[int, int]]:
        rows = max(1, BLOCK_ENTRIES // self.n)
        return [(r0, min(r0 + rows, self.n)) for r0 in range(0, self.n, rows)]

    def _build_dense(self) -> np.ndarray:
        dense = np.empty((self.n, self.n))
        for r0, r1 in self._blocks():
            offsets = tuple(np.abs(self._index[r0:r1, None, a] - self._index[None, :, a])
                            for a in range(self.dim))
            dense[r0:r1] = self._table[offsets]
        return dense

    def _full_kernel(self) -> np.ndarray:
        """Kernel over signed offsets, for FFT convolution on the grid box."""
        if self._signed_table is None:
            table = self._table
            for axis in range(self.dim):
                mirrored = np.flip(np.take(table, np.arange(1, table.shape[axis]), axis=axis),
                                   axis=axis)
                table = np.concatenate([mirrored, table], axis=axis)
            self._signed_table = table
        return self._signed_table

    def _convolve(self, values: np.ndarray) -> np.ndarray:
        """Σ_y K_xy v_y over active y, at active x."""
        if self._dense is not None:
            return self._dense @ values
        box = np.zeros(self.grid.size)
        box[self.nodes] = values
        conv = fftconvolve(self.grid.reshape(box), self._full_kernel(), mode='same')
        return conv.ravel()[self.nodes]

    def _row_sums(self) -> np.ndarray:
        if self._dense is not None:
            return np.sum(self._dense, axis=1)
        return self._convolve(np.ones(self.n))

    # energy and gradient ---------------------------------------------------

    def apply_linear(self, u: np.ndarray) -> np.ndarray:
        """Gradient of the p = 2 energy: 2h^N κ u - 2h^{2N} K u."""
        return 2.0 * self.hN * self.kappa_total * u - 2.0 * self.hN * self.hN * self._convolve(u)

    def _block_terms(self, u: np.ndarray, r0: int, r1: int, with_energy: bool):
        kernel = self.kernel_rows(r0, r1)
        diff = u[r0:r1, None] - u[None, :]
        grad = np.sum(kernel * signed_power(diff, self.p - 1.0), axis=1)
        pair = float(np.sum(kernel * abs_power(diff, self.p))) if with_energy else 0.0
        return grad, pair

    def _assemble(self, u: np.ndarray, with_energy: bool) -> Tuple[float, np.ndarray]:
        blocks = self._blocks()
        if self.workers > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                parts = list(pool.map(lambda b: self._block_terms(u, b[0], b[1], with_energy), blocks))
        else:
            parts = [self._block_terms(u, r0, r1, with_energy) for r0, r1 in blocks]
        grad = np.concatenate([g for g, _ in parts])
        pair = math.fsum(e for _, e in parts)
        grad = 2.0 * self.hN * self.hN * grad + 2.0 * self.hN * self.exterior * signed_power(u, self.p - 1.0)
        energy = (self.hN * self.hN * pair
                  + 2.0 * self.hN * float(np.sum(self.exterior * abs_power(u, self.p)))) / self.p
        return energy, grad

    def energy_and_gradient(self, u: np.ndarray) -> Tuple[float, np.ndarray]:
        u = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(u)):
            return np.inf, np.full(self.n, np.nan)
        if self.linear:
            grad = self.apply_linear(u)
            return 0.5 * float(u @ grad), grad
        return self._assemble(u, with_energy=True)

    def energy(self, u: np.ndarray) -> float:
        return self.energy_and_gradient(u)[0]

    def gradient(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.linear:
            return self.apply_linear(u)
        return self._assemble(u, with_energy=False)[1]

    # pointwise values ------------------------------------------------------

    def values_of(self, field: Field) -> np.ndarray:
        return field.values[self.nodes]

    def kernel_to(self, flat: int, targets: np.ndarray) -> np.ndarray:
        """Compensated lattice kernel between grid node `flat` and grid nodes `targets`."""
        offsets = tuple(np.abs(self.grid.index[targets, a] - self.grid.index[flat, a])
                        for a in range(self.dim))
        return self._table[offsets]

    def pointwise(self, field: Field, points) -> np.ndarray:
        """
        Discrete operator of a field at grid nodes, or at off-grid points
        where the field vanishes.

        Active nodes use the full gradient; other nodes use the compensated
        lattice kernel and off-grid points the exact kernel.
        """
        pts, single = as_points(points, self.dim)
        flat, gap = self.grid.locate(pts)
        on_node = gap <= 1e-9 * self.h
        position = np.full(self.grid.size, -1)
        position[self.nodes] = np.arange(self.n)
        active = on_node & (position[flat] >= 0)
        u = self.values_of(field)
        out = np.empty(len(pts))
        if np.any(active):
            out[active] = self.gradient(u)[position[flat[active]]] / self.hN
        pull = signed_power(-u, self.p - 1.0)
        for k in np.flatnonzero(~active):
            if on_node[k]:
                if field.values[flat[k]] != 0.0:
                    raise PreconditionError("Inactive nodes must carry zero values")
                kernel = self.kernel_to(flat[k], self.nodes)
            else:
                outside = self.grid.domain.signed_distance(pts[k]) < 0.0
                if field.kind == 'dirichlet' and not outside:
                    raise PreconditionError("Fields are evaluated inside Ω only at grid nodes")
                if field.kind == 'free' and field(pts[k]) != 0.0:
                    raise PreconditionError("Off-grid points must lie where the field vanishes")
                r = np.linalg.norm(self.grid.nodes[self.nodes] - pts[k], axis=1)
                kernel = r ** (-(self.dim + self.p * self.s))
            out[k] = 2.0 * self.hN * float(np.sum(kernel * pull))
        if not np.all(np.isfinite(out)):
            raise NumericError("Non-finite operator value")
        return out[0] if single else out


_operator_cache: 'OrderedDict[tuple, DiscreteOperator]' = OrderedDict()
_operator_lock = threading.Lock()
_OPERATOR_CACHE_SIZE = 6


def operator_for(grid: Grid, p: float, s: float, mask: Optional[np.ndarray] = None,
                 compensate: bool = True, workers: int = 1) -> DiscreteOperator:
    """Cached DiscreteOperator for a grid, exponents and active mask."""
    mask_key = None if mask is None else hash(np.asarray(mask, dtype=bool).tobytes())
    key = (id(grid), float(p), float(s), mask_key, bool(compensate))
    with _operator_lock:
        op = _operator_cache.get(key)
        if op is not None and op.grid is grid:
            _operator_cache.move_to_end(key)
            return op
    op = DiscreteOperator(grid, p, s, mask=mask, compensate=compensate, workers=workers)
    with _operator_lock:
        _operator_cache[key] = op
        while len(_operator_cache) > _OPERATOR_CACHE_SIZE:
            _operator_cache.popitem(last=False)
    return op


def load_values(grid: Grid, f: Load, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Nodal load values on the active nodes."""
    mask = grid.interior if mask is None else mask
    if isinstance(f, Field):
        if not f.grid.same_as(grid):
            raise ContractError("Load lives on a different grid")
        values = f.values[mask]
    elif callable(f):
        values = np.broadcast_to(np.asarray(f(grid.nodes[mask]), dtype=float).reshape(-1),
                                 (int(np.count_nonzero(mask)),)).copy()
    else:
        values = np.full(int(np.count_nonzero(mask)), float(f))
    if not np.all(np.isfinite(values)):
        raise NumericError("Load is not finite on Ω")
    return values


def _require_dirichlet(u: Field) -> None:
    if not isinstance(u, Field):
        raise ContractError("Expected a Field")
    if u.kind != 'dirichlet':
        raise ContractError("Energy and residual need a dirichlet field")


def energy(u: Field, p: float, s: float, compensate: bool = True) -> float:
    """
    Discrete energy J(u).

    Returns:
        J(u), or +inf when a value is not finite

    Raises:
        ContractError: If u is a free field
    """
    _require_dirichlet(u)
    op = operator_for(u.grid, p, s, compensate=compensate)
    value = op.energy(op.values_of(u))
    return value if np.isfinite(value) else np.inf


def residual(u: Field, f: Load, p: float, s: float, compensate: bool = True) -> Field:
    """
    Nodal gradient of J at u minus the load h^N f, zero at exterior nodes.

    Raises:
        ContractError: For free fields or fields on different grids
    """
    _require_dirichlet(u)
    if isinstance(f, Field):
        _require_dirichlet(f)
    op = operator_for(u.grid, p, s, compensate=compensate)
    load = load_values(u.grid, f)
    res = op.gradient(op.values_of(u)) - op.hN * load
    return Field.from_interior(u.grid, res)


# ----------------------------------------------------------------------
# pointwise evaluation of closed-form functions

def _ray_breaks(sets: Iterable, x: np.ndarray, e: np.ndarray, r_max: float) -> List[float]:
    breaks: List[float] = []
    for region in sets:
        breaks.extend(region.ray_crossings(x, e, r_max).tolist())
        breaks.extend(region.ray_crossings(x, -e, r_max).tolist())
    return breaks


def _pair_ray(u: Callable, x: np.ndarray, ux: float, e: np.ndarray, p: float, s: float,
              scheme: QuadratureScheme, sets: Sequence) -> float:
    """∫_ε^T [(u(x) - u(x+re))^{p-1} + (u(x) - u(x-re))^{p-1}] r^{-1-ps} dr."""
    r, w = ray_rule(_ray_breaks(sets, x, e, scheme.far_radius), scheme.eps, scheme.far_radius, scheme)
    step = r[:, None] * e[None, :]
    vals = np.asarray(u(np.vstack([x + step, x - step])), dtype=float).reshape(-1)
    plus, minus = vals[:r.size], vals[r.size:]
    integrand = (signed_power(ux - plus, p - 1.0) + signed_power(ux - minus, p - 1.0)) \
        * r ** (-1.0 - p * s)
    return float(w @ integrand)


def _flap_function(u: Callable, x: np.ndarray, p: float, s: float, scheme: QuadratureScheme,
                   domain: Domain, regions: Sequence) -> float:
    sd = float(domain.signed_distance(x))
    if sd > -domain.boundary_tolerance() and sd < 2.0 * scheme.h:
        raise PreconditionError(
            f"Point {x} is within 2h = {2.0 * scheme.h:g} of the boundary"
        )
    ux = float(np.asarray(u(x.reshape(1, -1)), dtype=float).reshape(-1)[0])
    sets = [domain] + list(regions)
    if domain.dim == 1:
        near = _pair_ray(u, x, ux, np.array([1.0]), p, s, scheme, sets)
    else:
        kinks: List[float] = []
        for region in regions:
            if hasattr(region, 'tangent_angles'):
                kinks.extend(region.tangent_angles(x))

        def radial(theta: float) -> float:
            e = np.array([math.cos(theta), math.sin(theta)])
            return _pair_ray(u, x, ux, e, p, s, scheme, sets)

        near = angular_integral(radial, kinks, scheme)
    far = 2.0 * float(signed_power(np.array(ux), p - 1.0)) * sphere_measure(domain.dim) \
        * scheme.far_radius ** (-p * s) / (p * s)
    value = 2.0 * near + far
    if not math.isfinite(value):
        raise NumericError(f"Non-finite operator value at {x}")
    return value


def pointwise_flap(u: FieldOrFunction, x, p: float, s: float,
                   scheme: Optional[QuadratureScheme] = None, domain: Optional[Domain] = None,
                   regions: Sequence = ()) -> Union[float, np.ndarray]:
    """
    Pointwise value of the operator at one point or a batch of points.

    Args:
        u: A Field, or a vectorized function on (m, N) point arrays that
            vanishes outside the grid box
        x: Evaluation point(s)
        p: Growth exponent, p >= 2
        s: Order, 0 < s < 1
        scheme: Quadrature settings (required for functions)
        domain: The domain Ω (required for functions; defaults to the grid's)
        regions: Extra sets whose boundaries the function jumps across

    Returns:
        The operator value(s)

    Raises:
        PreconditionError: If a point of Ω lies within 2h of ∂Ω
        NumericError: If a non-finite value appears
    """
    check_exponents(p, s)
    if isinstance(u, Field):
        # zero-valued nodes contribute the same whether active or not
        mask = None if u.kind == 'dirichlet' else u.grid.interior | (u.values != 0.0)
        op = operator_for(u.grid, p, s, mask=mask)
        pts, single = as_points(x, u.grid.dim)
        d = np.atleast_1d(u.grid.domain.signed_distance(pts))
        bad = (d > -u.grid.domain.boundary_tolerance()) & (d < 2.0 * u.grid.h)
        if np.any(bad):
            raise PreconditionError("Field evaluation points must keep 2h away from ∂Ω")
        values = op.pointwise(u, pts)
        return float(values[0]) if single else values
    if scheme is None or domain is None:
        raise PreconditionError("Evaluating a function needs a quadrature scheme and a domain")
    pts, single = as_points(x, domain.dim)
    values = np.array([_flap_function(u, pt, p, s, scheme, domain, regions) for pt in pts])
    return float(values[0]) if single else values


# ----------------------------------------------------------------------
# tails

@dataclass(frozen=True)
class TailValue:
    q: float
    R: float
    x0: Tuple[float, ...]
    value: float

    def to_dict(self) -> dict:
        return {'q': self.q, 'R': self.R, 'x0': list(self.x0), 'value': self.value}


def tail(u: FieldOrFunction, q: float, R: float, x0, s: float,
         domain: Optional[Domain] = None,
         scheme: Optional[QuadratureScheme] = None) -> TailValue:
    """
    Nonlocal tail [∫_{Ω \\ B_R(x0)} |u|^q / |x - x0|^{N+s} dx]^{1/q}.

    Fields use the nodal sum over Ω-interior nodes; functions use ray
    quadrature restricted to Ω.
    """
    if not q >= 1.0 or not R > 0.0:
        raise PreconditionError("Tails need q >= 1 and R > 0")
    if isinstance(u, Field):
        grid = u.grid
        x0 = np.asarray(x0, dtype=float).reshape(grid.dim)
        r = np.linalg.norm(grid.nodes - x0, axis=1)
        keep = grid.interior & (r >= R)
        integral = grid.cell_volume * math.fsum(
            abs_power(u.values[keep], q) * r[keep] ** (-(grid.dim + s)))
    else:
        if domain is None or scheme is None:
            raise PreconditionError("Tails of functions need a domain and a quadrature scheme")
        x0 = np.asarray(x0, dtype=float).reshape(domain.dim)
        reach = float(np.linalg.norm(x0 - domain.center_point)) + domain.diameter

        def ray(e: np.ndarray) -> float:
            if R >= reach:
                return 0.0
            breaks = domain.ray_crossings(x0, e, reach).tolist()
            r, w = ray_rule(breaks, R, reach, scheme)
            pts = x0 + r[:, None] * e[None, :]
            vals = np.asarray(u(pts), dtype=float).reshape(-1) * domain.contains(pts)
            return float(w @ (abs_power(vals, q) * r ** (-1.0 - s)))

        if domain.dim == 1:
            integral = ray(np.array([1.0])) + ray(np.array([-1.0]))
        else:
            integral = angular_integral(
                lambda t: ray(np.array([math.cos(t), math.sin(t)])), (), scheme, upper=2.0 * np.pi)
    return TailValue(q=float(q), R=float(R), x0=tuple(float(v) for v in x0),
                     value=nth_root(max(integral, 0.0), q))


# ----------------------------------------------------------------------
# superposition

def merged(w: FieldOrFunction, v: FieldOrFunction, region: Ball) -> FieldOrFunction:
    """w outside the region and v inside it."""
    if isinstance(w, Field):
        inside = region.contains(w.grid.nodes)
        v_nodes = v.values if isinstance(v, Field) else np.asarray(v(w.grid.nodes), dtype=float)
        return Field(w.grid, np.where(inside, v_nodes, w.values), w.kind)

    def merged_function(y):
        pts, single = as_points(y, region.dim)
        out = np.where(region.contains(pts), np.asarray(v(pts), dtype=float).reshape(-1),
                       np.asarray(w(pts), dtype=float).reshape(-1))
        return out[0] if single else out

    return merged_function


def superpose(w: FieldOrFunction, v: FieldOrFunction, region: Ball, x, p: float, s: float,
              scheme: QuadratureScheme, domain: Optional[Domain] = None) -> Tuple[float, float]:
    """
    Operator of the merged function at x through the superposition formula.

    Returns:
        (pointwise_flap(w, x) + correction, correction), where
        correction = 2 ∫_V [(w(x) - v(y))^{p-1} - (w(x) - w(y))^{p-1}] |x - y|^{-N-ps} dy

    Raises:
        PreconditionError: If x touches the region
    """
    x = np.asarray(x, dtype=float).reshape(region.dim)
    if not region.distance_to(x) > 0.0:
        raise PreconditionError("Superposition needs the evaluation point away from the region")
    check_exponents(p, s)
    dim = region.dim
    if isinstance(w, Field):
        grid = w.grid
        k = grid.node_index(x)
        inside = np.flatnonzero(region.contains(grid.nodes))
        wx = float(w.values[k])
        v_nodes = (v.values[inside] if isinstance(v, Field)
                   else np.asarray(v(grid.nodes[inside]), dtype=float).reshape(-1))
        kernel = operator_for(grid, p, s).kernel_to(k, inside)
        integrand = signed_power(wx - v_nodes, p - 1.0) - signed_power(wx - w.values[inside], p - 1.0)
        correction = 2.0 * grid.cell_volume * math.fsum(kernel * integrand)
        base = pointwise_flap(w, x, p, s)
    else:
        if domain is None:
            raise PreconditionError("Superposing functions needs the domain")
        nodes, weights = region.quadrature(scheme.ball_order)
        wx = float(np.asarray(w(x.reshape(1, -1)), dtype=float).reshape(-1)[0])
        v_vals = np.asarray(v(nodes), dtype=float).reshape(-1)
        w_vals = np.asarray(w(nodes), dtype=float).reshape(-1)
        kernel = np.linalg.norm(nodes - x, axis=1) ** (-(dim + p * s))
        integrand = signed_power(wx - v_vals, p - 1.0) - signed_power(wx - w_vals, p - 1.0)
        correction = 2.0 * float(weights @ (kernel * integrand))
        base = pointwise_flap(w, x, p, s, scheme=scheme, domain=domain)
    if not math.isfinite(correction):
        raise NumericError("Non-finite superposition correction")
    return base + correction, correction


# ----------------------------------------------------------------------
# dyadic series

@dataclass(frozen=True)
class SeriesValue:
    """Partial sum of S_q(α₁) and a bound on the omitted terms."""

    partial: float
    remainder: float
    terms: int

    @property
    def upper(self) -> float:
        return self.partial + self.remainder

    def __float__(self) -> float:
        return self.partial


def series_S(q: float, alpha1: float, s: float, terms: int) -> SeriesValue:
    """
    S_q(α₁) = Σ_{j≥1} (8^{α₁ j} - 1)^q / 8^{s j}, summed to `terms`.

    The omitted terms are bounded by the geometric tail r^{J+1}/(1 - r)
    with r = 8^{qα₁ - s}.

    Raises:
        DivergenceError: If α₁ ≥ s/q
    """
    if not q >= 1.0 or not 0.0 < s < 1.0 or terms < 1:
        raise PreconditionError("series_S needs q >= 1, s in (0, 1) and at least one term")
    if alpha1 >= s / q:
        raise DivergenceError(f"S_q diverges for α₁ = {alpha1:g} >= s/q = {s / q:g}")
    if alpha1 <= 0.0:
        raise PreconditionError("series_S needs α₁ > 0")
    log8 = math.log(8.0)
    j = np.arange(1, terms + 1, dtype=float)
    logs = q * np.log(np.expm1(alpha1 * j * log8)) - s * j * log8
    partial = math.fsum(np.exp(logs))
    ratio = math.exp((q * alpha1 - s) * log8)
    remainder = ratio ** (terms + 1) / (1.0 - ratio)
    return SeriesValue(partial=partial, remainder=remainder, terms=int(terms))
