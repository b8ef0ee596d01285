#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Geometry Module
Analytic domains with exact distance, metric projection and inner normals,
plus the geometric constructions used by the barriers: the interior-sphere
radius, normal balls placed along the inner normal, and morphologically
opened regions on a grid.

Points are numpy arrays of shape (N,) or (m, N). One-dimensional domains
still use a trailing axis of length 1.
"""

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import ndimage

from .errors import GeometryError, PreconditionError

if TYPE_CHECKING:
    from .grid import Grid

logger = logging.getLogger(__name__)

DOMAIN_KINDS = ('interval', 'ball', 'stadium', 'ellipse')

# Largest semi-axis ratio accepted for ellipses
MAX_ELLIPSE_ASPECT = 8.0

_ELLIPSE_BISECTIONS = 128

ArrayLike = Union[float, Sequence[float], np.ndarray]


def as_points(x: ArrayLike, dim: int) -> Tuple[np.ndarray, bool]:
    """
    Normalize a point or a batch of points to shape (m, dim).

    Returns:
        The (m, dim) float array and whether the input was a single point
    """
    arr = np.asarray(x, dtype=float)
    if dim == 1 and arr.ndim <= 1:
        # a bare scalar or [x] is one point, a longer vector is a batch
        return arr.reshape(-1, 1), arr.size == 1
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise ValueError(f"Point has {arr.shape[0]} coordinates, expected {dim}")
        return arr.reshape(1, dim), True
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"Points must have shape (m, {dim}), got {arr.shape}")
    return arr, False


def _quadratic_roots(a: float, b: float, c: float) -> List[float]:
    """Real roots of a·r² + b·r + c = 0 with a > 0."""
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    sq = np.sqrt(disc)
    q = -0.5 * (b + np.copysign(sq, b))
    roots = []
    if q != 0.0:
        roots.append(q / a)
        roots.append(c / q)
    else:
        roots.append(0.0)
    return roots


@dataclass(frozen=True)
class Domain:
    """
    Bounded C^{1,1} domain with closed-form distance.

    Kinds and their parameters:
        interval: (a,)      the interval (c - a, c + a), N = 1
        ball:     (r,)      the disc of radius r, N = 2
        stadium:  (a, r)    points within r of the segment [c - a e1, c + a e1]
        ellipse:  (a, b)    axis-aligned ellipse with semi-axes a >= b
    """

    kind: str
    center: Tuple[float, ...]
    params: Tuple[float, ...]

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise GeometryError(f"Unknown domain kind: {self.kind}", invariant='kind')
        expected_dim = 1 if self.kind == 'interval' else 2
        if len(self.center) != expected_dim:
            raise GeometryError(
                f"{self.kind} needs a center with {expected_dim} coordinates",
                invariant='dimension',
            )
        expected_params = {'interval': 1, 'ball': 1, 'stadium': 2, 'ellipse': 2}[self.kind]
        if len(self.params) != expected_params:
            raise GeometryError(
                f"{self.kind} takes {expected_params} shape parameters",
                invariant='parameters',
            )
        if not all(np.isfinite(self.params)) or not all(np.isfinite(self.center)):
            raise GeometryError("Domain parameters must be finite", invariant='parameters')
        if self.kind == 'stadium':
            if self.params[0] < 0 or self.params[1] <= 0:
                raise GeometryError("Stadium needs a >= 0 and r > 0", invariant='parameters')
        elif any(v <= 0 for v in self.params):
            raise GeometryError("Domain radii must be positive", invariant='parameters')
        if self.kind == 'ellipse':
            a, b = self.params
            if a < b:
                raise GeometryError("Ellipse semi-axes must satisfy a >= b", invariant='parameters')
            if a / b > MAX_ELLIPSE_ASPECT:
                raise GeometryError(
                    f"Ellipse aspect ratio exceeds {MAX_ELLIPSE_ASPECT}",
                    invariant='aspect',
                )

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def interval(cls, half_length: float, center: float = 0.0) -> 'Domain':
        return cls('interval', (float(center),), (float(half_length),))

    @classmethod
    def ball(cls, radius: float, center: Sequence[float] = (0.0, 0.0)) -> 'Domain':
        return cls('ball', tuple(float(c) for c in center), (float(radius),))

    @classmethod
    def stadium(cls, half_length: float, cap_radius: float,
                center: Sequence[float] = (0.0, 0.0)) -> 'Domain':
        return cls('stadium', tuple(float(c) for c in center),
                   (float(half_length), float(cap_radius)))

    @classmethod
    def ellipse(cls, a: float, b: float, center: Sequence[float] = (0.0, 0.0)) -> 'Domain':
        return cls('ellipse', tuple(float(c) for c in center), (float(a), float(b)))

    @classmethod
    def from_spec(cls, kind: str, params: Sequence[float], dim: int = None) -> 'Domain':
        """
        Build a domain from a config entry.

        Args:
            kind: One of DOMAIN_KINDS
            params: Shape parameters, optionally followed by the center
            dim: Declared dimension, checked against the kind

        Returns:
            The domain

        Raises:
            GeometryError: If the entry does not describe a valid domain
        """
        n_shape = {'interval': 1, 'ball': 1, 'stadium': 2, 'ellipse': 2}.get(kind)
        if n_shape is None:
            raise GeometryError(f"Unknown domain kind: {kind}", invariant='kind')
        n_dim = 1 if kind == 'interval' else 2
        if dim is not None and int(dim) != n_dim:
            raise GeometryError(f"{kind} domains have dimension {n_dim}, got {dim}",
                                invariant='dimension')
        values = [float(v) for v in params]
        if len(values) not in (n_shape, n_shape + n_dim):
            raise GeometryError(
                f"{kind} expects {n_shape} parameters, or {n_shape + n_dim} with a center",
                invariant='parameters',
            )
        shape = tuple(values[:n_shape])
        center = tuple(values[n_shape:]) if len(values) > n_shape else (0.0,) * n_dim
        return cls(kind, center, shape)

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'dim': self.dim,
                'params': list(self.params), 'center': list(self.center)}

    # ------------------------------------------------------------------
    # basic properties

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def center_point(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    @property
    def diameter(self) -> float:
        if self.kind in ('interval', 'ball'):
            return 2.0 * self.params[0]
        if self.kind == 'stadium':
            return 2.0 * (self.params[0] + self.params[1])
        return 2.0 * self.params[0]

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        """Closed axis-aligned box containing Ω."""
        c = self.center_point
        if self.kind in ('interval', 'ball'):
            half = np.full(self.dim, self.params[0])
        elif self.kind == 'stadium':
            a, r = self.params
            half = np.array([a + r, r])
        else:
            half = np.array(self.params)
        return c - half, c + half

    def translated(self, shift: ArrayLike) -> 'Domain':
        shift = np.asarray(shift, dtype=float).reshape(self.dim)
        return Domain(self.kind, tuple(float(v) for v in self.center_point + shift), self.params)

    def scaled(self, factor: float) -> 'Domain':
        """Dilation of the domain about the origin."""
        factor = float(factor)
        return Domain(self.kind, tuple(float(v) * factor for v in self.center),
                      tuple(v * factor for v in self.params))

    # ------------------------------------------------------------------
    # distance

    def signed_distance(self, x: ArrayLike) -> np.ndarray:
        """Distance to ∂Ω, positive inside and negative outside."""
        pts, single = as_points(x, self.dim)
        local = pts - self.center_point
        if self.kind == 'interval':
            out = self.params[0] - np.abs(local[:, 0])
        elif self.kind == 'ball':
            out = self.params[0] - np.hypot(local[:, 0], local[:, 1])
        elif self.kind == 'stadium':
            a, r = self.params
            qx = np.clip(local[:, 0], -a, a)
            out = r - np.hypot(local[:, 0] - qx, local[:, 1])
        else:
            closest = self._ellipse_closest(local)
            gap = np.hypot(local[:, 0] - closest[:, 0], local[:, 1] - closest[:, 1])
            a, b = self.params
            inside = (local[:, 0] / a) ** 2 + (local[:, 1] / b) ** 2 < 1.0
            out = np.where(inside, gap, -gap)
        return out[0] if single else out

    def distance(self, x: ArrayLike) -> np.ndarray:
        """d_Ω(x): distance to the complement, zero outside Ω."""
        return np.maximum(self.signed_distance(x), 0.0)

    def contains(self, x: ArrayLike) -> np.ndarray:
        return self.signed_distance(x) > 0.0

    def _ellipse_closest(self, local: np.ndarray) -> np.ndarray:
        """Closest boundary points of the centered ellipse, by robust bisection."""
        e0, e1 = self.params
        y0 = np.abs(local[:, 0])
        y1 = np.abs(local[:, 1])
        x0 = np.empty_like(y0)
        x1 = np.empty_like(y1)

        generic = (y0 > 0.0) & (y1 > 0.0)
        if np.any(generic):
            z0 = y0[generic] / e0
            z1 = y1[generic] / e1
            r0 = (e0 / e1) ** 2
            g = z0 * z0 + z1 * z1 - 1.0
            lo = z1 - 1.0
            hi = np.where(g < 0.0, 0.0, np.hypot(r0 * z0, z1) - 1.0)
            t = 0.5 * (lo + hi)
            for _ in range(_ELLIPSE_BISECTIONS):
                t = 0.5 * (lo + hi)
                val = (r0 * z0 / (t + r0)) ** 2 + (z1 / (t + 1.0)) ** 2 - 1.0
                lo = np.where(val > 0.0, t, lo)
                hi = np.where(val > 0.0, hi, t)
            x0[generic] = r0 * y0[generic] / (t + r0)
            x1[generic] = y1[generic] / (t + 1.0)

        on_minor = (y0 == 0.0) & (y1 > 0.0)
        x0[on_minor] = 0.0
        x1[on_minor] = e1

        on_major = y1 == 0.0
        if np.any(on_major):
            numer = e0 * y0[on_major]
            denom = e0 * e0 - e1 * e1
            with np.errstate(divide='ignore', invalid='ignore'):
                ratio = np.where(numer < denom, numer / np.where(denom > 0, denom, 1.0), 1.0)
            x0[on_major] = e0 * ratio
            x1[on_major] = e1 * np.sqrt(np.maximum(1.0 - ratio * ratio, 0.0))

        return np.column_stack([np.copysign(x0, local[:, 0]), np.copysign(x1, local[:, 1])])

    # ------------------------------------------------------------------
    # boundary structure

    def interior_sphere_radius(self) -> float:
        """
        ρ(Ω): half the largest R such that every boundary point touches a
        ball of radius R contained in Ω.
        """
        if self.kind in ('interval', 'ball'):
            return 0.5 * self.params[0]
        if self.kind == 'stadium':
            return 0.5 * self.params[1]
        a, b = self.params
        return 0.5 * min(b, b * b / a)

    def boundary_tolerance(self) -> float:
        return 1e-11 * max(1.0, self.diameter, float(np.max(np.abs(self.center))))

    def on_boundary(self, x: ArrayLike) -> np.ndarray:
        return np.abs(self.signed_distance(x)) <= self.boundary_tolerance()

    def metric_projection(self, x: ArrayLike) -> np.ndarray:
        """
        Nearest boundary point of x ∈ Ω_ρ.

        Raises:
            GeometryError: If some point is outside Ω or has d_Ω ≥ ρ
        """
        pts, single = as_points(x, self.dim)
        sd = np.atleast_1d(self.signed_distance(pts))
        rho = self.interior_sphere_radius()
        tol = self.boundary_tolerance()
        if np.any(sd < -tol) or np.any(sd >= rho):
            raise GeometryError(
                "Metric projection is only defined on Ω_ρ = {x ∈ Ω : d(x) < ρ}",
                invariant='projection',
            )
        local = pts - self.center_point
        if self.kind == 'interval':
            proj = np.sign(local) * self.params[0]
        elif self.kind == 'ball':
            norm = np.linalg.norm(local, axis=1, keepdims=True)
            proj = local / norm * self.params[0]
        elif self.kind == 'stadium':
            a, r = self.params
            q = np.column_stack([np.clip(local[:, 0], -a, a), np.zeros(len(local))])
            gap = local - q
            proj = q + gap / np.linalg.norm(gap, axis=1, keepdims=True) * r
        else:
            proj = self._ellipse_closest(local)
        proj = proj + self.center_point
        return proj[0] if single else proj

    def inner_normal(self, x0: ArrayLike) -> np.ndarray:
        """
        Inner unit normal at boundary points.

        Raises:
            PreconditionError: If a point is not on ∂Ω
        """
        pts, single = as_points(x0, self.dim)
        if not np.all(self.on_boundary(pts)):
            raise PreconditionError("Inner normals are only defined at boundary points")
        local = pts - self.center_point
        if self.kind == 'interval':
            nu = -np.sign(local)
        elif self.kind == 'ball':
            nu = -local / np.linalg.norm(local, axis=1, keepdims=True)
        elif self.kind == 'stadium':
            a, _ = self.params
            q = np.column_stack([np.clip(local[:, 0], -a, a), np.zeros(len(local))])
            gap = q - local
            nu = gap / np.linalg.norm(gap, axis=1, keepdims=True)
        else:
            a, b = self.params
            grad = np.column_stack([local[:, 0] / (a * a), local[:, 1] / (b * b)])
            nu = -grad / np.linalg.norm(grad, axis=1, keepdims=True)
        return nu[0] if single else nu

    def ray_crossings(self, x: ArrayLike, direction: ArrayLike,
                      r_max: float = np.inf) -> np.ndarray:
        """
        Radii r in (0, r_max) where x + r·direction crosses ∂Ω.

        Args:
            x: Base point
            direction: Unit direction
            r_max: Upper cutoff

        Returns:
            Sorted array of crossing radii
        """
        x = np.asarray(x, dtype=float).reshape(self.dim)
        e = np.asarray(direction, dtype=float).reshape(self.dim)
        w = x - self.center_point
        hits: List[float] = []
        if self.kind == 'interval':
            a = self.params[0]
            hits = [(a - w[0]) / e[0], (-a - w[0]) / e[0]]
        elif self.kind == 'ball':
            r = self.params[0]
            hits = _quadratic_roots(1.0, 2.0 * float(w @ e), float(w @ w) - r * r)
        elif self.kind == 'ellipse':
            a, b = self.params
            ws = w / np.array([a, b])
            es = e / np.array([a, b])
            hits = _quadratic_roots(float(es @ es), 2.0 * float(ws @ es), float(ws @ ws) - 1.0)
        else:
            a, r = self.params
            tol = 1e-12 * max(1.0, a + r)
            for sign in (-1.0, 1.0):
                wc = w - np.array([sign * a, 0.0])
                for t in _quadratic_roots(1.0, 2.0 * float(wc @ e), float(wc @ wc) - r * r):
                    px = w[0] + t * e[0]
                    if sign * px >= a - tol:
                        hits.append(t)
                if e[1] != 0.0:
                    t = (sign * r - w[1]) / e[1]
                    if abs(w[0] + t * e[0]) <= a + tol:
                        hits.append(t)
        out = np.array(sorted(h for h in hits if 0.0 < h < r_max), dtype=float)
        if out.size > 1:
            keep = np.concatenate([[True], np.diff(out) > 1e-14 * max(1.0, out[-1])])
            out = out[keep]
        return out

    def boundary_points(self, n: int, start_angle: float = np.pi) -> np.ndarray:
        """
        Boundary points seen from the center at n equally spaced angles.

        Intervals always return their two endpoints, left first.
        """
        c = self.center_point
        if self.dim == 1:
            a = self.params[0]
            return np.array([[c[0] - a], [c[0] + a]])
        out = []
        for k in range(n):
            theta = start_angle + 2.0 * np.pi * k / n
            e = np.array([np.cos(theta), np.sin(theta)])
            r = self.ray_crossings(c, e)[-1]
            out.append(c + r * e)
        return np.array(out)


@dataclass(frozen=True, eq=False)
class Ball:
    """Open Euclidean ball used as a merge region and quadrature set."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, 'center', np.asarray(self.center, dtype=float).reshape(-1))
        if not self.radius > 0:
            raise GeometryError("Ball radius must be positive", invariant='radius')

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def contains(self, y: ArrayLike) -> np.ndarray:
        pts, single = as_points(y, self.dim)
        inside = np.linalg.norm(pts - self.center, axis=1) < self.radius
        return inside[0] if single else inside

    def distance_to(self, x: ArrayLike) -> float:
        """Distance from x to the closed ball."""
        x = np.asarray(x, dtype=float).reshape(self.dim)
        return max(float(np.linalg.norm(x - self.center)) - self.radius, 0.0)

    def ray_crossings(self, x: ArrayLike, direction: ArrayLike,
                      r_max: float = np.inf) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(self.dim)
        e = np.asarray(direction, dtype=float).reshape(self.dim)
        w = x - self.center
        hits = _quadratic_roots(1.0, 2.0 * float(w @ e), float(w @ w) - self.radius ** 2)
        return np.array(sorted(h for h in hits if 0.0 < h < r_max), dtype=float)

    def tangent_angles(self, x: ArrayLike) -> List[float]:
        """Directions in [0, π) along which lines through x touch the ball (N = 2)."""
        if self.dim != 2:
            return []
        x = np.asarray(x, dtype=float).reshape(2)
        w = self.center - x
        dist = float(np.linalg.norm(w))
        if dist <= self.radius:
            return []
        base = np.arctan2(w[1], w[0])
        half = np.arcsin(self.radius / dist)
        return sorted(float(np.mod(a, np.pi)) for a in (base - half, base + half))

    def quadrature(self, order: int = 24) -> Tuple[np.ndarray, np.ndarray]:
        """
        Tensor Gauss-Legendre rule on the ball.

        Returns:
            Nodes of shape (m, N) and weights of shape (m,)
        """
        t, wt = leggauss(order)
        if self.dim == 1:
            nodes = self.center[0] + self.radius * t
            return nodes.reshape(-1, 1), self.radius * wt
        r = 0.5 * self.radius * (t + 1.0)
        wr = 0.5 * self.radius * wt * r
        n_theta = 4 * order
        theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        rr, th = np.meshgrid(r, theta, indexing='ij')
        nodes = np.column_stack([(rr * np.cos(th)).ravel(), (rr * np.sin(th)).ravel()])
        weights = np.repeat(wr, n_theta) * (2.0 * np.pi / n_theta)
        return nodes + self.center, weights

    def sample(self, n_radial: int = 41, n_angular: int = 128) -> np.ndarray:
        """Dense sample of the closed ball, including its boundary."""
        radii = np.linspace(0.0, self.radius, n_radial)
        if self.dim == 1:
            return np.concatenate([self.center[0] - radii[::-1], self.center[0] + radii[1:]]).reshape(-1, 1)
        theta = 2.0 * np.pi * np.arange(n_angular) / n_angular
        rr, th = np.meshgrid(radii, theta, indexing='ij')
        pts = np.column_stack([(rr * np.cos(th)).ravel(), (rr * np.sin(th)).ravel()])
        return pts + self.center


@dataclass(frozen=True, eq=False)
class NormalBall(Ball):
    """The ball of radius R/4 placed at depth 7R/4 along the inner normal at x₀."""

    anchor: np.ndarray = field(default=None)
    scale: float = 0.0


def normal_ball(domain: Domain, x0: ArrayLike, R: float) -> NormalBall:
    """
    Construct and verify the normal ball at a boundary point.

    Args:
        domain: The domain Ω
        x0: Boundary point
        R: Scale, with 0 < R < ρ/4

    Returns:
        The verified NormalBall

    Raises:
        PreconditionError: If R is out of range or x0 is not on ∂Ω
        GeometryError: If a containment invariant fails after construction
    """
    rho = domain.interior_sphere_radius()
    if not 0.0 < R < rho / 4.0:
        raise PreconditionError(f"Normal balls need 0 < R < ρ/4 = {rho / 4.0:g}, got R = {R:g}")
    x0 = np.asarray(x0, dtype=float).reshape(domain.dim)
    if not domain.on_boundary(x0):
        raise PreconditionError("Normal balls are anchored at boundary points")
    nu = domain.inner_normal(x0)
    ball = NormalBall(center=x0 + 1.75 * R * nu, radius=0.25 * R, anchor=x0, scale=float(R))

    samples = ball.sample()
    tol = domain.boundary_tolerance()
    gap = np.linalg.norm(samples - x0, axis=1)
    if np.any(gap < 1.5 * R - tol) or np.any(gap > 2.0 * R + tol):
        raise GeometryError("Normal ball leaves the annulus D_2R \\ D_3R/2", invariant='annulus')
    depth = domain.signed_distance(samples)
    if np.any(depth < 1.5 * R - tol):
        raise GeometryError("Normal ball comes closer than 3R/2 to the boundary", invariant='depth')
    return ball


# ----------------------------------------------------------------------
# opened regions

@dataclass(frozen=True, eq=False)
class DiscSet:
    """D_r(c) = B_r(c) ∩ Ω."""

    center: np.ndarray
    radius: float

    def mask(self, grid: 'Grid') -> np.ndarray:
        gap = np.linalg.norm(grid.nodes - np.asarray(self.center, dtype=float), axis=1)
        return (gap < self.radius) & grid.interior


@dataclass(frozen=True, eq=False)
class AnnulusSet:
    """D_outer(c) \\ D_inner(c)."""

    center: np.ndarray
    inner: float
    outer: float

    def mask(self, grid: 'Grid') -> np.ndarray:
        gap = np.linalg.norm(grid.nodes - np.asarray(self.center, dtype=float), axis=1)
        return (gap >= self.inner) & (gap < self.outer) & grid.interior


@dataclass(frozen=True, eq=False)
class MaskSet:
    """A node set given directly as a flat boolean mask."""

    values: np.ndarray

    def mask(self, grid: 'Grid') -> np.ndarray:
        return np.asarray(self.values, dtype=bool) & grid.interior


@dataclass(frozen=True, eq=False)
class OpenedRegion:
    parent: object
    structuring_radius: float
    mask: np.ndarray
    grid: 'Grid'

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.mask))

    def inradius(self) -> float:
        """Radius of the largest ball of nodes inside the region."""
        edt = ndimage.distance_transform_edt(self.mask.reshape(self.grid.shape))
        return float(edt.max()) * self.grid.h


def disc_footprint(radius: float, h: float, dim: int) -> np.ndarray:
    """Boolean structuring element of all offsets k with |k|·h ≤ radius."""
    m = int(np.floor(radius / h + 1e-9))
    axes = np.meshgrid(*([np.arange(-m, m + 1)] * dim), indexing='ij')
    dist2 = sum(a.astype(float) ** 2 for a in axes)
    return dist2 * h * h <= radius * radius * (1.0 + 1e-12)


def opened_region(domain: Domain, parent, structuring_radius: float,
                  grid: 'Grid') -> OpenedRegion:
    """
    Morphological opening of a parent set restricted to Ω.

    Args:
        domain: The domain Ω
        parent: DiscSet, AnnulusSet or MaskSet
        structuring_radius: Radius of the structuring ball, at least 2h
        grid: Grid carrying the mask

    Returns:
        OpenedRegion whose mask is the erosion-then-dilation of the parent

    Raises:
        PreconditionError: If the structuring radius is below 2h
        GeometryError: If the opening is empty
    """
    if grid.domain != domain:
        raise PreconditionError("Grid does not belong to this domain")
    if structuring_radius < 2.0 * grid.h * (1.0 - 1e-12):
        raise PreconditionError(
            f"Structuring radius {structuring_radius:g} is below twice the spacing {grid.h:g}"
        )
    footprint = disc_footprint(structuring_radius, grid.h, grid.dim)
    base = parent.mask(grid).reshape(grid.shape)
    eroded = ndimage.binary_erosion(base, structure=footprint, border_value=0)
    opened = ndimage.binary_dilation(eroded, structure=footprint) & base
    if not opened.any():
        raise GeometryError("Opened region is empty", invariant='nonempty')
    logger.debug("Opened region keeps %d of %d parent nodes",
                 int(opened.sum()), int(base.sum()))
    return OpenedRegion(parent=parent, structuring_radius=float(structuring_radius),
                        mask=opened.ravel(), grid=grid)
