#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Quadrature Module
Parameters and rules for the singular integrals: composite Gauss-Legendre
panels graded geometrically toward every breakpoint of a ray, and an
adaptive angular integral for N = 2.
"""

import logging
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Iterable, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from .errors import ContractError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureScheme:
    """
    Settings for pointwise evaluation of the operator.

    Attributes:
        h: Reference grid spacing (sets the 2h admissibility margin)
        eps: Inner exclusion radius ε_h of the principal value
        far_radius: Split radius T beyond which the field is zero
        order: Gauss-Legendre points per panel
        grading: Geometric ratio of consecutive panels toward a breakpoint
        floor: Smallest panel width next to a breakpoint, relative to T
        angular_rtol: Relative tolerance of the angular integral (N = 2)
        angular_limit: Subinterval cap of the angular integral
        ball_order: Gauss-Legendre order of nonsingular ball quadratures
        tol: Target tolerance reported by checks built on this scheme
        workers: Thread count for block assembly
    """

    h: float
    eps: float
    far_radius: float
    order: int = 16
    grading: float = 0.15
    floor: float = 1e-13
    angular_rtol: float = 1e-10
    angular_limit: int = 400
    ball_order: int = 24
    tol: float = 1e-6
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.eps <= self.h <= self.far_radius:
            raise ContractError(
                f"Quadrature needs 0 < eps <= h <= T, got eps={self.eps:g}, "
                f"h={self.h:g}, T={self.far_radius:g}"
            )
        if self.order < 2 or not 0.0 < self.grading < 1.0 or self.floor <= 0.0:
            raise ContractError("Invalid panel settings")
        if self.workers < 1:
            raise ContractError("workers must be at least 1")

    @classmethod
    def for_grid(cls, grid, **overrides) -> 'QuadratureScheme':
        """
        Default scheme for a grid: T is twice the box diagonal, so every
        point of the box sees the whole box inside B_T.
        """
        extent = grid.h * (np.asarray(grid.shape) - 1)
        far = 2.0 * float(np.linalg.norm(extent))
        settings = {'h': grid.h, 'eps': min(grid.h, 1e-12 * far), 'far_radius': far}
        settings.update(overrides)
        return cls(**settings)

    def refined(self) -> 'QuadratureScheme':
        """Same scheme for a grid of half the spacing."""
        return replace(self, h=0.5 * self.h, eps=min(self.eps, 0.5 * self.h))

    def with_eps(self, eps: float) -> 'QuadratureScheme':
        return replace(self, eps=eps)


def sphere_measure(dim: int) -> float:
    """|S^{N-1}|: 2 for N = 1, 2π for N = 2."""
    return 2.0 if dim == 1 else 2.0 * np.pi


@lru_cache(maxsize=16)
def _reference_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def graded_cuts(a: float, b: float, ratio: float, floor: float) -> np.ndarray:
    """
    Panel endpoints on [a, b], geometrically refined toward both ends.

    Each half is cut at distances L·ratio^k from its end until the panel
    touching the end is narrower than `floor`.
    """
    if b <= a:
        return np.array([a, b])
    half = 0.5 * (b - a)
    levels = max(int(np.ceil(np.log(floor / half) / np.log(ratio))), 0)
    offsets = half * ratio ** np.arange(1, levels + 1)
    left = a + offsets[::-1]
    right = b - offsets
    return np.concatenate([[a], left, [a + half], right, [b]])


def panel_rule(cuts: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on consecutive panels."""
    t, w = _reference_rule(order)
    lo = cuts[:-1, None]
    width = np.diff(cuts)[:, None]
    nodes = lo + 0.5 * width * (t + 1.0)
    weights = 0.5 * width * w
    return nodes.ravel(), weights.ravel()


def ray_rule(breaks: Iterable[float], r_lo: float, r_hi: float,
             scheme: QuadratureScheme) -> Tuple[np.ndarray, np.ndarray]:
    """
    Radial rule on [r_lo, r_hi] split at `breaks` and graded toward every
    split point.

    Args:
        breaks: Radii where the integrand loses smoothness
        r_lo: Lower radius, usually ε_h
        r_hi: Upper radius, usually T
        scheme: Panel settings

    Returns:
        Nodes and weights
    """
    inner = sorted(b for b in breaks if r_lo < b < r_hi)
    points = np.array([r_lo] + inner + [r_hi], dtype=float)
    floor = scheme.floor * scheme.far_radius
    cuts = [graded_cuts(points[k], points[k + 1], scheme.grading, floor)
            for k in range(len(points) - 1)]
    all_cuts = np.concatenate([cuts[0]] + [c[1:] for c in cuts[1:]])
    return panel_rule(all_cuts, scheme.order)


def angular_integral(func: Callable[[float], float], points: Sequence[float],
                     scheme: QuadratureScheme, upper: float = np.pi) -> float:
    """
    Adaptive integral of func over [0, upper], with known kinks at `points`.
    """
    inner = sorted({float(p) for p in points if 0.0 < p < upper})
    with warnings.catch_warnings():
        warnings.simplefilter('error', integrate.IntegrationWarning)
        try:
            value, error = integrate.quad(
                func, 0.0, upper, points=inner or None, epsabs=1e-13,
                epsrel=scheme.angular_rtol, limit=scheme.angular_limit,
            )
        except integrate.IntegrationWarning as exc:
            warnings.simplefilter('ignore', integrate.IntegrationWarning)
            value, error = integrate.quad(
                func, 0.0, upper, points=inner or None, epsabs=1e-13,
                epsrel=scheme.angular_rtol, limit=scheme.angular_limit,
            )
            logger.debug("Angular quadrature stopped early (%s); error estimate %.3g",
                         exc, error)
    return value
