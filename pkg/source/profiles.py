#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Closed-Form Profiles Module
Explicit functions used as references: the p = 2 solution on balls and its
constant, an independent quadrature oracle for that constant in N = 1, and
distance powers d_Ω^s.
"""

from typing import Callable

import numpy as np
from scipy import integrate, special

from .errors import PreconditionError
from .geometry import Domain, as_points


def explicit_constant(dim: int, s: float) -> float:
    """
    Value of the operator (p = 2) applied to (1 - |x|²)_+^s inside the unit
    ball: 2π^{N/2+1} / (sin(πs) Γ(N/2)).

    For N = 1 this is 2π / sin(πs).
    """
    return float(2.0 * np.pi ** (0.5 * dim + 1.0) / (np.sin(np.pi * s) * special.gamma(0.5 * dim)))


def explicit_constant_quadrature(s: float) -> float:
    """
    The N = 1 constant computed directly from the principal-value integral
    at x = 0, by adaptive quadrature with algebraic endpoint weights.
    """
    if not 0.0 < s < 1.0:
        raise PreconditionError(f"s must lie in (0, 1), got {s}")
    def smooth_part(r: float) -> float:
        if r == 0.0:
            return s
        return -np.expm1(s * np.log1p(-r * r)) / (r * r)

    near, _ = integrate.quad(
        smooth_part, 0.0, 0.5,
        weight='alg', wvar=(1.0 - 2.0 * s, 0.0), epsabs=1e-15, epsrel=1e-13, limit=200,
    )
    plain, _ = integrate.quad(lambda r: r ** (-1.0 - 2.0 * s), 0.5, 1.0,
                              epsabs=1e-15, epsrel=1e-13)
    edge, _ = integrate.quad(
        lambda r: r ** (-1.0 - 2.0 * s) * (1.0 + r) ** s, 0.5, 1.0,
        weight='alg', wvar=(0.0, s), epsabs=1e-15, epsrel=1e-13, limit=200,
    )
    return 4.0 * (near + plain - edge + 0.5 / s)


def explicit_solution(domain: Domain, s: float, load: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """
    Exact p = 2 solution with constant load on a ball or interval:
    load·(r² - |x - c|²)_+^s / explicit_constant(N, s).

    Raises:
        PreconditionError: For domains other than balls and intervals
    """
    if domain.kind not in ('interval', 'ball'):
        raise PreconditionError("The explicit solution is only known on balls")
    radius = domain.params[0]
    center = domain.center_point
    scale = load / explicit_constant(domain.dim, s)

    def solution(x):
        pts, single = as_points(x, domain.dim)
        gap = radius * radius - np.sum((pts - center) ** 2, axis=1)
        out = scale * np.maximum(gap, 0.0) ** s
        return out[0] if single else out

    return solution


def distance_power(domain: Domain, s: float, scale: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """scale·d_Ω(x)^s as a vectorized function."""

    def profile(x):
        return scale * domain.distance(x) ** s

    return profile
