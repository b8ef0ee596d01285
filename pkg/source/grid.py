#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Grid Module
Uniform Cartesian node sets covering a domain, and nodal fields on them.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ContractError, PreconditionError
from .geometry import Domain, as_points

# Unknown-count caps per dimension
MAX_UNKNOWNS = {1: 4096, 2: 128 * 128}

FIELD_KINDS = ('dirichlet', 'free')


@dataclass(frozen=True, eq=False)
class Grid:
    """
    Uniform grid with spacing h on a box that contains Ω with a margin.

    Node k has coordinates lower + h·index(k); flat ordering is row-major
    over `shape`.
    """

    domain: Domain
    h: float
    lower: Tuple[float, ...]
    shape: Tuple[int, ...]

    def __post_init__(self):
        if not self.h > 0:
            raise ContractError(f"Grid spacing must be positive, got {self.h}")
        if len(self.lower) != self.domain.dim or len(self.shape) != self.domain.dim:
            raise ContractError("Grid box does not match the domain dimension")
        cap = MAX_UNKNOWNS[self.dim]
        if self.n_interior > cap:
            raise ContractError(
                f"Grid has {self.n_interior} unknowns, above the N={self.dim} cap of {cap}"
            )
        if self.n_interior == 0:
            raise ContractError("Grid has no node inside the domain")

    @classmethod
    def covering(cls, domain: Domain, h: float, margin: int = 2) -> 'Grid':
        """
        Grid centered on the domain, extending `margin` nodes past its box.

        Args:
            domain: The domain to cover
            h: Spacing
            margin: Number of extra nodes beyond the bounding box, at least 2

        Returns:
            The grid
        """
        if margin < 2:
            raise PreconditionError("Grid margin must be at least 2 nodes")
        if not h > 0:
            raise ContractError(f"Grid spacing must be positive, got {h}")
        lo, hi = domain.bounding_box()
        center = domain.center_point
        lower, shape = [], []
        for axis in range(domain.dim):
            half = max(hi[axis] - center[axis], center[axis] - lo[axis])
            k = int(np.ceil(half / h - 1e-9)) + margin
            lower.append(float(center[axis] - k * h))
            shape.append(2 * k + 1)
        return cls(domain, float(h), tuple(lower), tuple(shape))

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def index(self) -> np.ndarray:
        axes = np.meshgrid(*[np.arange(n) for n in self.shape], indexing='ij')
        return np.stack([a.ravel() for a in axes], axis=1)

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float) + self.h * self.index

    @cached_property
    def signed_distance(self) -> np.ndarray:
        return np.atleast_1d(self.domain.signed_distance(self.nodes))

    @cached_property
    def interior(self) -> np.ndarray:
        # nodes that sit on ∂Ω up to rounding count as exterior
        return self.signed_distance > 1e-9 * self.h

    @cached_property
    def distance(self) -> np.ndarray:
        return np.where(self.interior, self.signed_distance, 0.0)

    @property
    def n_interior(self) -> int:
        return int(np.count_nonzero(self.interior))

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(self.lower[a] + self.h * np.arange(n) for a, n in enumerate(self.shape))

    def same_as(self, other: 'Grid') -> bool:
        return (self is other or (self.domain == other.domain and self.h == other.h
                                  and self.lower == other.lower and self.shape == other.shape))

    def refined(self, levels: int = 1) -> 'Grid':
        return Grid.covering(self.domain, self.h / 2 ** levels)

    def translated(self, shift: Union[float, Sequence[float]]) -> 'Grid':
        shift = np.asarray(shift, dtype=float).reshape(self.dim)
        lower = tuple(float(v) for v in np.asarray(self.lower) + shift)
        return Grid(self.domain.translated(shift), self.h, lower, self.shape)

    def locate(self, points) -> Tuple[np.ndarray, np.ndarray]:
        """
        Nearest node of each point.

        Returns:
            Flat node indices and the distance of each point to its node
        """
        pts, _ = as_points(points, self.dim)
        k = np.rint((pts - np.asarray(self.lower)) / self.h).astype(int)
        k = np.clip(k, 0, np.asarray(self.shape) - 1)
        flat = np.ravel_multi_index(tuple(k.T), self.shape)
        gap = np.linalg.norm(pts - self.nodes[flat], axis=1)
        return flat, gap

    def node_index(self, point) -> int:
        flat, gap = self.locate(point)
        if gap[0] > 1e-9 * self.h:
            raise PreconditionError(f"Point {point} is not a grid node")
        return int(flat[0])

    def reshape(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values).reshape(self.shape)


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values on a grid; dirichlet fields vanish at exterior nodes."""

    grid: Grid
    values: np.ndarray
    kind: str = 'dirichlet'

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ContractError(f"Unknown field kind: {self.kind}")
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.shape[0] != self.grid.size:
            raise ContractError(
                f"Field has {values.shape[0]} values for a grid of {self.grid.size} nodes"
            )
        if self.kind == 'dirichlet' and np.any(values[~self.grid.interior] != 0.0):
            raise ContractError("Dirichlet field is nonzero at an exterior node")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def zeros(cls, grid: Grid) -> 'Field':
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[[np.ndarray], np.ndarray],
                      kind: str = 'dirichlet') -> 'Field':
        """Sample func at the nodes; dirichlet fields are cut to Ω."""
        values = np.broadcast_to(np.asarray(func(grid.nodes), dtype=float).reshape(-1),
                                 (grid.size,))
        if kind == 'dirichlet':
            values = np.where(grid.interior, values, 0.0)
        return cls(grid, values, kind)

    @classmethod
    def from_interior(cls, grid: Grid, interior_values: np.ndarray,
                      mask: Optional[np.ndarray] = None) -> 'Field':
        """Place values at the nodes of `mask` (default: Ω) and zero elsewhere."""
        mask = grid.interior if mask is None else mask
        values = np.zeros(grid.size)
        values[mask] = interior_values
        kind = 'dirichlet' if not np.any(mask & ~grid.interior) else 'free'
        return cls(grid, values, kind)

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior]

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def as_array(self) -> np.ndarray:
        return self.grid.reshape(self.values)

    def _check_same_grid(self, other: 'Field') -> None:
        if not self.grid.same_as(other.grid):
            raise ContractError("Fields live on different grids")

    def _combined_kind(self, other: 'Field') -> str:
        return 'dirichlet' if self.kind == other.kind == 'dirichlet' else 'free'

    def __mul__(self, t: float) -> 'Field':
        return Field(self.grid, float(t) * self.values, self.kind)

    __rmul__ = __mul__

    def __neg__(self) -> 'Field':
        return Field(self.grid, -self.values, self.kind)

    def __add__(self, other: 'Field') -> 'Field':
        self._check_same_grid(other)
        return Field(self.grid, self.values + other.values, self._combined_kind(other))

    def __sub__(self, other: 'Field') -> 'Field':
        self._check_same_grid(other)
        return Field(self.grid, self.values - other.values, self._combined_kind(other))

    def at(self, point) -> float:
        """Value at a grid node."""
        return float(self.values[self.grid.node_index(point)])

    @cached_property
    def _interpolator(self) -> RegularGridInterpolator:
        return RegularGridInterpolator(self.grid.axes(), self.as_array(), method='linear',
                                       bounds_error=False, fill_value=0.0)

    def __call__(self, points) -> np.ndarray:
        """Piecewise-linear interpolation, zero outside the grid box."""
        pts, single = as_points(points, self.grid.dim)
        out = self._interpolator(pts)
        return out[0] if single else out
