"""Uniform midpoint grids on [0,1]^d and the quadrature inner product."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Midpoint discretisation of [0,1]^dim.

    ``resolution`` is the total node count, i.e. 1/du.  In 2D the nodes form a
    square lattice with ``per_axis = sqrt(resolution)`` points on each side.
    """

    dim: int
    resolution: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.resolution < 2:
            raise ValueError(f"resolution must be >= 2, got {self.resolution}")
        if self.dim == 2 and math.isqrt(self.resolution) ** 2 != self.resolution:
            raise ValueError(
                f"2D resolution must be a perfect square, got {self.resolution}"
            )

    @property
    def per_axis(self) -> int:
        return self.resolution if self.dim == 1 else math.isqrt(self.resolution)

    @property
    def du(self) -> float:
        """Cell measure (quadrature weight of every node)."""
        return 1.0 / self.resolution

    @property
    def shape(self) -> tuple:
        return (self.per_axis,) * self.dim

    def axis_nodes(self) -> np.ndarray:
        n = self.per_axis
        return (np.arange(n) + 0.5) / n

    def nodes(self):
        """Node coordinates: a 1D array, or an ``(U, V)`` pair in ij indexing."""
        x = self.axis_nodes()
        if self.dim == 1:
            return x
        return tuple(np.meshgrid(x, x, indexing="ij"))

    def weights(self) -> np.ndarray:
        return np.full(self.shape, self.du)

    def zeros(self, dtype=float) -> "FieldSample":
        return FieldSample(self, np.zeros(self.shape, dtype=dtype))


def make_grid(dim: int, resolution: int) -> Grid:
    return Grid(dim, resolution)


class FieldSample:
    """Values of a (complex) function at the nodes of a grid.

    The array is stored with shape ``grid.shape`` and is read-only.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        values = np.array(values, copy=True)
        if values.size != grid.resolution:
            raise ValueError(
                f"expected {grid.resolution} values for {grid}, got {values.size}"
            )
        values = values.reshape(grid.shape)
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    def __repr__(self):
        return f"FieldSample({self.grid}, dtype={self.values.dtype})"

    def _check(self, other):
        if not isinstance(other, FieldSample):
            return NotImplemented
        if other.grid != self.grid:
            raise ValueError(f"grid mismatch: {self.grid} vs {other.grid}")
        return other

    def __add__(self, other):
        other = self._check(other)
        return FieldSample(self.grid, self.values + other.values)

    def __sub__(self, other):
        other = self._check(other)
        return FieldSample(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return FieldSample(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldSample(self.grid, -self.values)


def field(grid: Grid, fn) -> FieldSample:
    """Sample ``fn`` at the grid nodes (``fn(u)`` in 1D, ``fn(u, v)`` in 2D)."""
    nodes = grid.nodes()
    values = fn(nodes) if grid.dim == 1 else fn(*nodes)
    return FieldSample(grid, np.broadcast_to(values, grid.shape))


def inner(f: FieldSample, g: FieldSample) -> complex:
    """Midpoint-rule approximation of the integral of f * conj(g)."""
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: {f.grid} vs {g.grid}")
    return complex(np.vdot(g.values, f.values) * f.grid.du)


def norm(f: FieldSample) -> float:
    return math.sqrt(max(inner(f, f).real, 0.0))
