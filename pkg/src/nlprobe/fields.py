"""Uniform node-centred 2D grids and sampled fields.

Arrays are indexed ``values[i, j] = f(x_i, y_j)`` with shape ``(nx, ny)``;
the first axis runs along x.  Stored row-major (C order), so the x index is
the slow one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    xmin: float = -1.0
    xmax: float = 1.0
    ymin: float = -1.0
    ymax: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ConfigError(f"grid needs nx, ny >= 2 (got {self.nx}, {self.ny})")
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ConfigError("grid extents must satisfy xmax > xmin and ymax > ymin")

    @classmethod
    def square(cls, n: int, half_width: float = 1.0) -> "GridSpec":
        return cls(n, n, -half_width, half_width, -half_width, half_width)

    @classmethod
    def with_spacing(cls, dx: float, xmin=-1.0, xmax=1.0, ymin=-1.0, ymax=1.0) -> "GridSpec":
        """Grid whose spacing is at most ``dx`` in both directions."""
        nx = int(np.ceil((xmax - xmin) / dx - 1e-9)) + 1
        ny = int(np.ceil((ymax - ymin) / dx - 1e-9)) + 1
        return cls(nx, ny, xmin, xmax, ymin, ymax)

    @property
    def dx(self) -> float:
        return (self.xmax - self.xmin) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.ymax - self.ymin) / (self.ny - 1)

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.xmin, self.xmax, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.ymin, self.ymax, self.ny)

    @property
    def is_square(self) -> bool:
        return np.isclose(self.xmax - self.xmin, self.ymax - self.ymin, rtol=0, atol=1e-12)

    @property
    def center(self):
        return 0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax)

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def index_of(self, x: float, y: float):
        """Nearest node to the physical point ``(x, y)``."""
        i = int(round((x - self.xmin) / self.dx))
        j = int(round((y - self.ymin) / self.dy))
        return min(max(i, 0), self.nx - 1), min(max(j, 0), self.ny - 1)

    def to_index(self, x, y):
        """Fractional array coordinates of physical points (for interpolation)."""
        return (np.asarray(x) - self.xmin) / self.dx, (np.asarray(y) - self.ymin) / self.dy


@dataclass(frozen=True)
class Field:
    """A real or complex field sampled on a :class:`GridSpec`."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ConfigError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)
