"""Parameter sets, grids, solution fields and initial data."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError

__all__ = [
    "ModelParams",
    "Grid2D",
    "TimeGrid",
    "Field",
    "OffGridWarning",
    "dirac_initial",
    "gaussian_initial",
    "mass",
    "write_field_csv",
    "write_field_summary",
    "field_summary",
]


class OffGridWarning(UserWarning):
    """The Dirac location was snapped to the nearest mesh node."""


@dataclass(frozen=True)
class ModelParams:
    """Constant coefficients of the model SPDE.

    The drifts move the density, ``rho_x``/``rho_y`` weight the observation
    noise in each direction and ``rho_xy`` correlates the two drivers.
    """

    mu_x: float = 0.0
    mu_y: float = 0.0
    rho_x: float = 0.0
    rho_y: float = 0.0
    rho_xy: float = 0.0

    def __post_init__(self):
        for name in ("rho_x", "rho_y"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ParameterError(f"{name}={v} must satisfy 0 <= {name} < 1")
        if not -1.0 <= self.rho_xy <= 1.0:
            raise ParameterError(f"rho_xy={self.rho_xy} must lie in [-1, 1]")


def _node_count(lo, hi, h, axis):
    if h <= 0:
        raise ParameterError(f"h_{axis}={h} must be positive")
    if hi <= lo:
        raise ParameterError(f"{axis}_max must exceed {axis}_min")
    cells = round((hi - lo) / h)
    if abs(lo + cells * h - hi) > 1e-12 * max(1.0, abs(hi), abs(lo)):
        raise ParameterError(
            f"h_{axis}={h} does not divide [{lo}, {hi}] into whole cells"
        )
    if cells < 2:
        raise ParameterError(f"need at least one interior node along {axis}")
    return cells - 1


@dataclass(frozen=True)
class Grid2D:
    """Uniform mesh on a truncated rectangle with zero Dirichlet boundary.

    Node ``i`` along x sits at ``x_min + i*h_x`` for ``i = 0 .. n_x+1``; only the
    ``n_x * n_y`` interior nodes carry unknowns.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    h_x: float
    h_y: float
    n_x: int = field(default=-1)
    n_y: int = field(default=-1)

    def __post_init__(self):
        n_x = _node_count(self.x_min, self.x_max, self.h_x, "x")
        n_y = _node_count(self.y_min, self.y_max, self.h_y, "y")
        if self.n_x not in (-1, n_x) or self.n_y not in (-1, n_y):
            raise ParameterError(
                f"node counts ({self.n_x}, {self.n_y}) inconsistent with bounds "
                f"and mesh widths (expected ({n_x}, {n_y}))"
            )
        object.__setattr__(self, "n_x", n_x)
        object.__setattr__(self, "n_y", n_y)

    @classmethod
    def square(cls, lo, hi, h):
        return cls(lo, hi, lo, hi, h, h)

    @property
    def shape(self):
        return (self.n_x, self.n_y)

    @property
    def x(self):
        """Interior x coordinates."""
        return self.x_min + self.h_x * np.arange(1, self.n_x + 1)

    @property
    def y(self):
        return self.y_min + self.h_y * np.arange(1, self.n_y + 1)

    @property
    def x_full(self):
        """x coordinates including both boundary nodes."""
        return self.x_min + self.h_x * np.arange(self.n_x + 2)

    @property
    def y_full(self):
        return self.y_min + self.h_y * np.arange(self.n_y + 2)

    def coord_of(self, i, j):
        return self.x_min + i * self.h_x, self.y_min + j * self.h_y

    def index_of(self, x, y):
        """Nearest node indices (boundary nodes are 0 and n+1)."""
        return (
            int(round((x - self.x_min) / self.h_x)),
            int(round((y - self.y_min) / self.h_y)),
        )

    def refine(self, factor=2):
        return Grid2D(
            self.x_min, self.x_max, self.y_min, self.y_max,
            self.h_x / factor, self.h_y / factor,
        )

    def as_dict(self):
        return {
            "x_min": self.x_min, "x_max": self.x_max,
            "y_min": self.y_min, "y_max": self.y_max,
            "h_x": self.h_x, "h_y": self.h_y,
            "n_x": self.n_x, "n_y": self.n_y,
        }


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int

    def __post_init__(self):
        if self.T <= 0:
            raise ParameterError(f"T={self.T} must be positive")
        if int(self.N) != self.N or self.N < 0:
            raise ParameterError(f"N={self.N} must be a non-negative integer")
        object.__setattr__(self, "N", int(self.N))

    @classmethod
    def from_step(cls, T, k):
        N = round(T / k)
        if abs(N * k - T) > 1e-12 * T:
            raise ParameterError(f"k={k} does not divide T={T}")
        return cls(T, N)

    @property
    def k(self):
        return self.T / self.N


@dataclass
class Field:
    """Grid function on the interior nodes; ``values[i-1, j-1]`` is node (i, j)."""

    values: np.ndarray
    grid: Grid2D

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ParameterError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )

    @classmethod
    def zeros(cls, grid):
        return cls(np.zeros(grid.shape), grid)

    def copy(self):
        return Field(self.values.copy(), self.grid)

    def with_values(self, values):
        return Field(values, self.grid)


def mass(f):
    """Discrete integral of a field."""
    return float(f.values.sum() * f.grid.h_x * f.grid.h_y)


def dirac_initial(grid, x0, y0):
    """Point mass of unit integral at the node nearest to ``(x0, y0)``."""
    if not (grid.x_min < x0 < grid.x_max and grid.y_min < y0 < grid.y_max):
        raise DomainError(f"({x0}, {y0}) lies outside the open domain")
    i0, j0 = grid.index_of(x0, y0)
    if not (1 <= i0 <= grid.n_x and 1 <= j0 <= grid.n_y):
        raise DomainError(f"({x0}, {y0}) rounds onto the boundary")
    xi, yj = grid.coord_of(i0, j0)
    if abs(xi - x0) > 1e-9 * grid.h_x or abs(yj - y0) > 1e-9 * grid.h_y:
        warnings.warn(
            f"Dirac location ({x0}, {y0}) is off-grid; using node ({xi}, {yj})",
            OffGridWarning,
            stacklevel=2,
        )
    v = np.zeros(grid.shape)
    v[i0 - 1, j0 - 1] = 1.0 / (grid.h_x * grid.h_y)
    return Field(v, grid)


def gaussian_initial(grid, params, x0, y0):
    """Smooth initial datum: the noise-free Dirac solution after unit time."""
    sx = 1.0 - params.rho_x
    sy = 1.0 - params.rho_y
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    expo = -((X - x0 - params.mu_x) ** 2) / (2 * sx) - ((Y - y0 - params.mu_y) ** 2) / (2 * sy)
    return Field(np.exp(expo) / (2 * math.pi * math.sqrt(sx * sy)), grid)


def write_field_csv(f, path):
    X, Y = np.meshgrid(f.grid.x, f.grid.y, indexing="ij")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"])
        for x, y, v in zip(X.ravel(), Y.ravel(), f.values.ravel()):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(v))])


def field_summary(f):
    i, j = np.unravel_index(int(np.argmax(f.values)), f.grid.shape)
    return {
        "mass": mass(f),
        "min": float(f.values.min()),
        "max": float(f.values.max()),
        "argmax": [float(f.grid.x[i]), float(f.grid.y[j])],
    }


def write_field_summary(f, path):
    with open(path, "w") as fh:
        json.dump(field_summary(f), fh, indent=2)
