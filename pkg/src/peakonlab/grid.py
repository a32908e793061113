"""Uniform 1-D grids, grid functions and quadrature helpers.

Everything downstream (kernels, field states, the PDE solver, diagnostics)
works on these two carriers: a ``SpatialGrid`` describing the node layout and
a ``GridFunction`` bundling nodal samples with their grid.  Quadrature is
trapezoidal throughout; it is exact for piecewise-linear data and keeps
non-negative integrands non-negative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid on [x_min, x_max] with n_nodes nodes."""

    x_min: float
    x_max: float
    n_nodes: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"x_min={self.x_min} must be < x_max={self.x_max}")
        if self.n_nodes < 16:
            raise ValueError(f"n_nodes={self.n_nodes} must be >= 16")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n_nodes - 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.n_nodes)

    def index_of(self, x: float) -> int:
        """Nearest node index (clipped to the grid)."""
        i = int(round((x - self.x_min) / self.h))
        return min(max(i, 0), self.n_nodes - 1)

    @staticmethod
    def regular(x_min: float, x_max: float, h: float) -> "SpatialGrid":
        """Grid with spacing as close to h as an integer node count allows."""
        n = int(round((x_max - x_min) / h)) + 1
        return SpatialGrid(x_min, x_max, n)


@dataclass(frozen=True)
class GridFunction:
    """Real-valued nodal samples on a uniform grid."""

    grid: SpatialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] != self.grid.n_nodes:
            raise ValueError(
                f"values shape {v.shape} does not match grid with "
                f"{self.grid.n_nodes} nodes"
            )
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def h(self) -> float:
        return self.grid.h

    def integral(self) -> float:
        return trapz(self.values, self.h)

    def __call__(self, xq) -> np.ndarray:
        """Linear interpolation at query points (0 outside the grid)."""
        return np.interp(xq, self.grid.x, self.values, left=0.0, right=0.0)


def trapz(values: np.ndarray, h: float) -> float:
    """Trapezoid quadrature with uniform spacing h."""
    return float(np.trapezoid(values, dx=h))


def trapz_between(f: GridFunction, a: float, b: float) -> float:
    """Trapezoid integral of f over [a, b] (clipped to the grid).

    Partial end cells are handled by linear interpolation, so the result is
    continuous in a and b.
    """
    if b <= a:
        return 0.0
    x = f.grid.x
    a = max(a, x[0])
    b = min(b, x[-1])
    if b <= a:
        return 0.0
    xs = np.concatenate(([a], x[(x > a) & (x < b)], [b]))
    return float(np.trapezoid(np.interp(xs, x, f.values), xs))


def h1_norm(u: np.ndarray, ux: np.ndarray, h: float) -> float:
    return float(np.sqrt(trapz(u * u + ux * ux, h)))


def w11_norm(u: np.ndarray, ux: np.ndarray, h: float) -> float:
    return trapz(np.abs(u), h) + trapz(np.abs(ux), h)


def linf_norm(u: np.ndarray) -> float:
    return float(np.max(np.abs(u)))
