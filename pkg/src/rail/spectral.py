"""Uniform periodic grids and Fourier collocation differentiation matrices.

References
----------
L. N. Trefethen, *Spectral Methods in MATLAB*, SIAM, 2000 (programs 2 and 4).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .exceptions import ArgumentError

__all__ = ["Grid1D", "Grid2D", "DiffOps", "make_grid", "fourier_diff"]


@dataclass(frozen=True)
class Grid1D:
    """``n`` equispaced points covering ``[left, right)``; the right end is identified with the left."""

    n: int
    left: float
    right: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4 or self.n % 2:
            raise ArgumentError(f"grid size must be an even integer >= 4, got {self.n}")
        if not self.right > self.left:
            raise ArgumentError(f"empty interval [{self.left}, {self.right})")
        object.__setattr__(self, "n", int(self.n))

    @property
    def length(self) -> float:
        return self.right - self.left

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def points(self) -> np.ndarray:
        return self.left + self.dx * np.arange(self.n)


@dataclass(frozen=True)
class Grid2D:
    x: Grid1D
    y: Grid1D

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x.n, self.y.n)

    @property
    def cell_area(self) -> float:
        return self.x.dx * self.y.dx

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays indexed ``[i, j]`` with ``i`` along x."""
        return np.meshgrid(self.x.points, self.y.points, indexing="ij")


@dataclass(frozen=True)
class DiffOps:
    d1: np.ndarray
    d2: np.ndarray


def make_grid(n: int, left: float, right: float) -> Grid1D:
    return Grid1D(n, float(left), float(right))


def fourier_diff(grid: Grid1D) -> DiffOps:
    """First and second derivative matrices on a periodic grid.

    The second-derivative matrix comes from its own closed form rather than
    ``d1 @ d1``: on an even grid the squared first-derivative matrix zeroes
    the Nyquist mode, while the direct formula gives it ``-(n/2)^2``.
    """
    n = grid.n
    h = 2.0 * np.pi / n
    k = np.arange(1, n)
    sign = (-1.0) ** k
    scale = 2.0 * np.pi / grid.length

    col1 = np.concatenate(([0.0], 0.5 * sign / np.tan(0.5 * k * h)))
    d1 = toeplitz(col1, col1[np.r_[0, n - 1 : 0 : -1]])

    col2 = np.concatenate(
        ([-np.pi**2 / (3.0 * h**2) - 1.0 / 6.0], -0.5 * sign / np.sin(0.5 * k * h) ** 2)
    )
    d2 = toeplitz(col2)
    return DiffOps(d1 * scale, d2 * scale**2)
