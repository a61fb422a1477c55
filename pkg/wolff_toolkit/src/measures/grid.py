from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..utils.errors import DomainError, InvariantError
from ..utils.validators import validate_grid_dimension, validate_positive

# node-on-sphere ties count as inside the ball
BALL_EPS = 1e-12


def grid_size(L: float, h: float) -> int:
    """Number of nodes per axis for nodes x = −L + i·h covering [−L, L]."""
    N = int(round(2.0 * L / h)) + 1
    if abs((N - 1) * h - 2.0 * L) > 1e-9 * max(L, 1.0):
        raise DomainError(f"box half-width L={L} is not a multiple of h/2 (h={h})")
    return N


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Density samples on the uniform grid x = −L + i·h, i = 0..N−1 per axis.

    Each node stands for a cell of volume hⁿ; masses are density·hⁿ.
    """

    density: np.ndarray
    h: float
    n: int
    L: float

    def __post_init__(self) -> None:
        validate_grid_dimension(int(self.n))
        validate_positive("spacing h", float(self.h))
        validate_positive("box half-width L", float(self.L))
        dens = np.array(self.density, dtype=float)
        N = grid_size(self.L, self.h)
        if dens.shape != (N,) * int(self.n):
            raise InvariantError(f"density has shape {dens.shape}, expected {(N,) * int(self.n)}")
        if not np.all(np.isfinite(dens)):
            raise InvariantError("density samples must be finite")
        if np.any(dens < 0):
            raise InvariantError("density samples must be nonnegative")
        dens.setflags(write=False)
        object.__setattr__(self, "density", dens)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def zeros(cls, n: int, h: float, L: float) -> "GridMeasure":
        N = grid_size(L, h)
        return cls(np.zeros((N,) * n), h, n, L)

    @property
    def N(self) -> int:
        return self.density.shape[0]

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape (n, N, ..., N)."""
        ax = self.axis()
        return np.stack(np.meshgrid(*([ax] * self.n), indexing="ij"))

    def distance_from(self, center: Optional[Sequence[float]] = None) -> np.ndarray:
        coords = self.coordinates()
        if center is not None:
            c = np.asarray(center, dtype=float).reshape((self.n,) + (1,) * self.n)
            coords = coords - c
        return np.sqrt(np.sum(coords**2, axis=0))

    def ball_mask(self, radius: float, center: Optional[Sequence[float]] = None) -> np.ndarray:
        return self.distance_from(center) <= radius * (1.0 + BALL_EPS)

    def total_mass(self) -> float:
        return float(self.density.sum() * self.cell_volume)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.density > 0)

    def ball_mass(self, radius: float, center: Optional[Sequence[float]] = None) -> float:
        c = np.zeros(self.n) if center is None else np.asarray(center, dtype=float)
        if np.max(np.abs(c)) + radius > self.L * (1.0 + BALL_EPS):
            raise DomainError(f"ball of radius {radius} exceeds the grid box [-{self.L}, {self.L}]^{self.n}")
        return float(self.density[self.ball_mask(radius, c)].sum() * self.cell_volume)

    def with_density(self, density: np.ndarray) -> "GridMeasure":
        return GridMeasure(density, self.h, self.n, self.L)

    def scaled(self, lam: float) -> "GridMeasure":
        return self.with_density(lam * self.density)

    def restricted(self, mask: np.ndarray) -> "GridMeasure":
        return self.with_density(np.where(mask, self.density, 0.0))

    def same_grid(self, other) -> bool:
        return self.n == other.n and self.N == other.N and abs(self.h - other.h) <= 1e-12 * self.h

    def refined(self) -> "GridMeasure":
        """The same measure on the grid of spacing h/2 over the same box.

        New nodes take the density of the neighbouring old node farther from
        the origin, so the support stays inside any centered ball or box that
        held it; the total mass is preserved.
        """
        N = self.N
        j = np.arange(2 * N - 1)
        src = np.where(j <= N - 1, j // 2, (j + 1) // 2)
        dens = self.density[np.ix_(*([src] * self.n))]
        fine = GridMeasure(dens, self.h / 2.0, self.n, self.L)
        mass = fine.total_mass()
        return fine.scaled(self.total_mass() / mass) if mass > 0 else fine
