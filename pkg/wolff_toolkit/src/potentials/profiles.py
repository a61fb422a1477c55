from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import pandas as pd

from ..utils.errors import InvariantError


def log_mesh(r_min: float, r_max: float, points: int, include_origin: bool = True) -> np.ndarray:
    """Log-spaced radii r_min..r_max, optionally preceded by r = 0."""
    if not (0 < r_min < r_max) or points < 2:
        raise InvariantError("log mesh needs 0 < r_min < r_max and at least 2 points")
    mesh = np.geomspace(r_min, r_max, points)
    return np.concatenate(([0.0], mesh)) if include_origin else mesh


def merge_mesh(mesh: np.ndarray, extra) -> np.ndarray:
    """Mesh with extra radii inserted (duplicates removed)."""
    return np.unique(np.concatenate((np.asarray(mesh, dtype=float), np.asarray(extra, dtype=float))))


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """A nonnegative radial function sampled on a mesh.

    Beyond the last radius the profile continues as
    ``values[-1] * (r / radii[-1]) ** tail_exponent``; when ``outer_radius`` is
    set (Dirichlet problems on a ball) it vanishes beyond that radius instead.
    """

    radii: np.ndarray
    values: np.ndarray
    tail_exponent: float
    n: int
    label: str
    outer_radius: Optional[float] = None
    approximate: bool = False

    def __post_init__(self) -> None:
        radii = np.array(self.radii, dtype=float)
        values = np.array(self.values, dtype=float)
        if radii.ndim != 1 or radii.shape != values.shape or radii.size == 0:
            raise InvariantError("profile radii and values must be 1-d arrays of equal length")
        if radii[0] < 0 or np.any(np.diff(radii) <= 0):
            raise InvariantError("profile mesh must be nonnegative and strictly increasing")
        if np.any(np.isnan(values)) or np.any(values < 0):
            raise InvariantError(f"profile '{self.label}' has negative or undefined values")
        radii.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)

    def sup(self) -> float:
        return float(self.values.max())

    def evaluate(self, r) -> np.ndarray:
        """Piecewise-linear inside the mesh, analytic tail outside."""
        r = np.asarray(r, dtype=float)
        flat = np.atleast_1d(r)
        out = np.interp(flat, self.radii, self.values)
        beyond = flat > self.radii[-1]
        if beyond.any():
            if self.outer_radius is not None:
                out[beyond] = 0.0
            else:
                out[beyond] = self.values[-1] * (flat[beyond] / self.radii[-1]) ** self.tail_exponent
        return out.reshape(r.shape)

    def scaled(self, lam: float) -> "RadialProfile":
        return replace(self, values=lam * self.values)

    def relabeled(self, label: str) -> "RadialProfile":
        return replace(self, label=label)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"r": self.radii, "value": self.values, "label": self.label})


def sup_relative_difference(u: np.ndarray, v: np.ndarray) -> float:
    """max|u − v| / max(|u|, |v|); 0 for two zero arrays."""
    scale = max(float(np.max(np.abs(u))), float(np.max(np.abs(v))))
    if scale == 0.0 or not math.isfinite(scale):
        return 0.0 if scale == 0.0 else math.inf
    return float(np.max(np.abs(u - v)) / scale)
