from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from ..utils.errors import InvariantError
from ..utils.validators import validate_exponent


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Model operator A(x, ξ) = w(x)|ξ|^{p−2}ξ with α ≤ w ≤ β.

    ``weight=None`` is the constant weight 1 (the p-Laplacian); otherwise the
    weight is sampled on the grid nodes.
    """

    p: float
    n: int
    weight: Optional[np.ndarray] = None
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self) -> None:
        validate_exponent(float(self.p), int(self.n))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "n", int(self.n))
        if not (0.0 < self.alpha <= self.beta):
            raise InvariantError("structural constants need 0 < alpha <= beta")
        if self.weight is None:
            if not (self.alpha <= 1.0 <= self.beta):
                raise InvariantError("constant weight 1 must lie in [alpha, beta]")
            return
        w = np.array(self.weight, dtype=float)
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvariantError("weight samples must be positive and finite")
        if w.min() < self.alpha * (1 - 1e-12) or w.max() > self.beta * (1 + 1e-12):
            raise InvariantError(
                f"weight range [{w.min()}, {w.max()}] outside [alpha, beta] = [{self.alpha}, {self.beta}]"
            )
        w.setflags(write=False)
        object.__setattr__(self, "weight", w)

    @property
    def is_unit_weight(self) -> bool:
        return self.weight is None or bool(np.all(self.weight == 1.0))

    def weight_at(self, x_index=None) -> np.ndarray:
        if self.weight is None:
            return np.asarray(1.0)
        if x_index is None:
            return self.weight
        return np.asarray(self.weight[x_index])

    def flux(self, xi, x_index=None) -> np.ndarray:
        """A(x, ξ) for vectors ξ stacked along the last axis."""
        xi = np.asarray(xi, dtype=float)
        norm = np.linalg.norm(xi, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(norm > 0, norm ** (self.p - 2.0), 0.0)
        w = self.weight_at(x_index)
        if w.ndim:
            w = w[..., None]
        return w * factor * xi

    def check_structure(self, samples: int = 64, seed: int = 0) -> Dict[str, bool]:
        """Check growth, coercivity, monotonicity and homogeneity on random ξ."""
        rng = np.random.default_rng(seed)
        xi = rng.normal(size=(samples, self.n)) * np.exp(rng.uniform(-3, 3, size=(samples, 1)))
        eta = rng.normal(size=(samples, self.n))
        lam = rng.uniform(-4, 4, size=(samples, 1))
        if self.weight is None:
            idx = None
        else:
            flat = rng.integers(0, self.weight.size, size=samples)
            idx = np.unravel_index(flat, self.weight.shape)

        a_xi = self.flux(xi, idx)
        a_eta = self.flux(eta, idx)
        norm = np.linalg.norm(xi, axis=-1)
        tol = 1e-10
        growth = np.linalg.norm(a_xi, axis=-1) <= self.beta * norm ** (self.p - 1) * (1 + tol)
        coercive = np.sum(a_xi * xi, axis=-1) >= self.alpha * norm**self.p * (1 - tol)
        monotone = np.sum((a_xi - a_eta) * (xi - eta), axis=-1) > 0
        scaled = self.flux(lam * xi, idx)
        expected = lam * np.abs(lam) ** (self.p - 2) * a_xi
        homogeneous = np.allclose(scaled, expected, rtol=1e-10, atol=0.0)
        return {
            "growth": bool(growth.all()),
            "coercivity": bool(coercive.all()),
            "monotonicity": bool(monotone.all()),
            "homogeneity": bool(homogeneous),
        }
