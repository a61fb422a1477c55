"""Radial measures given by a cumulative mass function.

``RadialMeasure`` stores σ(B(0, r)) at a list of knots plus an analytic tail
``a·ρ^b·(ln ρ)^(-c)`` beyond the last knot. Between knots the cumulative mass
is a power law in r (log-log linear), which is exact for power-law data and
stays monotone; from a zero-mass knot it grows linearly in r. Below the first
knot it scales like rⁿ, i.e. the measure has bounded density at the origin.

An optional ``support`` (a tuple of bounded shells ``(lo, hi)``) restricts the
measure exactly: σ_S(B(0, ρ)) = Σ [M(min(ρ, hi)) − M(min(ρ, lo))].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple

import numpy as np

from ..utils.config_loader import get_settings
from ..utils.errors import DomainError, InvariantError

Shell = Tuple[float, float]

# exponents closer than this are treated as equal (b = n − p, c = p − 1 boundaries)
EXPONENT_EQ_TOL = 1e-12


def normalize_shells(shells: Iterable[Shell]) -> Tuple[Shell, ...]:
    """Sort shells, drop empty ones and merge the overlapping/touching ones."""
    cleaned = sorted((max(float(lo), 0.0), float(hi)) for lo, hi in shells if float(hi) > max(float(lo), 0.0))
    merged: list = []
    for lo, hi in cleaned:
        if not math.isfinite(hi):
            raise InvariantError("support shells must be bounded")
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return tuple(merged)


def intersect_shells(a: Optional[Tuple[Shell, ...]], b: Tuple[Shell, ...]) -> Tuple[Shell, ...]:
    """Intersection of two shell unions; ``None`` stands for the whole space."""
    if a is None:
        return normalize_shells(b)
    out = []
    for lo1, hi1 in a:
        for lo2, hi2 in b:
            lo, hi = max(lo1, lo2), min(hi1, hi2)
            if hi > lo:
                out.append((lo, hi))
    return normalize_shells(out)


@dataclass(frozen=True)
class RadialMeasure:
    knots: Tuple[Tuple[float, float], ...]
    tail: Tuple[float, float, float]
    n: int
    support: Optional[Tuple[Shell, ...]] = None
    _r: np.ndarray = field(init=False, repr=False, compare=False)
    _m: np.ndarray = field(init=False, repr=False, compare=False)
    _k: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        knots = tuple((float(r), float(m)) for r, m in self.knots)
        a, b, c = (float(v) for v in self.tail)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "tail", (a, b, c))
        object.__setattr__(self, "n", int(self.n))
        if self.support is not None:
            object.__setattr__(self, "support", normalize_shells(self.support))
        self._validate()

        r = np.array([k[0] for k in knots])
        m = np.array([k[1] for k in knots])
        k = np.zeros(max(len(r) - 1, 0))
        pos = m[:-1] > 0
        if pos.any():
            k[pos] = np.log(m[1:][pos] / m[:-1][pos]) / np.log(r[1:][pos] / r[:-1][pos])
        object.__setattr__(self, "_r", r)
        object.__setattr__(self, "_m", m)
        object.__setattr__(self, "_k", k)

    def _validate(self) -> None:
        if self.n < 2:
            raise DomainError("dimension n must be >= 2")
        if not self.knots:
            raise InvariantError("radial measure needs at least one knot")
        radii = [r for r, _ in self.knots]
        masses = [m for _, m in self.knots]
        if any(not (math.isfinite(r) and r > 0) for r in radii):
            raise InvariantError("knot radii must be positive and finite")
        if any(r2 <= r1 for r1, r2 in zip(radii, radii[1:])):
            raise InvariantError("knot radii must be strictly increasing")
        if any(not math.isfinite(m) or m < 0 for m in masses):
            raise InvariantError("cumulative masses must be finite and >= 0")
        if any(m2 < m1 for m1, m2 in zip(masses, masses[1:])):
            raise InvariantError("cumulative mass must be nondecreasing in radius")

        a, b, c = self.tail
        if a < 0 or b < 0:
            raise InvariantError("tail requires a >= 0 and b >= 0")
        r_last, m_last = self.knots[-1]
        if c != 0.0 and r_last <= 1.0:
            raise InvariantError("a logarithmic tail (c != 0) needs the last knot beyond r = 1")
        if a > 0 and c > 0 and b * math.log(r_last) < c * (1.0 - EXPONENT_EQ_TOL):
            raise InvariantError("tail a*r^b*(ln r)^(-c) must be nondecreasing beyond the last knot")
        rtol = get_settings().measure.tail_match_rtol
        t = self._tail_scalar(r_last)
        if abs(t - m_last) > rtol * max(m_last, t, 1e-300):
            raise InvariantError(
                f"tail evaluated at r_last={r_last} gives {t!r}, knot mass is {m_last!r}"
            )

    def _tail_scalar(self, rho: float) -> float:
        a, b, c = self.tail
        if a == 0.0:
            return 0.0
        value = a * rho**b
        if c != 0.0:
            value *= math.log(rho) ** (-c)
        return value

    # --- constructors ---------------------------------------------------

    @classmethod
    def from_tail(cls, a: float, b: float, c: float, n: int, r_last: float) -> "RadialMeasure":
        """Measure whose mass is the tail law beyond ``r_last`` and ~rⁿ inside."""
        if c != 0.0 and r_last <= 1.0:
            raise InvariantError("a logarithmic tail (c != 0) needs r_last > 1")
        m_last = a * r_last**b * (math.log(r_last) ** (-c) if c != 0.0 else 1.0)
        return cls(knots=((r_last, m_last),), tail=(a, b, c), n=n)

    @classmethod
    def uniform_ball(cls, radius: float, total_mass: float, n: int) -> "RadialMeasure":
        """Uniform density on B(0, radius) carrying ``total_mass``."""
        if radius <= 0:
            raise DomainError("radius must be positive")
        return cls(knots=((radius, total_mass),), tail=(total_mass, 0.0, 0.0), n=n)

    @classmethod
    def zero(cls, n: int) -> "RadialMeasure":
        return cls(knots=((1.0, 0.0),), tail=(0.0, 0.0, 0.0), n=n)

    # --- unrestricted cumulative mass -------------------------------------

    @property
    def r_last(self) -> float:
        return self.knots[-1][0]

    def _tail_values(self, x: np.ndarray) -> np.ndarray:
        a, b, c = self.tail
        if a == 0.0:
            return np.zeros_like(x)
        out = a * x**b
        if c != 0.0:
            out = out * np.log(x) ** (-c)
        return out

    def base_mass(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        r, m = self._r, self._m
        out = np.zeros_like(rho)
        pos = rho > 0
        below = pos & (rho < r[0])
        out[below] = m[0] * (rho[below] / r[0]) ** self.n
        beyond = rho >= r[-1]
        out[beyond] = self._tail_values(rho[beyond])
        mid = pos & ~below & ~beyond
        if mid.any():
            x = rho[mid]
            i = np.searchsorted(r, x, side="right") - 1
            r0, r1, m0, m1, k = r[i], r[i + 1], m[i], m[i + 1], self._k[i]
            linear = m1 * (x - r0) / (r1 - r0)
            power = m0 * (x / r0) ** k
            out[mid] = np.where(m0 > 0, power, linear)
        return out

    def base_density(self, rho) -> np.ndarray:
        """d/dρ of the unrestricted cumulative mass (right derivative at knots)."""
        rho = np.asarray(rho, dtype=float)
        r, m = self._r, self._m
        out = np.zeros_like(rho)
        pos = rho > 0
        below = pos & (rho < r[0])
        out[below] = self.n * m[0] * rho[below] ** (self.n - 1) / r[0] ** self.n
        beyond = rho >= r[-1]
        if beyond.any():
            x = rho[beyond]
            _, b, c = self.tail
            slope = b - (c / np.log(x) if c != 0.0 else 0.0)
            out[beyond] = self._tail_values(x) * slope / x
        mid = pos & ~below & ~beyond
        if mid.any():
            x = rho[mid]
            i = np.searchsorted(r, x, side="right") - 1
            r0, r1, m0, m1, k = r[i], r[i + 1], m[i], m[i + 1], self._k[i]
            power = m0 * (x / r0) ** k * k / x
            out[mid] = np.where(m0 > 0, power, (m1 - m0) / (r1 - r0))
        return out

    # --- restricted view ----------------------------------------------------

    def mass(self, rho) -> np.ndarray:
        """σ(B(0, ρ)), vectorized over ``rho``."""
        if self.support is None:
            return self.base_mass(rho)
        rho = np.asarray(rho, dtype=float)
        out = np.zeros_like(rho)
        for lo, hi in self.support:
            out += self.base_mass(np.minimum(rho, hi)) - self.base_mass(np.minimum(rho, lo))
        return out

    def density(self, rho) -> np.ndarray:
        """d/dρ σ(B(0, ρ)); zero outside the support shells."""
        rho = np.asarray(rho, dtype=float)
        dens = self.base_density(rho)
        if self.support is None:
            return dens
        inside = np.zeros(rho.shape, dtype=bool)
        for lo, hi in self.support:
            inside |= (rho >= lo) & (rho < hi)
        return np.where(inside, dens, 0.0)

    def total_mass(self) -> float:
        if self.support is not None:
            return float(sum(self.base_mass(hi) - self.base_mass(lo) for lo, hi in self.support))
        a, b, c = self.tail
        if a == 0.0:
            return self.knots[-1][1]
        if b == 0.0 and c == 0.0:
            return a
        return math.inf

    def effective_tail(self) -> Tuple[float, float, float]:
        """Tail law valid from ``tail_start()`` on (constant once restricted)."""
        if self.support is not None:
            return (self.total_mass(), 0.0, 0.0)
        return self.tail

    def tail_start(self) -> float:
        if self.support:
            return self.support[-1][1]
        return self.r_last

    def breakpoints(self) -> np.ndarray:
        """Radii where the cumulative mass changes its analytic form."""
        start = self.tail_start()
        pts = [r for r, _ in self.knots if r <= start]
        if self.support:
            pts.extend(v for shell in self.support for v in shell if v > 0)
        pts.append(start)
        return np.unique(np.array([p for p in pts if p > 0], dtype=float))

    @property
    def is_zero(self) -> bool:
        if self.support is not None:
            return self.total_mass() == 0.0
        return self.knots[-1][1] == 0.0 and self.tail[0] == 0.0

    # --- transformations ------------------------------------------------

    def scaled(self, lam: float) -> "RadialMeasure":
        a, b, c = self.tail
        return RadialMeasure(
            knots=tuple((r, lam * m) for r, m in self.knots),
            tail=(lam * a, b, c),
            n=self.n,
            support=self.support,
        )

    def restricted(self, shells: Iterable[Shell]) -> "RadialMeasure":
        return RadialMeasure(
            knots=self.knots,
            tail=self.tail,
            n=self.n,
            support=intersect_shells(self.support, tuple(shells)),
        )
