"""Wolff and Riesz potentials of radial and grid measures.

Both potentials are integrals ∫₀^∞ (σ(B(x,t))/t^d)^γ dt/t:

* Wolff W₁,ₚσ: d = n − p, γ = 1/(p − 1);
* Riesz I₁σ:   d = n − 1, γ = 1.

For radial measures the integral is split into a numeric part (log-substituted
Gauss–Legendre panels, extended towards t = 0 until the panels stop
contributing) and the analytic power-log tail. Grid measures are compactly
supported and their ball masses are step functions of t, integrated exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import gamma as gamma_fn

from ..measures.grid import GridMeasure
from ..measures.radial import EXPONENT_EQ_TOL, RadialMeasure
from ..utils.config_loader import get_settings
from ..utils.errors import DomainError, QuadratureError
from ..utils.output import json_number
from ..utils.parallel import map_ordered
from ..utils.validators import validate_exponent
from .profiles import RadialProfile
from .quadrature import (
    dyadic_edges,
    gauss_legendre,
    integrate_down_to_zero,
    integrate_up_to_infinity,
    panel_integrals,
)

logger = logging.getLogger(__name__)

DIVERGENT = math.inf
"""Marker returned for divergent potentials; never produced by overflow."""

# φ-panels for the spherical-cap mass integral
CAP_PANELS = 8

Point = Union[float, Sequence[float], np.ndarray]


def sphere_area(n: int) -> float:
    """Surface area s_{n−1} = 2π^{n/2}/Γ(n/2) of the unit sphere in ℝⁿ."""
    return float(2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0))


def ball_volume(n: int) -> float:
    return float(math.pi ** (n / 2.0) / gamma_fn(n / 2.0 + 1.0))


@dataclass(frozen=True)
class PotentialKernel:
    d: float
    gamma: float

    @classmethod
    def wolff(cls, p: float, n: int) -> "PotentialKernel":
        return cls(d=n - p, gamma=1.0 / (p - 1.0))

    @classmethod
    def riesz(cls, n: int) -> "PotentialKernel":
        return cls(d=n - 1.0, gamma=1.0)

    def integrand(self, mass: np.ndarray, t: np.ndarray) -> np.ndarray:
        return (mass * t ** (-self.d)) ** self.gamma

    def tail_exponent(self, b: float) -> float:
        """Decay exponent of the potential far out for masses growing like ρ^b."""
        return (b - self.d) * self.gamma


def power_log_tail(kernel: PotentialKernel, tail: Tuple[float, float, float], T: float) -> float:
    """∫_T^∞ (a t^b (ln t)^{−c} / t^d)^γ dt/t, or DIVERGENT.

    With e = (b − d)γ and g = cγ the integrand is a^γ t^e (ln t)^{−g}/t:
    e > 0 diverges; e = 0 converges iff g > 1; e < 0 always converges.
    """
    a, b, c = tail
    if a == 0.0:
        return 0.0
    e = kernel.tail_exponent(b)
    g = c * kernel.gamma
    scale = max(1.0, abs(kernel.d) * kernel.gamma)
    coef = a**kernel.gamma
    if e > EXPONENT_EQ_TOL * scale:
        return DIVERGENT
    if abs(e) <= EXPONENT_EQ_TOL * scale:
        if g <= 1.0 + EXPONENT_EQ_TOL:
            return DIVERGENT
        return coef * math.log(T) ** (1.0 - g) / (g - 1.0)
    if c == 0.0:
        return coef * T**e / (-e)
    qs = get_settings().quadrature
    return integrate_up_to_infinity(
        lambda t: coef * t**e * np.log(t) ** (-g), T, qs.rel_tol, qs.order, qs.max_panels
    )


# --- ball masses ------------------------------------------------------------


def _cap_phi_nodes(bps: np.ndarray, mid: np.ndarray, half: np.ndarray, order: int):
    """GL nodes in φ ∈ [0, π], split uniformly and at the φ-images of mass breakpoints."""
    x, w = gauss_legendre(order)
    uniform = np.broadcast_to(np.linspace(0.0, math.pi, CAP_PANELS + 1), (mid.size, CAP_PANELS + 1))
    kinks = np.arccos(np.clip((bps[None, :] - mid[:, None]) / half[:, None], -1.0, 1.0))
    edges = np.sort(np.concatenate((uniform, kinks), axis=1), axis=1)
    a, b = edges[:, :-1], edges[:, 1:]
    h = 0.5 * (b - a)
    phi = (0.5 * (a + b))[..., None] + h[..., None] * x
    weights = h[..., None] * w
    return phi, weights


def off_center_mass(m: RadialMeasure, r: float, t) -> np.ndarray:
    """σ(B(x, t)) for |x| = r, vectorized over t.

    In n ∈ {2, 3} the shell of radius ρ meets B(x, t) in a spherical cap whose
    relative size ``frac(ρ)`` is explicit; integrating by parts,
    σ(B(x,t)) = −∫_{|t−r|}^{t+r} M(ρ) frac'(ρ) dρ. The substitution
    ρ = mid + half·cos φ removes the endpoint singularities of frac'.
    Other dimensions use the midpoint of the bounds M((t−r)⁺) ≤ · ≤ M(t+r).
    """
    t = np.asarray(t, dtype=float)
    if r == 0.0:
        return m.mass(t)
    lower = m.mass(np.maximum(t - r, 0.0))
    upper = m.mass(t + r)
    if m.n not in (2, 3):
        return 0.5 * (lower + upper)

    shape = t.shape
    tf = t.ravel()
    lo = np.abs(tf - r)
    hi = tf + r
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    phi, weights = _cap_phi_nodes(m.breakpoints(), mid, half, get_settings().quadrature.stieltjes_order)
    rho = mid[:, None, None] + half[:, None, None] * np.cos(phi)
    jac = half[:, None, None] * np.sin(phi)
    tt = tf[:, None, None]
    dc = (rho**2 - r**2 + tt**2) / (2.0 * r * rho**2)
    if m.n == 3:
        dfrac = -0.5 * dc
    else:
        c = np.clip((rho**2 + r**2 - tt**2) / (2.0 * rho * r), -1.0, 1.0)
        dfrac = -dc / (math.pi * np.sqrt(np.maximum(1.0 - c**2, 1e-300)))
    inner = np.sum(m.mass(rho) * dfrac * jac * weights, axis=(1, 2)).reshape(shape)
    return np.clip(-inner, lower, upper)


# --- radial potentials -------------------------------------------------------


def _radial_integral(m: RadialMeasure, kernel: PotentialKernel, r: float) -> float:
    if m.is_zero:
        return 0.0
    qs = get_settings().quadrature
    tail = m.effective_tail()
    t0 = m.tail_start()
    if power_log_tail(kernel, tail, t0) == DIVERGENT:
        return DIVERGENT

    if r == 0.0:
        t_far = t0
        bps = m.breakpoints()
    else:
        constant = tail[1] == 0.0 and tail[2] == 0.0
        t_far = t0 + r if constant else max(2.0 * (t0 + r), r * qs.far_ratio)
        knots = m.breakpoints()
        bps = np.concatenate((np.abs(knots - r), knots + r, [r, t_far]))
        bps = np.unique(bps[(bps > 0) & (bps <= t_far)])

    def f(t: np.ndarray) -> np.ndarray:
        return kernel.integrand(off_center_mass(m, r, t), t)

    edges = dyadic_edges(bps[0], t_far, bps)
    if len(edges) - 1 > qs.max_panels:
        raise QuadratureError(f"{len(edges) - 1} panels exceed max_panels={qs.max_panels}")
    middle = float(panel_integrals(f, edges, qs.order).sum()) if len(edges) > 1 else 0.0
    far = power_log_tail(kernel, tail, t_far)
    low = integrate_down_to_zero(f, bps[0], middle + far, qs.rel_tol, qs.order, qs.max_panels)
    total = low + middle + far
    if not math.isfinite(total):
        raise QuadratureError(f"potential overflowed at r={r}")
    return total


# --- grid potentials ----------------------------------------------------------


def nearest_node(m: GridMeasure, x: Point) -> Tuple[int, ...]:
    x = np.broadcast_to(np.asarray(x, dtype=float), (m.n,))
    if np.any(np.abs(x) > m.L * (1.0 + 1e-12)):
        raise DomainError(f"point {tuple(x)} lies outside the grid box")
    idx = np.clip(np.rint((x + m.L) / m.h).astype(int), 0, m.N - 1)
    return tuple(int(i) for i in idx)


def _grid_sources(m: GridMeasure) -> Tuple[np.ndarray, np.ndarray]:
    mask = m.density > 0
    coords = m.coordinates()[:, mask].T
    return coords, m.density[mask] * m.cell_volume


def _grid_integral(
    m: GridMeasure,
    kernel: PotentialKernel,
    node: Tuple[int, ...],
    sources: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> float:
    """Closed-form integral for a node of the grid.

    Below t* (radius of the ball of volume hⁿ) the mass is ρ(x)·|B_t|; above it
    it is the cumulative mass of the nodes within distance t.
    """
    coords, masses = sources if sources is not None else _grid_sources(m)
    if masses.size == 0:
        return 0.0
    x = -m.L + m.h * np.asarray(node, dtype=float)
    dist = np.sqrt(np.sum((coords - x) ** 2, axis=1))
    order = np.argsort(dist, kind="stable")
    dist, cum = dist[order], np.cumsum(masses[order])

    omega = ball_volume(m.n)
    t_star = (m.cell_volume / omega) ** (1.0 / m.n)
    dg = kernel.d * kernel.gamma
    head_exp = (m.n - kernel.d) * kernel.gamma
    rho_x = float(m.density[node])
    head = (rho_x * omega) ** kernel.gamma * t_star**head_exp / head_exp if rho_x > 0 else 0.0

    a = np.maximum(dist, t_star)
    b = np.append(a[1:], np.inf)
    with np.errstate(divide="ignore"):
        pieces = cum**kernel.gamma * (a ** (-dg) - b ** (-dg)) / dg
    return float(head + pieces.sum())


def grid_potential_field(
    m: GridMeasure, kernel: PotentialKernel, mask: Optional[np.ndarray] = None, threads: int = 1
) -> np.ndarray:
    """Potential at every node selected by ``mask`` (default: nodes with σ > 0); 0 elsewhere."""
    mask = (m.density > 0) if mask is None else mask
    out = np.zeros(m.density.shape)
    nodes = [tuple(int(i) for i in idx) for idx in np.argwhere(mask)]
    sources = _grid_sources(m)
    values = map_ordered(lambda nd: _grid_integral(m, kernel, nd, sources), nodes, threads)
    for nd, v in zip(nodes, values):
        out[nd] = v
    return out


# --- public operations --------------------------------------------------------


def _radius(x: Point) -> float:
    arr = np.asarray(x, dtype=float)
    return float(abs(arr)) if arr.ndim == 0 else float(np.linalg.norm(arr))


def _check_dimension(m, n: int) -> None:
    if m.n != n:
        raise DomainError(f"measure lives in dimension {m.n}, operation asked for n={n}")


def wolff_potential(m: Union[RadialMeasure, GridMeasure], p: float, n: int, x: Point) -> float:
    """W₁,ₚσ(x); ``x`` is a point of ℝⁿ (or, for radial measures, a radius)."""
    validate_exponent(p, n)
    _check_dimension(m, n)
    kernel = PotentialKernel.wolff(p, n)
    if isinstance(m, GridMeasure):
        return _grid_integral(m, kernel, nearest_node(m, x))
    return _radial_integral(m, kernel, _radius(x))


def riesz_I1(m: Union[RadialMeasure, GridMeasure], n: int, x: Point) -> float:
    """I₁σ(x) = ∫₀^∞ σ(B(x,t))/t^{n−1} dt/t."""
    if n < 2:
        raise DomainError("dimension n must be >= 2")
    _check_dimension(m, n)
    kernel = PotentialKernel.riesz(n)
    if isinstance(m, GridMeasure):
        return _grid_integral(m, kernel, nearest_node(m, x))
    return _radial_integral(m, kernel, _radius(x))


def wolff_radial_profile(
    m: RadialMeasure, p: float, n: int, mesh: Sequence[float], threads: int = 1
) -> RadialProfile:
    validate_exponent(p, n)
    _check_dimension(m, n)
    kernel = PotentialKernel.wolff(p, n)
    radii = np.asarray(mesh, dtype=float)
    values = map_ordered(lambda r: _radial_integral(m, kernel, float(r)), radii, threads)
    a, b, c = m.effective_tail()
    exponent = kernel.tail_exponent(b) if a > 0 else kernel.tail_exponent(0.0)
    logger.info("Wolff profile: n=%d p=%g on %d radii, W(r_1)=%.6g", n, p, len(radii), values[0])
    return RadialProfile(
        radii=radii,
        values=np.asarray(values, dtype=float),
        tail_exponent=min(exponent, 0.0),
        n=n,
        label="wolff",
        approximate=n not in (2, 3),
    )


@dataclass(frozen=True)
class FinitenessReport:
    verdict: str
    tail_integral_value: float
    breakdown: Dict[str, Any] = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        return self.verdict == "finite"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict,
            "tail_integral": json_number(self.tail_integral_value),
            "breakdown": {k: json_number(v) if isinstance(v, float) else v for k, v in self.breakdown.items()},
        }


def check_finiteness(m: RadialMeasure, p: float, n: int) -> FinitenessReport:
    """Decide ∫₁^∞ (σ(B(0,ρ))/ρ^{n−p})^{1/(p−1)} dρ/ρ < ∞."""
    validate_exponent(p, n)
    _check_dimension(m, n)
    kernel = PotentialKernel.wolff(p, n)
    qs = get_settings().quadrature
    tail = m.effective_tail()
    t0 = max(1.0, m.tail_start())

    numeric = 0.0
    if t0 > 1.0 and not m.is_zero:
        bps = m.breakpoints()
        edges = dyadic_edges(1.0, t0, bps[bps > 1.0])
        numeric = float(panel_integrals(lambda t: kernel.integrand(m.mass(t), t), edges, qs.order).sum())
    analytic = 0.0 if m.is_zero else power_log_tail(kernel, tail, t0)
    total = DIVERGENT if analytic == DIVERGENT else numeric + analytic
    verdict = "finite" if total < DIVERGENT else "infinite"
    report = FinitenessReport(
        verdict=verdict,
        tail_integral_value=total,
        breakdown={
            "numeric_1_to_r_last": numeric,
            "analytic_tail": analytic,
            "tail_start": t0,
            "tail_exponent": kernel.tail_exponent(tail[1]),
            "log_exponent": tail[2] * kernel.gamma,
        },
    )
    logger.info("Finiteness check n=%d p=%g tail=%s: %s", n, p, tail, verdict)
    return report
