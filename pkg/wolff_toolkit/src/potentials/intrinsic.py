"""Lower bounds for the embedding constant κ(B) and the intrinsic potential K_{p,q}σ.

κ(B) is the least constant in (∫_B (W₁,ₚμ)^q dσ)^{1/q} ≤ κ(B)·‖μ‖^{1/(p−1)}.
Any concrete test measure μ gives a lower bound; here the candidates are
Dirac masses (whose Wolff potential is explicit) and the normalized
restriction σ_B/σ(B).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from ..measures.grid import GridMeasure
from ..measures.measure_core import restrict_to_ball
from ..measures.radial import RadialMeasure
from ..utils.config_loader import get_settings
from ..utils.errors import DomainError
from ..utils.output import json_number
from ..utils.parallel import map_ordered
from ..utils.validators import validate_exponent, validate_positive, validate_sublinear
from .quadrature import dyadic_edges, gauss_legendre_on, integrate_down_to_zero, panel_integrals
from .wolff import (
    DIVERGENT,
    PotentialKernel,
    ball_volume,
    grid_potential_field,
    nearest_node,
    off_center_mass,
    sphere_area,
    wolff_radial_profile,
)

logger = logging.getLogger(__name__)

Ball = Tuple[Sequence[float], float]

DIRECTIONS = 256
RADIAL_PIECES = 16
SIGMA_PROFILE_POINTS = 24
LATTICE_STEPS = 8


@dataclass(frozen=True)
class KappaEstimate:
    ball: Tuple[Tuple[float, ...], float]
    lower_bound: float
    witness: str
    candidates: List[Tuple[str, float]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "center": list(self.ball[0]),
            "radius": self.ball[1],
            "lower_bound": self.lower_bound,
            "witness": self.witness,
            "candidates": [{"measure": name, "value": value} for name, value in self.candidates],
        }


def embedding_exponent(p: float, q: float) -> float:
    """θ = q(p−1)/(p−1−q), the power of κ inside K_{p,q}."""
    return q * (p - 1.0) / (p - 1.0 - q)


def sphere_directions(n: int, count: int = DIRECTIONS) -> np.ndarray:
    """Nearly uniform unit vectors: golden-angle spiral (n=3), equal angles (n=2)."""
    k = np.arange(count) + 0.5
    if n == 2:
        ang = 2.0 * math.pi * k / count
        return np.stack((np.cos(ang), np.sin(ang)), axis=1)
    if n == 3:
        z = 1.0 - 2.0 * k / count
        rad = np.sqrt(1.0 - z**2)
        ang = math.pi * (3.0 - math.sqrt(5.0)) * k
        return np.stack((rad * np.cos(ang), rad * np.sin(ang), z), axis=1)
    g = np.random.default_rng(0).normal(size=(2 * count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _radial_cloud(sigma: RadialMeasure, center: np.ndarray, R: float) -> Tuple[np.ndarray, np.ndarray]:
    """Quadrature points and σ-weights covering B(center, R)."""
    order = get_settings().quadrature.stieltjes_order
    rc = float(np.linalg.norm(center))
    lo, hi = max(0.0, rc - R), rc + R
    bps = sigma.breakpoints()
    cuts = np.unique(np.concatenate(([lo, hi], bps[(bps > lo) & (bps < hi)])))
    nodes, weights = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        for aa, bb in zip(np.linspace(a, b, RADIAL_PIECES + 1)[:-1], np.linspace(a, b, RADIAL_PIECES + 1)[1:]):
            x, w = gauss_legendre_on(aa, bb, order)
            nodes.append(x)
            weights.append(w)
    rho = np.concatenate(nodes)
    w_rho = np.concatenate(weights) * sigma.density(rho)
    dirs = sphere_directions(sigma.n)
    pts = (rho[:, None, None] * dirs[None, :, :]).reshape(-1, sigma.n)
    wts = np.repeat(w_rho / len(dirs), len(dirs))
    inside = np.linalg.norm(pts - center, axis=1) <= R
    return pts[inside], wts[inside]


def _radial_power_integral(sigma: RadialMeasure, R: float, s: float) -> float:
    """∫_{B(0,R)} |x|^{−s} dσ(x) = ∫_0^R ρ^{−s} dM(ρ)."""
    qs = get_settings().quadrature
    bps = sigma.breakpoints()
    bps = bps[bps < R]
    start = bps[0] if bps.size else R

    def f(rho):
        return rho ** (1.0 - s) * sigma.density(rho)

    middle = float(panel_integrals(f, dyadic_edges(start, R, bps), qs.order).sum()) if start < R else 0.0
    return middle + integrate_down_to_zero(f, start, middle, qs.rel_tol, qs.order, qs.max_panels)


def _radial_sigma_candidate(sigma_b: RadialMeasure, R: float, p: float, q: float) -> float:
    """∫_B (W₁,ₚ(σ_B/σ(B)))^q dσ for a ball centered at the origin."""
    qs = get_settings().quadrature
    total = sigma_b.total_mass()
    bps = sigma_b.breakpoints()
    mesh = np.unique(np.concatenate(([0.0], np.geomspace(R * 1e-3, R, SIGMA_PROFILE_POINTS), bps[bps < R])))
    profile = wolff_radial_profile(sigma_b, p, sigma_b.n, mesh)
    norm = total ** (1.0 / (p - 1.0))

    def f(rho):
        return (profile.evaluate(rho) / norm) ** q * rho * sigma_b.density(rho)

    start = R * 1e-3
    middle = float(panel_integrals(f, dyadic_edges(start, R, mesh[mesh > start]), qs.order).sum())
    return middle + integrate_down_to_zero(f, start, middle, qs.rel_tol, qs.order, qs.max_panels)


def _off_center_sigma_candidate(
    sigma: RadialMeasure, center: np.ndarray, R: float, p: float, q: float
) -> Optional[float]:
    """∫_B (W₁,ₚ(σ_B/σ(B)))^q dσ for a ball away from the origin.

    σ_B is read as a density on a lattice over B (local coordinates), its mass
    renormalized to the shell-cap value of σ(B); the potential is the grid one.
    """
    n = sigma.n
    local = GridMeasure.zeros(n, R / LATTICE_STEPS, R)
    shifted = local.coordinates() + center.reshape((n,) + (1,) * n)
    rho = np.maximum(np.sqrt(np.sum(shifted**2, axis=0)), 1e-9 * R)
    dens = np.where(local.ball_mask(R), sigma.density(rho) / (sphere_area(n) * rho ** (n - 1)), 0.0)
    lattice_mass = float(dens.sum() * local.cell_volume)
    total = float(off_center_mass(sigma, float(np.linalg.norm(center)), np.array([R]))[0])
    if lattice_mass <= 0.0 or total <= 0.0:
        return None
    sigma_b = local.with_density(dens * (total / lattice_mass))
    mask = sigma_b.density > 0
    w = grid_potential_field(sigma_b, PotentialKernel.wolff(p, n))
    w_mu = w[mask] / total ** (1.0 / (p - 1.0))
    return float(np.sum(w_mu**q * sigma_b.density[mask] * local.cell_volume))


def _grid_candidates(
    sigma: GridMeasure, center: np.ndarray, R: float, p: float, q: float, samples: np.ndarray
) -> List[Tuple[str, float]]:
    n = sigma.n
    s = q * (n - p) / (p - 1.0)
    const = ((p - 1.0) / (n - p)) ** q
    mask = sigma.ball_mask(R, center) & (sigma.density > 0)
    coords = sigma.coordinates()[:, mask].T
    dens = sigma.density[mask]
    t_star = (sigma.cell_volume / ball_volume(n)) ** (1.0 / n)
    out = []
    for y in samples:
        node = nearest_node(sigma, y)
        yv = -sigma.L + sigma.h * np.asarray(node, dtype=float)
        d = np.linalg.norm(coords - yv, axis=1)
        own = d < 0.5 * sigma.h
        far = np.sum(dens[~own] * sigma.cell_volume * d[~own] ** (-s))
        near = np.sum(dens[own]) * n * ball_volume(n) * t_star ** (n - s) / (n - s)
        out.append((f"dirac at {tuple(float(v) for v in yv)}", (const * (far + near)) ** (1.0 / q)))
    sigma_b = sigma.restricted(mask)
    total = sigma_b.total_mass()
    w = grid_potential_field(sigma_b, PotentialKernel.wolff(p, n))
    w_mu = w[mask] / total ** (1.0 / (p - 1.0))
    out.append(("sigma_B itself", float(np.sum(w_mu**q * dens * sigma.cell_volume)) ** (1.0 / q)))
    return out


def kappa_lower_bound(
    sigma: Union[RadialMeasure, GridMeasure],
    ball: Ball,
    p: float,
    q: float,
    samples: Sequence[Sequence[float]],
) -> KappaEstimate:
    """Largest ratio (∫_B (W₁,ₚμ)^q dσ)^{1/q}/‖μ‖^{1/(p−1)} over the candidate measures.

    Dirac candidates use W₁,ₚδ_y(x) = ((p−1)/(n−p))|x−y|^{(p−n)/(p−1)}.
    The result bounds κ(B) from below; it is not κ(B).
    """
    n = sigma.n
    validate_exponent(p, n)
    validate_sublinear(q, p)
    center = np.broadcast_to(np.asarray(ball[0], dtype=float), (n,)).copy()
    R = float(ball[1])
    validate_positive("ball radius", R)
    if len(samples) == 0:
        raise DomainError("kappa_lower_bound needs at least one sample point")
    pts = np.array([np.broadcast_to(np.asarray(y, dtype=float), (n,)) for y in samples])
    key = (tuple(float(v) for v in center), R)

    if isinstance(sigma, GridMeasure):
        empty = sigma.ball_mass(R, center) == 0.0
    else:
        empty = float(np.linalg.norm(center)) == 0.0 and float(sigma.mass(R)) == 0.0
    if sigma.is_zero or empty:
        return KappaEstimate(key, 0.0, "zero measure on the ball", [])

    if isinstance(sigma, GridMeasure):
        candidates = _grid_candidates(sigma, center, R, p, q, pts)
    else:
        s = q * (n - p) / (p - 1.0)
        const = ((p - 1.0) / (n - p)) ** q
        concentric = float(np.linalg.norm(center)) == 0.0
        cloud = None
        candidates = []
        for y in pts:
            if concentric and not np.any(y):
                integral = _radial_power_integral(sigma, R, s)
            else:
                if cloud is None:
                    cloud = _radial_cloud(sigma, center, R)
                xs, ws = cloud
                d = np.maximum(np.linalg.norm(xs - y, axis=1), 1e-300)
                integral = float(np.sum(ws * d ** (-s)))
            candidates.append((f"dirac at {tuple(float(v) for v in y)}", (const * integral) ** (1.0 / q)))
        if concentric:
            integral = _radial_sigma_candidate(restrict_to_ball(sigma, R), R, p, q)
        else:
            integral = _off_center_sigma_candidate(sigma, center, R, p, q)
        if integral is not None:
            candidates.append(("sigma_B itself", integral ** (1.0 / q)))

    best_name, best = max(candidates, key=lambda c: c[1])
    logger.debug("kappa lower bound on B(%s, %g): %.6g (%s)", key[0], R, best, best_name)
    return KappaEstimate(key, float(best), best_name, candidates)


@dataclass(frozen=True)
class IntrinsicEstimate:
    """Lower-bound estimate of K_{p,q}σ(x) on a t-mesh plus its tail verdict."""

    x: Tuple[float, ...]
    value: float
    mesh_value: float
    tail_value: float
    tail_exponent: float
    verdict: str
    t_mesh: Tuple[float, ...]
    kappas: Tuple[float, ...]
    label: str = "lower-bound estimate"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x": list(self.x),
            "value": json_number(self.value),
            "mesh_value": self.mesh_value,
            "tail_value": json_number(self.tail_value),
            "tail_exponent": self.tail_exponent,
            "verdict": self.verdict,
            "label": self.label,
        }


def axis_samples(x: np.ndarray, t: float) -> List[np.ndarray]:
    """Ball center plus the 2n points at half-radius along the axes."""
    out = [x.copy()]
    for i in range(len(x)):
        for sign in (1.0, -1.0):
            y = x.copy()
            y[i] += sign * 0.5 * t
            out.append(y)
    return out


def tail_slope(t: np.ndarray, values: np.ndarray, points: int) -> float:
    """Slope of ln(values) against ln(t) over the outermost positive points."""
    keep = values > 0
    tt, vv = t[keep][-points:], values[keep][-points:]
    if tt.size < 2:
        return 0.0
    return float(np.polyfit(np.log(tt), np.log(vv), 1)[0])


def intrinsic_potential(
    sigma: Union[RadialMeasure, GridMeasure],
    p: float,
    q: float,
    n: int,
    x,
    t_mesh: Sequence[float],
    threads: int = 1,
) -> IntrinsicEstimate:
    """K_{p,q}σ(x) = ∫₀^∞ (κ(B(x,t))^θ / t^{n−p})^{1/(p−1)} dt/t with κ replaced by lower bounds.

    Trapezoid rule in ln t on ``t_mesh``. Beyond the mesh, κ(B(x,t)) is taken
    to grow like t^slope (slope of the last mesh points), so the integrand
    behaves like t^{e_K} with e_K = (θ·slope − (n−p))/(p−1).
    """
    validate_exponent(p, n)
    validate_sublinear(q, p)
    t = np.asarray(t_mesh, dtype=float)
    if t.ndim != 1 or t.size < 2 or t[0] <= 0 or np.any(np.diff(t) <= 0):
        raise DomainError("t_mesh must be a strictly increasing list of at least two positive radii")
    arr = np.asarray(x, dtype=float)
    xv = np.zeros(n) if arr.ndim == 0 else np.broadcast_to(arr, (n,)).astype(float)
    if arr.ndim == 0:
        xv[0] = float(arr)
    theta = embedding_exponent(p, q)
    vs = get_settings().verify

    estimates = map_ordered(
        lambda tv: kappa_lower_bound(sigma, (xv, float(tv)), p, q, axis_samples(xv, float(tv))), t, threads
    )
    kappas = np.array([e.lower_bound for e in estimates])
    integrand = (kappas**theta * t ** (-(n - p))) ** (1.0 / (p - 1.0))
    mesh_value = float(trapezoid(integrand, np.log(t)))

    if not np.any(kappas > 0):
        slope, e_k, verdict, tail = 0.0, -(n - p) / (p - 1.0), "finite", 0.0
    else:
        slope = tail_slope(t, kappas, vs.tail_points)
        e_k = (theta * slope - (n - p)) / (p - 1.0)
        if e_k < -vs.tail_slope_tol:
            verdict, tail = "finite", float(integrand[-1] / (-e_k))
        elif e_k > vs.tail_slope_tol:
            verdict, tail = "infinite", DIVERGENT
        else:
            verdict, tail = "inconclusive", 0.0
    value = DIVERGENT if tail == DIVERGENT else mesh_value + tail
    logger.info("Intrinsic potential at %s: %s (tail exponent %.4g, %s)", tuple(xv), value, e_k, verdict)
    return IntrinsicEstimate(
        x=tuple(float(v) for v in xv),
        value=value,
        mesh_value=mesh_value,
        tail_value=tail,
        tail_exponent=e_k,
        verdict=verdict,
        t_mesh=tuple(float(v) for v in t),
        kappas=tuple(float(v) for v in kappas),
    )
