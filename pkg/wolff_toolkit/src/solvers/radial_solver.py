"""Entire and ball solutions of −Δₚu = σ for radial σ.

Integrating the radial equation once gives |u'(r)|^{p−1} s_{n−1} r^{n−1} = σ(B(0,r)),
so the solution vanishing at infinity is

    u(r) = s_{n−1}^{−1/(p−1)} ∫_r^∞ (σ(B(0,t))/t^{n−p})^{1/(p−1)} dt/t,

the Wolff integrand with the lower limit moved from 0 to r. Values on a mesh
are accumulated from the top of the mesh downwards over shared panels.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..measures.measure_core import restrict_to_ball
from ..measures.radial import RadialMeasure
from ..potentials.profiles import RadialProfile, merge_mesh, sup_relative_difference
from ..potentials.quadrature import dyadic_edges, integrate_down_to_zero, panel_integrals
from ..potentials.wolff import (
    PotentialKernel,
    check_finiteness,
    power_log_tail,
    sphere_area,
    wolff_potential,
)
from ..utils.config_loader import get_settings
from ..utils.errors import FinitenessError, IdentityCheckError, InvariantError, QuadratureError
from ..utils.validators import validate_exponent, validate_positive
from .trace import IterationRecord, IterationTrace

logger = logging.getLogger("radial")


def _nearest_edges(edges: np.ndarray, radii: np.ndarray) -> np.ndarray:
    if len(edges) < 2:
        return np.zeros(radii.shape, dtype=int)
    idx = np.clip(np.searchsorted(edges, radii), 1, len(edges) - 1)
    left_closer = np.abs(edges[idx - 1] - radii) <= np.abs(edges[idx] - radii)
    return np.where(left_closer, idx - 1, idx)


def radial_solution_values(
    m: RadialMeasure, p: float, radii: np.ndarray, outer_radius: Optional[float] = None
) -> np.ndarray:
    """s^{−1/(p−1)}∫_r^{R} (M(t)/t^{n−p})^{1/(p−1)} dt/t at each radius (R = ∞ by default)."""
    kernel = PotentialKernel.wolff(p, m.n)
    qs = get_settings().quadrature
    radii = np.asarray(radii, dtype=float)
    out = np.zeros_like(radii)
    if m.is_zero:
        return out
    pos = radii[radii > 0]
    if outer_radius is not None:
        pos = pos[pos < outer_radius]
    bps = m.breakpoints()
    top = outer_radius if outer_radius is not None else max(m.tail_start(), pos[-1] if pos.size else 0.0)
    lo = pos[0] if pos.size else min(bps[0], top)

    def f(t: np.ndarray) -> np.ndarray:
        return kernel.integrand(m.mass(t), t)

    cuts = np.concatenate((bps, pos))
    edges = dyadic_edges(lo, top, cuts[(cuts > lo) & (cuts < top)]) if lo < top else np.array([top])
    if len(edges) - 1 > qs.max_panels:
        raise QuadratureError(f"{len(edges) - 1} panels exceed max_panels={qs.max_panels}")
    contrib = panel_integrals(f, edges, qs.order)
    tail = 0.0 if outer_radius is not None else power_log_tail(kernel, m.effective_tail(), top)
    suffix = np.concatenate((np.cumsum(contrib[::-1])[::-1], [0.0])) + tail
    if not np.all(np.isfinite(suffix)):
        raise QuadratureError("radial solution integral is not finite")

    coef = sphere_area(m.n) ** (-1.0 / (p - 1.0))
    inside = (radii > 0) & ((radii < outer_radius) if outer_radius is not None else True)
    out[inside] = suffix[_nearest_edges(edges, radii[inside])]
    if np.any(radii == 0.0):
        head = suffix[0] + integrate_down_to_zero(f, lo, suffix[0], qs.rel_tol, qs.order, qs.max_panels)
        out[radii == 0.0] = head
    return coef * out


def _prepare_mesh(mesh: Sequence[float]) -> np.ndarray:
    radii = np.asarray(mesh, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or radii[0] < 0 or np.any(np.diff(radii) <= 0):
        raise InvariantError("mesh must be a strictly increasing list of nonnegative radii")
    return radii


def solve_entire_radial(sigma: RadialMeasure, p: float, n: int, mesh: Sequence[float]) -> RadialProfile:
    """Entire solution of −Δₚu = σ with u → 0 at infinity, sampled on ``mesh``."""
    validate_exponent(p, n)
    radii = _prepare_mesh(mesh)
    report = check_finiteness(sigma, p, n)
    if not report.finite:
        raise FinitenessError("Wolff potential of sigma is infinite; no entire solution", report)
    values = radial_solution_values(sigma, p, radii)
    a, b, _ = sigma.effective_tail()
    exponent = PotentialKernel.wolff(p, n).tail_exponent(b if a > 0 else 0.0)
    logger.debug("Entire radial solution: sup=%.6g on %d radii", values.max(initial=0.0), radii.size)
    return RadialProfile(radii, values, min(exponent, 0.0), n, "u")


def solve_ball_radial(sigma: RadialMeasure, p: float, n: int, mesh: Sequence[float], R: float) -> RadialProfile:
    """Solution on B(0, R) with zero boundary values (the entire solution minus its value at R)."""
    validate_exponent(p, n)
    validate_positive("R", R)
    base = _prepare_mesh(mesh)
    radii = merge_mesh(base[base < R], [R])
    values = radial_solution_values(sigma, p, radii, outer_radius=R)
    return RadialProfile(radii, values, 0.0, n, "u_ball", outer_radius=R)


@dataclass(frozen=True)
class CenterIdentity:
    u0: float
    w0: float
    ratio: float
    expected: float
    vacuous: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "u0": self.u0,
            "w0": self.w0,
            "ratio": None if self.vacuous else self.ratio,
            "expected": self.expected,
            "passed": True,
            "vacuous": self.vacuous,
        }


def radial_center_identity_check(sigma: RadialMeasure, p: float, n: int) -> CenterIdentity:
    """u(0)/W₁,ₚσ(0) must equal s_{n−1}^{−1/(p−1)}: the two integrals share their integrand."""
    validate_exponent(p, n)
    expected = sphere_area(n) ** (-1.0 / (p - 1.0))
    u0 = float(solve_entire_radial(sigma, p, n, [0.0, sigma.breakpoints()[0]]).values[0])
    w0 = wolff_potential(sigma, p, n, 0.0)
    if w0 == 0.0 and u0 == 0.0:
        return CenterIdentity(0.0, 0.0, math.nan, expected, vacuous=True)
    ratio = u0 / w0
    rtol = get_settings().verify.identity_rtol
    if abs(ratio / expected - 1.0) > rtol:
        raise IdentityCheckError(
            f"u(0)/W(0) = {ratio!r} differs from s^(-1/(p-1)) = {expected!r} beyond {rtol}"
        )
    logger.info("Center identity n=%d p=%g: u(0)=%.10g W(0)=%.10g ratio=%.12g", n, p, u0, w0, ratio)
    return CenterIdentity(u0, w0, ratio, expected)


@dataclass
class LadderResult:
    radii: List[float]
    profiles: List[RadialProfile]
    trace: IterationTrace
    limit: Optional[RadialProfile] = None


def reachable_ladder_radial(
    sigma: RadialMeasure, p: float, n: int, mesh: Sequence[float], radii: Sequence[float]
) -> LadderResult:
    """Solutions for σ|_{B(0,R_i)}, R_1 < R_2 < ...; nondecreasing in i.

    ``sup_ratio`` in the trace is the sup-relative gap to the entire solution.
    """
    validate_exponent(p, n)
    rs = [float(r) for r in radii]
    if any(b <= a for a, b in zip(rs, rs[1:])):
        raise InvariantError("ladder radii must be strictly increasing")
    limit = solve_entire_radial(sigma, p, n, mesh) if check_finiteness(sigma, p, n).finite else None
    trace = IterationTrace(direction="ascending")
    profiles: List[RadialProfile] = []
    prev = None
    for i, R in enumerate(rs):
        u = solve_entire_radial(restrict_to_ball(sigma, R), p, n, mesh)
        tol = 1e-12 * max(u.sup(), 1e-300)
        monotone = prev is None or bool(np.all(u.values >= prev.values - tol))
        gap = sup_relative_difference(u.values, limit.values) if limit is not None else math.nan
        trace.add(IterationRecord(j=i, sup_value=u.sup(), sup_ratio=gap, monotone=monotone))
        profiles.append(u.relabeled(f"u_R={R:g}"))
        prev = u
    trace.converged = limit is not None
    return LadderResult(rs, profiles, trace, limit)
