"""Sublinear problems −Δₚu = σu^q + μ, 0 < q < p − 1, for radial data.

The scheme of successive approximations u_{j+1} = T(u_j), with
T(u) = entire solution for the measure σu^q + μ, is monotone. From u₀ = 0
(or from a subsolution) it increases to the minimal solution; from C0·u it
decreases, and since T(c·u) ≤ c^{q/(p−1)}·T(u) for c ≥ 1 the excess
ln sup(v_j/u) shrinks at least geometrically with factor q/(p−1).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..measures.measure_core import restrict_to_ball
from ..measures.operator import OperatorSpec
from ..measures.radial import RadialMeasure
from ..potentials.intrinsic import intrinsic_potential
from ..potentials.profiles import RadialProfile, merge_mesh, sup_relative_difference
from ..potentials.quadrature import gauss_legendre_on, integrate_up_to_infinity
from ..potentials.wolff import check_finiteness, wolff_radial_profile
from ..utils.config_loader import get_settings
from ..utils.errors import (
    ContractionBoundError,
    DivergenceError,
    DomainError,
    FinitenessError,
    InvariantError,
    PreconditionError,
)
from ..utils.validators import validate_sublinear
from .radial_solver import solve_ball_radial, solve_entire_radial
from .trace import IterationRecord, IterationTrace

logger = logging.getLogger("radial")

Start = Union[str, RadialProfile]
START_MODES = ("auto", "zero", "wolff_seed")


@dataclass(frozen=True)
class SublinearProblem:
    sigma: RadialMeasure
    mu: RadialMeasure
    q: float
    operator: OperatorSpec
    outer_radius: Optional[float] = None

    def __post_init__(self) -> None:
        validate_sublinear(self.q, self.operator.p)
        if not (self.sigma.n == self.mu.n == self.operator.n):
            raise DomainError("sigma, mu and the operator must share the dimension n")
        if not self.operator.is_unit_weight:
            raise DomainError("the radial solver requires the constant weight w = 1")
        if self.outer_radius is None:
            for name, m in (("sigma", self.sigma), ("mu", self.mu)):
                report = check_finiteness(m, self.p, self.n)
                if not report.finite:
                    raise FinitenessError(f"{name} violates the finiteness condition", report)

    @property
    def p(self) -> float:
        return self.operator.p

    @property
    def n(self) -> int:
        return self.operator.n

    @property
    def theta(self) -> float:
        """Contraction factor q/(p−1)."""
        return self.q / (self.p - 1.0)

    def scaled(self, lam_sigma: float = 1.0, lam_mu: float = 1.0) -> "SublinearProblem":
        return SublinearProblem(
            self.sigma.scaled(lam_sigma), self.mu.scaled(lam_mu), self.q, self.operator, self.outer_radius
        )

    def restricted(self, R: float) -> "SublinearProblem":
        return SublinearProblem(
            restrict_to_ball(self.sigma, R), restrict_to_ball(self.mu, R), self.q, self.operator, self.outer_radius
        )

    def solve(self, nu: RadialMeasure, mesh: np.ndarray) -> RadialProfile:
        if self.outer_radius is not None:
            return solve_ball_radial(nu, self.p, self.n, mesh, self.outer_radius)
        return solve_entire_radial(nu, self.p, self.n, mesh)


def product_measure(
    sigma: RadialMeasure,
    u: RadialProfile,
    q: float,
    mu: Optional[RadialMeasure] = None,
) -> RadialMeasure:
    """Radial measure with cumulative mass ∫₀^r u^q dσ + μ(B(0,r)).

    Knots sit at the mesh radii and the breakpoints of σ and μ; each knot
    interval is integrated by Gauss–Legendre. Beyond the last knot the tail
    keeps the dominant power-log growth, matched to the mass at that knot.
    """
    qs = get_settings().quadrature
    n = sigma.n
    mu = mu if mu is not None else RadialMeasure.zero(n)
    top = u.outer_radius if u.outer_radius is not None else max(u.radii[-1], sigma.tail_start(), mu.tail_start())
    pts = np.concatenate((u.radii, sigma.breakpoints(), mu.breakpoints(), [top]))
    knots = np.unique(pts[(pts > 0) & (pts <= top)])

    lefts = np.concatenate(([0.0], knots[:-1]))
    seg = np.zeros(len(knots))
    for i, (a, b) in enumerate(zip(lefts, knots)):
        x, w = gauss_legendre_on(a, b, qs.stieltjes_order)
        seg[i] = np.sum(w * u.evaluate(x) ** q * sigma.density(x))
    masses = np.maximum.accumulate(np.cumsum(seg) + mu.mass(knots))

    a_s, b_s, c_s = sigma.effective_tail()
    a_m, b_m, c_m = mu.effective_tail()
    growth = [(0.0, 0.0)]
    extra = 0.0
    if u.outer_radius is None and a_s > 0 and (b_s > 0 or c_s != 0) and seg.sum() > 0:
        b_prod = b_s + q * u.tail_exponent
        if b_prod > 0:
            growth.append((b_prod, c_s))
        else:
            def f(t):
                return u.evaluate(t) ** q * sigma.density(t) * t

            extra = integrate_up_to_infinity(f, top, qs.rel_tol, qs.order, qs.max_panels)
    if a_m > 0 and (b_m > 0 or c_m != 0):
        growth.append((b_m, c_m))
    b, c = max(growth, key=lambda bc: (bc[0], -bc[1]))
    if top <= 1.0 or (c > 0 and b * math.log(top) < c):
        c = 0.0
    m_top = float(masses[-1]) + extra
    masses[-1] = m_top
    a = m_top / (top**b * (math.log(top) ** (-c) if c != 0.0 else 1.0))
    return RadialMeasure(knots=tuple(zip(knots, masses)), tail=(a, b, c), n=n)


def _operator(prob: SublinearProblem, mesh: np.ndarray):
    def T(u: RadialProfile) -> RadialProfile:
        return prob.solve(product_measure(prob.sigma, u, prob.q, prob.mu), mesh)

    return T


def _zero_profile(prob: SublinearProblem, mesh: np.ndarray) -> RadialProfile:
    if prob.outer_radius is not None:
        mesh = merge_mesh(mesh[mesh < prob.outer_radius], [prob.outer_radius])
    exponent = (prob.p - prob.n) / (prob.p - 1.0)
    return RadialProfile(mesh, np.zeros_like(mesh), exponent, prob.n, "u", outer_radius=prob.outer_radius)


def wolff_seed(prob: SublinearProblem, mesh: Sequence[float]) -> RadialProfile:
    """c₀·(W₁,ₚσ)^{(p−1)/(p−1−q)} with c₀ halved until T(u₀) ≥ u₀ on the mesh.

    On a ball the Dirichlet solution for σ replaces W₁,ₚσ, so that the seed
    vanishes on the boundary like T(u₀) does.
    """
    rs = get_settings().radial
    mesh = np.asarray(mesh, dtype=float)
    kappa = (prob.p - 1.0) / (prob.p - 1.0 - prob.q)
    if prob.outer_radius is not None:
        base = solve_ball_radial(prob.sigma, prob.p, prob.n, mesh, prob.outer_radius)
    else:
        base = wolff_radial_profile(prob.sigma, prob.p, prob.n, mesh)
    base = RadialProfile(
        base.radii, base.values**kappa, base.tail_exponent * kappa, prob.n, "seed", outer_radius=base.outer_radius
    )
    if base.sup() == 0.0:
        return base
    T = _operator(prob, mesh)
    c0 = 1.0
    for _ in range(rs.seed_halvings + 1):
        u0 = base.scaled(c0)
        tu = T(u0)
        if np.all(tu.values >= u0.values * (1.0 - 1e-12)):
            logger.info("Wolff seed accepted with c0=%.6g", c0)
            return u0
        c0 *= 0.5
    raise PreconditionError(f"no subsolution seed found after {rs.seed_halvings} halvings of c0")


def _initial(prob: SublinearProblem, mesh: np.ndarray, start: Start) -> RadialProfile:
    if isinstance(start, RadialProfile):
        return start
    if start not in START_MODES:
        raise DomainError(f"start must be one of {START_MODES} or a profile (got {start!r})")
    if start == "auto":
        start = "zero" if not prob.mu.is_zero else "wolff_seed"
    if start == "zero":
        return _zero_profile(prob, mesh)
    return wolff_seed(prob, mesh)


def sublinear_fixed_point_radial(
    prob: SublinearProblem, mesh: Sequence[float], start: Start = "auto"
) -> Tuple[RadialProfile, IterationTrace]:
    """Iterate u_{j+1} = T(u_j) until the sup-relative change drops below tolerance."""
    rs = get_settings().radial
    mesh = np.asarray(mesh, dtype=float)
    T = _operator(prob, mesh)
    u = _initial(prob, mesh, start)
    trace = IterationTrace(direction="ascending")
    trace.add(IterationRecord(j=0, sup_value=u.sup(), sup_ratio=math.nan, monotone=True))
    for j in range(1, rs.max_iterations + 1):
        new = T(u)
        sup = new.sup()
        if not math.isfinite(sup) or sup > rs.divergence_cap:
            raise DivergenceError(f"iterate {j} exceeded the divergence cap {rs.divergence_cap:g}", j, sup)
        change = sup_relative_difference(new.values, u.values)
        monotone = bool(np.all(new.values >= u.values - 1e-12 * sup))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(u.values > 0, new.values / u.values, np.nan)
        ratio = float(np.nanmax(ratios)) if np.any(u.values > 0) else math.nan
        trace.add(IterationRecord(j=j, sup_value=sup, sup_ratio=ratio, monotone=monotone, change=change))
        logger.debug("sublinear iterate %d: sup=%.10g change=%.3g", j, sup, change)
        u = new
        if change < rs.tolerance:
            trace.converged = True
            break
    logger.info(
        "Sublinear fixed point: %s after %d iterations, sup=%.10g",
        "converged" if trace.converged else "NOT converged",
        trace.iterations,
        u.sup(),
    )
    return u.relabeled("u"), trace


def residual_check(prob: SublinearProblem, u: RadialProfile) -> float:
    """sup-relative distance between u and T(u)."""
    tu = _operator(prob, u.radii)(u)
    return sup_relative_difference(tu.values, u.values)


def _support_mask(prob: SublinearProblem, radii: np.ndarray) -> np.ndarray:
    inside = prob.sigma.density(radii) > 0
    if prob.outer_radius is not None:
        inside &= radii < prob.outer_radius
    return inside


def descending_scheme(
    prob: SublinearProblem, u: RadialProfile, C0: float
) -> Tuple[IterationTrace, RadialProfile]:
    """Descending iteration from v₀ = C0·u with ρ_j = sup(v_j/u); returns the trace and the last iterate.

    Every step checks ln ρ_j ≤ (q/(p−1))^j ln C0 + slack.
    """
    if not (C0 >= 1.0):
        raise DomainError(f"C0 must be >= 1 (got {C0})")
    rs = get_settings().radial
    cs = get_settings().contraction
    mesh = u.radii
    if np.any(u.values[_support_mask(prob, mesh)] <= 0):
        raise PreconditionError("reference solution vanishes on the support of sigma")
    positive = u.values > 0
    if not np.any(positive):
        raise PreconditionError("reference solution is identically zero")

    T = _operator(prob, mesh)
    theta = prob.theta
    ln_c0 = math.log(C0)
    trace = IterationTrace(direction="descending")
    v = u.scaled(C0)
    prev = v
    for j in range(0, rs.max_iterations + 1):
        if j > 0:
            v = T(prev)
        rho = float(np.max(v.values[positive] / u.values[positive]))
        ln_rho = math.log(rho) if rho > 0 else -math.inf
        bound = theta**j * ln_c0 + cs.slack
        monotone = j == 0 or bool(np.all(v.values <= prev.values * (1.0 + 1e-12)))
        trace.add(
            IterationRecord(
                j=j,
                sup_value=v.sup(),
                sup_ratio=rho,
                monotone=monotone,
                change=sup_relative_difference(v.values, prev.values),
                ln_rho=ln_rho,
                bound=bound,
            )
        )
        if ln_rho > bound:
            raise ContractionBoundError(
                f"ln rho_{j} = {ln_rho:.3e} exceeds the contraction bound {bound:.3e} (C0={C0})",
                j,
                ln_rho,
                bound,
            )
        prev = v
        if rho - 1.0 < cs.converged_tol:
            trace.converged = True
            break
    logger.info("Contraction C0=%g: rho-1 < %g after %d iterations", C0, cs.converged_tol, trace.iterations)
    return trace, prev


def contraction_experiment(
    prob: SublinearProblem,
    mesh: Sequence[float],
    C0: float,
    u: Optional[RadialProfile] = None,
) -> IterationTrace:
    """Run the descending scheme from C0 times the ascending fixed point (computed when not given)."""
    if u is None:
        u, _ = sublinear_fixed_point_radial(prob, mesh)
    trace, _ = descending_scheme(prob, u, C0)
    return trace


def predicted_contraction_steps(C0: float, theta: float, tol: float) -> int:
    """Smallest j with exp(θ^j ln C0) − 1 < tol (the recursion x_{j+1} = θ·x_j)."""
    x = math.log(C0)
    j = 0
    while math.exp(x) - 1.0 >= tol:
        x *= theta
        j += 1
    return j


@dataclass
class SublinearLadder:
    radii: List[float]
    profiles: List[RadialProfile]
    limit: RadialProfile
    trace: IterationTrace
    below_limit: bool


def reachable_sublinear_radial(
    prob: SublinearProblem, mesh: Sequence[float], radii: Sequence[float]
) -> SublinearLadder:
    """Fixed points v_m for σ|_{B_m}, μ|_{B_m}; checks v_{m₁} ≤ v_{m₂} ≤ u."""
    rs = [float(r) for r in radii]
    if any(b <= a for a, b in zip(rs, rs[1:])):
        raise InvariantError("ladder radii must be strictly increasing")
    tol = get_settings().radial.tolerance
    u, _ = sublinear_fixed_point_radial(prob, mesh)
    slack = 10.0 * tol * max(u.sup(), 1e-300)
    trace = IterationTrace(direction="ascending")
    profiles: List[RadialProfile] = []
    prev = None
    below = True
    for i, R in enumerate(rs):
        v, _ = sublinear_fixed_point_radial(prob.restricted(R), mesh)
        monotone = prev is None or bool(np.all(v.values >= prev.values - slack))
        below &= bool(np.all(v.values <= u.values + slack))
        gap = sup_relative_difference(v.values, u.values)
        trace.add(IterationRecord(j=i, sup_value=v.sup(), sup_ratio=gap, monotone=monotone))
        profiles.append(v.relabeled(f"v_R={R:g}"))
        prev = v
    trace.converged = True
    return SublinearLadder(rs, profiles, u, trace, below)


@dataclass
class ExistenceReport:
    sigma_condition: str
    kappa_condition: str
    mu_condition: str
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def overall(self) -> str:
        verdicts = (self.sigma_condition, self.kappa_condition, self.mu_condition)
        if "fails" in verdicts:
            return "fails"
        if all(v == "holds" for v in verdicts):
            return "holds"
        return "inconclusive"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma_finiteness": self.sigma_condition,
            "intrinsic_tail": self.kappa_condition,
            "mu_finiteness": self.mu_condition,
            "overall": self.overall,
            "details": self.details,
        }


def existence_report(
    sigma: RadialMeasure, mu: RadialMeasure, p: float, q: float, t_mesh: Sequence[float]
) -> ExistenceReport:
    """Verdicts on the three existence conditions: W₁,ₚσ, K_{p,q}σ and W₁,ₚμ finite at the origin."""
    n = sigma.n
    validate_sublinear(q, p)
    fs = check_finiteness(sigma, p, n)
    fm = check_finiteness(mu, p, n)
    intrinsic = intrinsic_potential(sigma, p, q, n, 0.0, t_mesh)
    kappa_verdict = {"finite": "holds", "infinite": "fails"}.get(intrinsic.verdict, "inconclusive")
    return ExistenceReport(
        sigma_condition="holds" if fs.finite else "fails",
        kappa_condition=kappa_verdict,
        mu_condition="holds" if fm.finite else "fails",
        details={
            "sigma": fs.to_dict(),
            "mu": fm.to_dict(),
            "intrinsic": intrinsic.to_dict(),
        },
    )
