"""Desk-scale checks: bilateral Wolff bounds, reachability conditions, uniqueness battery.

Verdicts are tri-state strings ``holds`` / ``fails`` / ``inconclusive``; a
numerically undecidable condition is reported as inconclusive, never coerced.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .measures.grid import GridMeasure
from .measures.radial import RadialMeasure
from .potentials.profiles import RadialProfile, sup_relative_difference
from .potentials.quadrature import gauss_legendre_on, integrate_up_to_infinity
from .potentials.wolff import ball_volume, sphere_area, wolff_radial_profile
from .solvers.grid_solver import GridField
from .solvers.sublinear import (
    SublinearProblem,
    descending_scheme,
    predicted_contraction_steps,
    sublinear_fixed_point_radial,
)
from .utils.config_loader import get_settings
from .utils.errors import BatteryFailure, ContractionBoundError, DomainError, PreconditionError
from .utils.output import json_number
from .utils.validators import validate_exponent, validate_positive

logger = logging.getLogger("verify")

HOLDS, FAILS, INCONCLUSIVE = "holds", "fails", "inconclusive"


def _jsonify(d: Dict[str, Any]) -> Dict[str, Any]:
    return {k: json_number(v) if isinstance(v, float) else v for k, v in d.items()}


# --- bilateral estimate --------------------------------------------------------


@dataclass(frozen=True)
class BilateralReport:
    min_ratio: Optional[float]
    max_ratio: Optional[float]
    K_empirical: Optional[float]
    evaluation_set: str
    points: int
    center_ratio: Optional[float] = None

    @property
    def verdict(self) -> str:
        return INCONCLUSIVE if self.points == 0 else HOLDS

    def to_dict(self) -> Dict[str, Any]:
        return _jsonify(
            {
                "min_ratio": self.min_ratio,
                "max_ratio": self.max_ratio,
                "K_empirical": self.K_empirical,
                "evaluation_set": self.evaluation_set,
                "points": self.points,
                "center_ratio": self.center_ratio,
                "verdict": self.verdict,
            }
        )


def bilateral_ratio_report(
    u: RadialProfile, sigma: RadialMeasure, p: float, n: int, threads: int = 1
) -> BilateralReport:
    """Extremes of u/W₁,ₚσ over the mesh of ``u``; points where both vanish are skipped."""
    validate_exponent(p, n)
    floor = get_settings().verify.ratio_floor
    w = wolff_radial_profile(sigma, p, n, u.radii, threads=threads)
    keep = (u.values >= floor) | (w.values >= floor)
    described = f"{int(keep.sum())} of {u.radii.size} mesh radii in [{u.radii[0]:g}, {u.radii[-1]:g}]"
    if not keep.any():
        logger.info("Bilateral report: empty evaluation set (zero data)")
        return BilateralReport(None, None, None, described, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = u.values[keep] / w.values[keep]
    lo, hi = float(ratios.min()), float(ratios.max())
    K = max(hi, 1.0 / lo) if lo > 0 else math.inf
    center = float(u.values[0] / w.values[0]) if u.radii[0] == 0.0 and w.values[0] > 0 else None
    logger.info("Bilateral report: ratio in [%.6g, %.6g], K_empirical=%.6g", lo, hi, K)
    return BilateralReport(lo, hi, K, described, int(keep.sum()), center)


# --- weak Lorentz norm ------------------------------------------------------------


def gradient_magnitude(u: GridField) -> np.ndarray:
    """|∇ₕu| with forward differences at every node."""
    return u.gradient_magnitude()


def _jumps(magnitudes: np.ndarray, volumes: Union[float, np.ndarray]):
    """Distinct positive values v of |g| (ascending) and |{|g| ≥ v}|."""
    g = np.abs(np.asarray(magnitudes, dtype=float)).ravel()
    vol = np.broadcast_to(np.asarray(volumes, dtype=float), np.asarray(magnitudes).shape).ravel()
    keep = g > 0
    values, inverse = np.unique(g[keep], return_inverse=True)
    mass = np.bincount(inverse.ravel(), weights=vol[keep], minlength=values.size)
    return values, np.cumsum(mass[::-1])[::-1]


def weak_lorentz_norm(magnitudes: np.ndarray, gamma: float, volumes: Union[float, np.ndarray]) -> float:
    """sup_{t>0} t·|{|g| > t}|^{1/γ} for a piecewise-constant |g| on cells of the given volumes.

    The distribution function is a step function, so the supremum is attained
    as t increases to one of the sampled magnitudes, where |{|g| > t}| tends
    to |{|g| ≥ v}|.
    """
    validate_positive("gamma", gamma)
    values, at_least = _jumps(magnitudes, volumes)
    if values.size == 0:
        return 0.0
    return float(np.max(values * at_least ** (1.0 / gamma)))


def distribution_table(
    magnitudes: np.ndarray, volumes: Union[float, np.ndarray], points: int, gammas: Sequence[float] = ()
) -> pd.DataFrame:
    """|{|g| ≥ t}| at the jump values t of the distribution function.

    With more jumps than ``points`` the table keeps the jumps nearest a
    logarithmic mesh plus, for every γ in ``gammas``, the jump where the weak
    norm is attained, so max t·measure^{1/γ} over the rows is the norm.
    """
    values, at_least = _jumps(magnitudes, volumes)
    if values.size > points:
        mesh = np.geomspace(values[0], values[-1], points)
        idx = np.clip(np.searchsorted(values, mesh), 0, values.size - 1)
        best = [int(np.argmax(values * at_least ** (1.0 / g))) for g in gammas]
        idx = np.unique(np.concatenate((idx, np.asarray(best, dtype=int))))
        values, at_least = values[idx], at_least[idx]
    return pd.DataFrame({"t": values, "measure": at_least})


def radial_gradient(u: RadialProfile):
    """|u'| per mesh interval and the volumes of the corresponding shells."""
    r, v = u.radii, u.values
    slope = np.abs(np.diff(v) / np.diff(r))
    shells = ball_volume(u.n) * (r[1:] ** u.n - r[:-1] ** u.n)
    return slope, shells


def radial_weak_norm(u: RadialProfile, gamma: float) -> float:
    """Weak L^γ norm of |Du| for a radial profile, including its power tail beyond the mesh."""
    slope, shells = radial_gradient(u)
    mesh_part = weak_lorentz_norm(slope, gamma, shells)
    e = u.tail_exponent
    if u.outer_radius is not None or e >= 0 or u.values[-1] == 0:
        return mesh_part
    r_m, g_m = u.radii[-1], abs(e) * u.values[-1] / u.radii[-1]
    # beyond r_M: |u'| = g_M (r/r_M)^{e-1}; {|u'| > t} ⊃ (r_M, r_t)
    decay = 1.0 + u.n / ((e - 1.0) * gamma)
    if decay < -1e-12:
        return math.inf
    ts = g_m * np.geomspace(1e-12, 1.0, 64)
    best = mesh_part
    for t in ts:
        r_t = r_m * (t / g_m) ** (1.0 / (e - 1.0))
        measure = shells[slope > t].sum() + ball_volume(u.n) * (r_t**u.n - r_m**u.n)
        best = max(best, float(t * measure ** (1.0 / gamma)))
    return best


# --- reachability ----------------------------------------------------------------


@dataclass
class ReachabilityReport:
    condition_i: Dict[str, Any]
    condition_ii: Dict[str, Any]
    condition_iii: Dict[str, Any]
    energy: Dict[str, Any]
    lq_sigma: Optional[Dict[str, Any]] = None

    @property
    def holding(self) -> List[str]:
        named = (("i", self.condition_i), ("ii", self.condition_ii), ("iii", self.condition_iii))
        return [name for name, c in named if c["verdict"] == HOLDS]

    @property
    def overall(self) -> str:
        verdicts = [self.condition_i["verdict"], self.condition_ii["verdict"], self.condition_iii["verdict"]]
        if HOLDS in verdicts:
            return HOLDS
        if all(v == FAILS for v in verdicts):
            return FAILS
        return INCONCLUSIVE

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "condition_i": self.condition_i,
            "condition_ii": self.condition_ii,
            "condition_iii": self.condition_iii,
            "energy": self.energy,
            "conditions_holding": self.holding,
            "overall": self.overall,
        }
        if self.lq_sigma is not None:
            out["lq_sigma"] = self.lq_sigma
        return out


def _liminf_proxy(values: np.ndarray, radii: np.ndarray) -> Dict[str, Any]:
    tol = get_settings().verify.liminf_tol
    outer = radii >= radii.max() / 10.0
    top = float(values.max(initial=0.0))
    proxy = float(values[outer].min()) if outer.any() else math.nan
    return {"proxy": proxy, "max": top, "relative": proxy / top if top > 0 else 0.0, "tol": tol}


def _lq_sigma_radial(u: RadialProfile, sigma: RadialMeasure, q: float) -> Dict[str, Any]:
    """∫ u^q dσ by Gauss–Legendre on the mesh intervals plus the power tail."""
    qs = get_settings().quadrature
    r = u.radii
    top = u.outer_radius if u.outer_radius is not None else max(float(r[-1]), sigma.tail_start())
    cuts = np.unique(np.concatenate((r[r > 0], sigma.breakpoints(), [top])))
    cuts = cuts[cuts <= top]
    total = 0.0
    for a, b in zip(np.concatenate(([0.0], cuts[:-1])), cuts):
        x, w = gauss_legendre_on(a, b, qs.stieltjes_order)
        total += float(np.sum(w * u.evaluate(x) ** q * sigma.density(x)))
    a_s, b_s, c_s = sigma.effective_tail()
    tail_growth = a_s > 0 and (b_s > 0 or c_s != 0)
    if u.outer_radius is not None or not tail_growth or u.values[-1] == 0:
        tail, verdict = 0.0, HOLDS
    elif b_s + q * u.tail_exponent < 0:
        tail = integrate_up_to_infinity(
            lambda t: u.evaluate(t) ** q * sigma.density(t) * t, top, qs.rel_tol, qs.order, qs.max_panels
        )
        verdict = HOLDS
    elif b_s + q * u.tail_exponent > 0:
        tail, verdict = math.inf, FAILS
    else:
        tail, verdict = math.nan, INCONCLUSIVE
    return _jsonify({"integral": total + tail if math.isfinite(tail) else tail, "verdict": verdict,
                     "note": "one-sided: the embedding constant is only bounded from below"})


def _grid_condition_i(u: GridField, refined: Optional[GridField], gammas: Sequence[float]) -> Dict[str, Any]:
    """Weak-norm estimates at h and, when given, at h/2; only a stable estimate counts."""
    vol = u.h**u.n
    norms = [weak_lorentz_norm(u.gradient_magnitude(), g, vol) for g in gammas]
    out: Dict[str, Any] = {"gammas": list(gammas), "estimates": norms, "basis": "refinement"}
    if refined is None:
        return {**out, "verdict": INCONCLUSIVE, "note": "one grid only; pass the h/2 solution to judge stability"}
    if refined.n != u.n or not math.isclose(refined.h, u.h / 2.0, rel_tol=1e-9):
        raise DomainError(f"refined field must live on spacing h/2 = {u.h / 2.0:g} (got {refined.h:g})")
    fine = [weak_lorentz_norm(refined.gradient_magnitude(), g, refined.h**refined.n) for g in gammas]
    changes = [abs(b - a) / b if b > 0 else math.inf for a, b in zip(norms, fine)]
    tol = get_settings().verify.refinement_tol
    verdict = HOLDS if any(c <= tol for c in changes) else INCONCLUSIVE
    out.update(refined_estimates=fine, relative_change=[json_number(c) for c in changes], tol=tol, verdict=verdict)
    return out


def reachability_classifier(
    u: Union[GridField, RadialProfile],
    sigma: Union[GridMeasure, RadialMeasure],
    p: float,
    n: int,
    q: Optional[float] = None,
    refined: Optional[GridField] = None,
) -> ReachabilityReport:
    """Numerical verdicts on (i) |Du| ∈ L^{γ,∞}, (ii) liminf u = 0 at infinity, (iii) σ(ℝⁿ) < ∞.

    On grids, (i) holds only when the weak-norm estimate of ``u`` agrees with
    that of ``refined`` (the solution at h/2) to within ``refinement_tol``.
    """
    validate_exponent(p, n)
    gammas = ((p - 1.0) * n / (n - 1.0), p)
    if isinstance(u, GridField):
        if not isinstance(sigma, GridMeasure):
            raise DomainError("a grid field is classified against a grid measure")
        mags = u.gradient_magnitude()
        vol = u.h**u.n
        cond_i = _grid_condition_i(u, refined, gammas)
        lim = _liminf_proxy(u.values, u.template().distance_from())
        energy_value = float(np.sum(mags**p) * vol)
        energy = {"value": energy_value, "verdict": HOLDS}
        mass = sigma.total_mass()
        cond_iii = {"total_mass": mass, "verdict": HOLDS}
        lq = None
    else:
        if not isinstance(sigma, RadialMeasure):
            raise DomainError("a radial profile is classified against a radial measure")
        norms = [radial_weak_norm(u, g) for g in gammas]
        cond_i = {
            "gammas": list(gammas),
            "estimates": [json_number(v) for v in norms],
            "verdict": HOLDS if any(math.isfinite(v) for v in norms) else FAILS,
        }
        lim = _liminf_proxy(u.values, u.radii)
        energy = _radial_energy(u, p)
        a, b, c = sigma.effective_tail()
        finite_mass = a == 0.0 or (b == 0.0 and c == 0.0)
        mass = float(sigma.total_mass()) if finite_mass else math.inf
        cond_iii = _jsonify({"total_mass": mass, "verdict": HOLDS if finite_mass else FAILS})
        lq = _lq_sigma_radial(u, sigma, q) if q is not None else None

    if lim["relative"] < lim["tol"]:
        ii_verdict, basis = HOLDS, "proxy"
    elif isinstance(u, RadialProfile) and u.outer_radius is None and u.tail_exponent < 0:
        ii_verdict, basis = HOLDS, "power tail"
    else:
        ii_verdict, basis = INCONCLUSIVE, "proxy"
    cond_ii = _jsonify({**lim, "basis": basis, "verdict": ii_verdict})
    report = ReachabilityReport(cond_i, cond_ii, cond_iii, energy, lq)
    logger.info("Reachability: conditions holding %s, overall %s", report.holding, report.overall)
    return report


def _radial_energy(u: RadialProfile, p: float) -> Dict[str, Any]:
    slope, shells = radial_gradient(u)
    value = float(np.sum(slope**p * shells))
    e = u.tail_exponent
    if u.outer_radius is not None or u.values[-1] == 0:
        verdict = HOLDS
    elif e < 0:
        # ∫_{r_M}^∞ |u'|^p s r^{n-1} dr with |u'| = g_M (r/r_M)^{e-1}
        k = (e - 1.0) * p + u.n
        if k < 0:
            g_m = abs(e) * u.values[-1] / u.radii[-1]
            value += sphere_area(u.n) * g_m**p * u.radii[-1] ** u.n / (-k)
            verdict = HOLDS
        else:
            value, verdict = math.inf, FAILS
    else:
        verdict = INCONCLUSIVE
    return _jsonify({"value": value, "verdict": verdict})


# --- tail decay ---------------------------------------------------------------------


@dataclass(frozen=True)
class TailDecayReport:
    measured: Optional[float]
    expected: float
    r_from: float
    r_to: float
    verdict: str

    def to_dict(self) -> Dict[str, Any]:
        return _jsonify(
            {"measured": self.measured, "expected": self.expected, "r_from": self.r_from,
             "r_to": self.r_to, "verdict": self.verdict}
        )


def tail_decay_report(u: RadialProfile, p: float, n: int, rtol: float = 0.02) -> TailDecayReport:
    """Decay exponent of ``u`` over the outermost decade against (p−n)/(p−1)."""
    validate_exponent(p, n)
    expected = (p - n) / (p - 1.0)
    r_to = float(u.radii[-1])
    r_from = r_to / 10.0
    keep = (u.radii >= r_from) & (u.values > 0)
    if keep.sum() < 2:
        return TailDecayReport(None, expected, r_from, r_to, INCONCLUSIVE)
    slope = float(np.polyfit(np.log(u.radii[keep]), np.log(u.values[keep]), 1)[0])
    verdict = HOLDS if abs(slope - expected) <= rtol * abs(expected) else FAILS
    return TailDecayReport(slope, expected, r_from, r_to, verdict)


# --- uniqueness battery ---------------------------------------------------------------


@dataclass
class BatterySummary:
    theta: float
    rows: List[Dict[str, Any]] = field(default_factory=list)
    rate_table: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=["C0", "j", "ln_rho", "bound"]))

    @property
    def passed(self) -> bool:
        return all(row["passed"] for row in self.rows)

    @property
    def failing(self) -> List[float]:
        return [row["C0"] for row in self.rows if not row["passed"]]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theta": self.theta,
            "passed": self.passed,
            "failing_C0": self.failing,
            "runs": [_jsonify(row) for row in self.rows],
        }


def uniqueness_battery(prob: SublinearProblem, mesh: Sequence[float], C0_list: Sequence[float]) -> BatterySummary:
    """Descending schemes from C0·u for every C0; each must meet the contraction bound and reach u."""
    settings = get_settings()
    agreement_tol = settings.verify.agreement_tol
    conv_tol = settings.contraction.converged_tol
    u, ascending = sublinear_fixed_point_radial(prob, mesh)
    if not ascending.converged:
        raise PreconditionError("ascending fixed point did not converge; the battery needs its limit")
    summary = BatterySummary(theta=prob.theta)
    frames = []
    for C0 in C0_list:
        predicted = predicted_contraction_steps(C0, prob.theta, conv_tol)
        row: Dict[str, Any] = {"C0": float(C0), "predicted_iterations": predicted}
        try:
            trace, v = descending_scheme(prob, u, C0)
        except ContractionBoundError as exc:
            row.update(passed=False, bound_ok=False, error=str(exc), iterations=exc.iteration)
            summary.rows.append(row)
            continue
        agreement = sup_relative_difference(v.values, u.values)
        row.update(
            iterations=trace.iterations,
            count_match=abs(trace.iterations - predicted) <= 2,
            agreement=agreement,
            bound_ok=True,
            converged=trace.converged,
            passed=trace.converged and agreement <= agreement_tol,
        )
        summary.rows.append(row)
        frames.append(
            pd.DataFrame(
                {
                    "C0": float(C0),
                    "j": [r.j for r in trace.records],
                    "ln_rho": [r.ln_rho for r in trace.records],
                    "bound": [r.bound for r in trace.records],
                }
            )
        )
    if frames:
        summary.rate_table = pd.concat(frames, ignore_index=True)
    logger.info("Uniqueness battery theta=%.4g over C0=%s: passed=%s", prob.theta, list(C0_list), summary.passed)
    if not summary.passed:
        raise BatteryFailure(f"uniqueness battery failed for C0 in {summary.failing}", summary)
    return summary
