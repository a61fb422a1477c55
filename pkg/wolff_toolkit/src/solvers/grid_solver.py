"""Dirichlet problems −div A(x, ∇u) = ν on grids by regularized energy minimization.

The discrete energy is

    J_ε(u) = Σ w·((|∇ₕu|² + ε²)^{p/2} − εᵖ)/p · hⁿ − Σ u·ν·hⁿ

with ∇ₕ the forward-difference gradient. Unknowns are the values on the
interior nodes of the domain; all other nodes are held at 0. A difference
that crosses a curved Dirichlet boundary (the ball, a capacity plate) at
the fraction θ of a step is scaled by θ^{−(p−1)/p}, so the edge carries the
energy of the linear profile on the shortened segment. J_ε is minimized by
L-BFGS-B, warm-started along the decreasing ε schedule, with the lower
bound u ≥ 0 (capacities use u ≥ 1 on the condenser plate); a projected
Newton-CG polish finishes the last ε when L-BFGS-B stalls short of the
tolerance. Residuals are reported relative to the size of the data.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.optimize import Bounds, minimize
from scipy.sparse.linalg import cg

from ..measures.grid import BALL_EPS, GridMeasure
from ..measures.operator import OperatorSpec
from ..potentials.profiles import sup_relative_difference
from ..potentials.wolff import PotentialKernel, grid_potential_field
from ..utils.config_loader import get_settings
from ..utils.errors import ConvergenceError, DivergenceError, DomainError, InvariantError
from ..utils.output import ArtifactMeta, write_csv
from ..utils.validators import validate_grid_dimension, validate_positive, validate_sublinear
from .trace import IterationRecord, IterationTrace

logger = logging.getLogger("grid")

DOMAINS = ("box", "ball")
RESTARTS = 3
THETA_MIN = 0.1
NEWTON_STEPS = 8
HALVINGS = 10

# distance from free points (shape (n, m)) to the boundary along axis k, direction s
Crossing = Callable[[np.ndarray, int, float], np.ndarray]


@dataclass(frozen=True)
class SolveConfig:
    epsilon_schedule: Tuple[float, ...]
    max_inner_iterations: int
    inner_tolerance: float
    domain: str = "box"
    radius: Optional[float] = None  # half-width for "box", radius for "ball"; None: the grid box

    def __post_init__(self) -> None:
        eps = tuple(float(e) for e in self.epsilon_schedule)
        if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise InvariantError("epsilon_schedule must be a strictly decreasing list of positive values")
        if eps[-1] > 1e-6:
            raise InvariantError("final epsilon must be <= 1e-6")
        if self.max_inner_iterations < 1:
            raise InvariantError("max_inner_iterations must be >= 1")
        validate_positive("inner_tolerance", self.inner_tolerance)
        if self.domain not in DOMAINS:
            raise DomainError(f"domain must be one of {DOMAINS} (got {self.domain!r})")
        if self.radius is not None:
            validate_positive("domain radius", self.radius)
        object.__setattr__(self, "epsilon_schedule", eps)

    @classmethod
    def from_settings(cls, **overrides: Any) -> "SolveConfig":
        gs = get_settings().grid
        values: Dict[str, Any] = {
            "epsilon_schedule": tuple(gs.epsilon_schedule),
            "max_inner_iterations": gs.max_inner_iterations,
            "inner_tolerance": gs.inner_tolerance,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def on_ball(self, R: float) -> "SolveConfig":
        return replace(self, domain="ball", radius=float(R))

    def interior(self, grid: GridMeasure) -> np.ndarray:
        """Nodes carrying unknowns; every other node is held at 0."""
        extent = grid.L if self.radius is None else self.radius
        if extent > grid.L * (1.0 + BALL_EPS):
            raise DomainError(f"domain radius {extent} exceeds the grid box half-width {grid.L}")
        shrink = extent * (1.0 - BALL_EPS)
        if self.domain == "ball":
            return grid.distance_from() < shrink
        return np.all(np.abs(grid.coordinates()) < shrink, axis=0)

    def crossing(self, grid: GridMeasure) -> Crossing:
        extent = grid.L if self.radius is None else self.radius
        if self.domain == "ball":
            return lambda x, k, s: -s * x[k] + np.sqrt(np.maximum(x[k] ** 2 + extent**2 - np.sum(x**2, axis=0), 0.0))
        return lambda x, k, s: extent - s * x[k]


def _plate_crossing(radius: float, center: np.ndarray) -> Crossing:
    """Entry distance into the ball B(center, radius) from points outside it."""

    def crossing(x: np.ndarray, k: int, s: float) -> np.ndarray:
        y = x - center.reshape(-1, 1)
        return -s * y[k] - np.sqrt(np.maximum(y[k] ** 2 + radius**2 - np.sum(y**2, axis=0), 0.0))

    return crossing


def cut_fractions(grid: GridMeasure, free: np.ndarray, fixed: np.ndarray, crossing: Crossing) -> List[np.ndarray]:
    """Per axis, θ ∈ [THETA_MIN, 1] of each forward edge from ``free`` to ``fixed``.

    θ is stored on the lower node of the edge (the row of the difference
    operator); edges that cross nothing keep θ = 1.
    """
    X = grid.coordinates()
    out = []
    for k in range(grid.n):
        theta = np.ones(free.shape)
        lo = tuple(slice(0, -1) if a == k else slice(None) for a in range(grid.n))
        hi = tuple(slice(1, None) if a == k else slice(None) for a in range(grid.n))
        owner = theta[lo]
        for edges, end, s in ((free[lo] & fixed[hi], lo, 1.0), (fixed[lo] & free[hi], hi, -1.0)):
            if edges.any():
                pts = X[(slice(None),) + end][:, edges]
                owner[edges] = np.clip(crossing(pts, k, s) / grid.h, THETA_MIN, 1.0)
        out.append(theta)
    return out


def discretization_slack(h: float) -> float:
    """δ_h = C·h, the envelope for order-type assertions on grids."""
    return get_settings().grid.slack_factor * h


@dataclass(frozen=True, eq=False)
class GridField:
    """Nonnegative grid function, exactly 0 outside ``interior``."""

    values: np.ndarray
    interior: np.ndarray
    h: float
    n: int
    L: float
    label: str = "u"
    info: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        interior = np.array(self.interior, dtype=bool)
        if values.shape != interior.shape:
            raise InvariantError("field values and interior mask must share the grid shape")
        if np.any(values[~interior] != 0.0):
            raise InvariantError(f"field '{self.label}' is nonzero outside its domain")
        values.setflags(write=False)
        interior.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "interior", interior)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    def template(self) -> GridMeasure:
        return GridMeasure.zeros(self.n, self.h, self.L)

    def sup(self) -> float:
        return float(self.values.max(initial=0.0))

    def gradient(self) -> np.ndarray:
        """Forward differences, shape (n, N, ..., N); 0 on the last node of each axis."""
        return np.stack(
            [np.diff(self.values, axis=k, append=np.take(self.values, [-1], axis=k)) / self.h for k in range(self.n)]
        )

    def gradient_magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.gradient() ** 2, axis=0))

    def same_grid(self, other: "GridField") -> bool:
        return self.n == other.n and self.N == other.N and math.isclose(self.h, other.h, rel_tol=1e-12)

    def relabeled(self, label: str) -> "GridField":
        return replace(self, label=label)

    def header(self) -> str:
        return f"n={self.n} h={self.h!r} L={self.L!r} label={self.label}"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values.reshape(-1, self.N))

    def write(self, path: Path, meta: Optional[ArtifactMeta] = None, float_format: str = "%.17g") -> Path:
        return write_csv(path, self.to_frame(), meta, [self.header()], float_format, header=False)


def difference_operators(N: int, n: int, h: float) -> List[sp.csr_matrix]:
    """Forward-difference matrices along each axis of the row-major N^n grid."""
    d = sp.diags([-np.ones(N), np.ones(N - 1)], [0, 1], shape=(N, N), format="lil")
    d[N - 1, N - 1] = 0.0
    d = d.tocsr() / h
    ops = []
    for k in range(n):
        left = sp.identity(N**k, format="csr")
        right = sp.identity(N ** (n - k - 1), format="csr")
        ops.append(sp.kron(sp.kron(left, d), right, format="csr"))
    return ops


class _Energy:
    def __init__(
        self, op: OperatorSpec, grid: GridMeasure, interior: np.ndarray,
        fractions: Optional[Sequence[np.ndarray]] = None,
    ):
        if op.n != grid.n:
            raise DomainError(f"operator dimension {op.n} does not match the grid dimension {grid.n}")
        self.p = op.p
        self.vol = grid.cell_volume
        self.size = grid.density.size
        self.free = np.flatnonzero(interior.ravel())
        self.D = difference_operators(grid.N, grid.n, grid.h)
        if fractions is not None:
            power = -(self.p - 1.0) / self.p
            self.D = [(sp.diags(theta.ravel() ** power) @ D).tocsr() for theta, D in zip(fractions, self.D)]
        if op.weight is None:
            self.w: Any = 1.0
        elif op.weight.shape != grid.density.shape:
            raise DomainError(f"weight shape {op.weight.shape} does not match the grid {grid.density.shape}")
        else:
            self.w = op.weight.ravel()

    def full(self, x: np.ndarray) -> np.ndarray:
        u = np.zeros(self.size)
        u[self.free] = x
        return u

    def value_and_gradient(self, x: np.ndarray, eps: float, rhs: np.ndarray) -> Tuple[float, np.ndarray]:
        u = self.full(x)
        grads = [D @ u for D in self.D]
        base = sum(g * g for g in grads) + eps * eps
        f = self.vol * (np.sum(self.w * (base ** (self.p / 2.0) - eps**self.p)) / self.p - rhs @ u)
        coef = self.w * base ** (self.p / 2.0 - 1.0)
        g_full = self.vol * (sum(D.T @ (coef * g) for D, g in zip(self.D, grads)) - rhs)
        return float(f), g_full[self.free]

    def hessian(self, x: np.ndarray, eps: float) -> sp.csr_matrix:
        """∇²J_ε on the unknowns: Σ Dₖᵀ c Dₖ + (p−2)·Bᵀ c' B with B = Σ diag(∂ₖu) Dₖ."""
        u = self.full(x)
        grads = [D @ u for D in self.D]
        base = sum(g * g for g in grads) + eps * eps
        w = np.broadcast_to(self.w, base.shape)
        H = sum(D.T @ sp.diags(w * base ** (self.p / 2.0 - 1.0)) @ D for D in self.D)
        if self.p != 2.0:
            B = sum(sp.diags(g) @ D for g, D in zip(grads, self.D))
            H = H + (self.p - 2.0) * (B.T @ sp.diags(w * base ** (self.p / 2.0 - 2.0)) @ B)
        H = sp.csr_matrix(H * self.vol)
        return H[self.free][:, self.free]

    def p_energy(self, x: np.ndarray) -> float:
        """Σ w|∇ₕu|ᵖ hⁿ (unregularized)."""
        u = self.full(x)
        sq = sum((D @ u) ** 2 for D in self.D)
        return float(self.vol * np.sum(self.w * sq ** (self.p / 2.0)))

    def residual(self, x: np.ndarray, g: np.ndarray, lower: np.ndarray) -> float:
        """Projected-gradient optimality residual per unit volume."""
        pg = x - np.maximum(x - g, lower)
        return float(np.max(np.abs(pg), initial=0.0) / self.vol)


@dataclass
class _MinimizeResult:
    x: np.ndarray
    residual_history: List[float]
    energy_history: List[float]
    iterations: int
    scale: float = 1.0
    newton_steps: int = 0


def _polish(
    energy: _Energy, rhs: np.ndarray, x: np.ndarray, lower: np.ndarray, eps: float, scale: float,
    cfg: SolveConfig, energies: List[float],
) -> Tuple[np.ndarray, float, int]:
    """Projected Newton-CG at fixed ε; nodes resting on the bound with g ≥ 0 stay put."""
    f, g = energy.value_and_gradient(x, eps, rhs)
    residual = energy.residual(x, g, lower) / scale
    steps = 0
    for _ in range(NEWTON_STEPS):
        if residual <= cfg.inner_tolerance:
            break
        idx = np.flatnonzero(~((x <= lower) & (g >= 0.0)))
        if idx.size == 0:
            break
        H = energy.hessian(x, eps)[idx][:, idx]
        diag = H.diagonal()
        jacobi = sp.diags(1.0 / np.where(diag > 0.0, diag, 1.0))
        step_m, _ = cg(H, -g[idx], M=jacobi, atol=0.0, maxiter=cfg.max_inner_iterations)
        direction = np.zeros_like(x)
        direction[idx] = step_m
        t = 1.0
        for _ in range(HALVINGS):
            trial = np.maximum(x + t * direction, lower)
            f_new, g_new = energy.value_and_gradient(trial, eps, rhs)
            r_new = energy.residual(trial, g_new, lower) / scale
            if r_new < residual and f_new <= f + 1e-12 * abs(f):
                break
            t *= 0.5
        else:
            break
        x, f, g, residual = trial, f_new, g_new, r_new
        energies.append(f)
        steps += 1
    logger.debug("Newton-CG polish: %d steps, relative residual %.3e", steps, residual)
    return x, residual, steps


def _minimize(
    energy: _Energy, rhs: np.ndarray, x0: np.ndarray, lower: np.ndarray, cfg: SolveConfig
) -> _MinimizeResult:
    x = np.maximum(np.asarray(x0, dtype=float), lower)
    residuals: List[float] = []
    energies: List[float] = []
    total = 0
    if x.size == 0:
        return _MinimizeResult(x, [0.0], [0.0], 0)
    bounds = Bounds(lower, np.full_like(lower, np.inf))
    _, g0 = energy.value_and_gradient(x, cfg.epsilon_schedule[0], rhs)
    scale = max(float(np.max(np.abs(rhs), initial=0.0)), energy.residual(x, g0, lower))
    if not scale > 0.0:
        scale = 1.0
    newton = 0
    for eps in cfg.epsilon_schedule:
        cache: Dict[str, Any] = {}

        def fun(z: np.ndarray) -> Tuple[float, np.ndarray]:
            f, g = energy.value_and_gradient(z, eps, rhs)
            cache.update(x=z.copy(), f=f)
            return f, g

        def record(z: np.ndarray) -> None:
            if "x" in cache and np.array_equal(z, cache["x"]):
                energies.append(cache["f"])
            else:
                energies.append(energy.value_and_gradient(z, eps, rhs)[0])

        energies.clear()
        energies.append(energy.value_and_gradient(x, eps, rhs)[0])
        residual = math.inf
        for _ in range(RESTARTS):
            res = minimize(
                fun,
                x,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                callback=record,
                options={
                    "maxiter": cfg.max_inner_iterations,
                    "maxfun": 10 * cfg.max_inner_iterations,
                    "ftol": 0.0,
                    "gtol": cfg.inner_tolerance * scale * energy.vol,
                    "maxcor": 20,
                },
            )
            x = res.x
            total += int(res.nit)
            _, g = energy.value_and_gradient(x, eps, rhs)
            residual = energy.residual(x, g, lower) / scale
            if residual <= cfg.inner_tolerance or res.nit >= cfg.max_inner_iterations:
                break
        if eps == cfg.epsilon_schedule[-1] and residual > cfg.inner_tolerance:
            x, residual, newton = _polish(energy, rhs, x, lower, eps, scale, cfg, energies)
        residuals.append(residual)
        logger.debug("eps=%.1e: %d iterations, relative residual %.3e", eps, res.nit, residual)
    if residuals[-1] > cfg.inner_tolerance:
        raise ConvergenceError(
            f"relative residual {residuals[-1]:.3e} above inner_tolerance {cfg.inner_tolerance:g} "
            f"at the final epsilon",
            residuals,
        )
    return _MinimizeResult(x, residuals, list(energies), total, scale, newton)


def _check_supported(nu: GridMeasure, interior: np.ndarray) -> None:
    if np.any(nu.density[~interior] > 0):
        raise DomainError("measure has mass outside the computational domain")


def _solve(
    nu: GridMeasure, op: OperatorSpec, cfg: SolveConfig, initial: Optional[GridField] = None, label: str = "u"
) -> GridField:
    validate_grid_dimension(nu.n)
    interior = cfg.interior(nu)
    _check_supported(nu, interior)
    energy = _Energy(op, nu, interior, cut_fractions(nu, interior, ~interior, cfg.crossing(nu)))
    lower = np.zeros(energy.free.size)
    if nu.is_zero:
        return GridField(np.zeros(nu.density.shape), interior, nu.h, nu.n, nu.L, label, {"residual_history": [0.0]})
    x0 = initial.values.ravel()[energy.free] if initial is not None else lower
    result = _minimize(energy, nu.density.ravel(), x0, lower, cfg)
    values = np.maximum(energy.full(result.x), 0.0).reshape(nu.density.shape)
    info = {
        "residual_history": result.residual_history,
        "energy_history": result.energy_history,
        "iterations": result.iterations,
        "residual_scale": result.scale,
        "newton_steps": result.newton_steps,
    }
    return GridField(values, interior, nu.h, nu.n, nu.L, label, info)


def solve_dirichlet_grid(nu: GridMeasure, op: OperatorSpec, cfg: Optional[SolveConfig] = None) -> GridField:
    """Minimizer of J_ε through the ε schedule; ``info`` carries the residual history."""
    cfg = cfg or SolveConfig.from_settings()
    u = _solve(nu, op, cfg)
    logger.info(
        "Dirichlet solve n=%d p=%g h=%g (%s): sup=%.8g residual=%.2e",
        nu.n, op.p, nu.h, cfg.domain, u.sup(), u.info["residual_history"][-1],
    )
    return u


@dataclass(frozen=True)
class ComparisonReport:
    max_violation: float
    violating_cell_fraction: float
    tol: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "max_violation": self.max_violation,
            "violating_cell_fraction": self.violating_cell_fraction,
            "tol": self.tol,
        }


def compare_fields(u: GridField, v: GridField, tol: float) -> ComparisonReport:
    """max(u − v) over cells and the fraction of cells with u − v > tol."""
    if not u.same_grid(v):
        raise DomainError("fields live on different grids")
    diff = u.values - v.values
    return ComparisonReport(
        max_violation=max(float(diff.max()), 0.0),
        violating_cell_fraction=float(np.mean(diff > tol)),
        tol=float(tol),
    )


def minimal_solution_grid(
    sigma: GridMeasure, op: OperatorSpec, k_list: Sequence[float], cfg: Optional[SolveConfig] = None,
    threads: int = 1,
) -> List[GridField]:
    """Ladder u_k: σ restricted to B_k ∩ {W̃ < k}, solved on B_k, extended by 0.

    W̃ is the grid Wolff potential of σ. Each field's ``info`` reports the
    excess over its predecessor against δ_h.
    """
    cfg = cfg or SolveConfig.from_settings()
    ks = [float(k) for k in k_list]
    if not ks or any(b <= a for a, b in zip(ks, ks[1:])):
        raise InvariantError("k_list must be a nonempty strictly increasing list")
    if ks[-1] > sigma.L * (1.0 + BALL_EPS):
        raise DomainError(f"ball B_{ks[-1]:g} exceeds the grid box half-width {sigma.L}")
    slack = discretization_slack(sigma.h)
    wolff = grid_potential_field(sigma, PotentialKernel.wolff(op.p, op.n), threads=threads)
    fields: List[GridField] = []
    prev: Optional[GridField] = None
    for k in ks:
        ball_cfg = cfg.on_ball(k)
        keep = ball_cfg.interior(sigma) & (wolff < k)
        sigma_k = sigma.restricted(keep)
        u = _solve(sigma_k, op, ball_cfg, label=f"u_k={k:g}")
        info = dict(u.info, k=k, restricted_mass=sigma_k.total_mass(), max_wolff=float(wolff.max(initial=0.0)))
        if prev is not None:
            report = compare_fields(prev, u, slack)
            info.update(ladder_violation=report.max_violation, monotone=report.max_violation <= slack)
            if report.max_violation > slack:
                logger.warning("Ladder step k=%g decreases by %.3e > delta_h=%.3e", k, report.max_violation, slack)
        else:
            info.update(ladder_violation=0.0, monotone=True)
        u = replace(u, info=info)
        fields.append(u)
        prev = u
    logger.info("Minimal-solution ladder: %d rungs, max W=%.6g", len(fields), float(wolff.max(initial=0.0)))
    return fields


def ladder_trace(fields: Sequence[GridField]) -> IterationTrace:
    trace = IterationTrace(direction="ascending", converged=True)
    for j, u in enumerate(fields):
        trace.add(
            IterationRecord(
                j=j,
                sup_value=u.sup(),
                sup_ratio=float(u.info.get("ladder_violation", 0.0)),
                monotone=bool(u.info.get("monotone", True)),
            )
        )
    return trace


def sublinear_minimal_grid(
    sigma: GridMeasure, mu: GridMeasure, q: float, op: OperatorSpec, cfg: Optional[SolveConfig] = None
) -> Tuple[GridField, IterationTrace]:
    """Ascending scheme u₀ = 0, u_{j+1} = solve(σ·u_j^q + μ) with pointwise density products."""
    validate_sublinear(q, op.p)
    if not sigma.same_grid(mu):
        raise DomainError("sigma and mu must share the grid")
    cfg = cfg or SolveConfig.from_settings()
    settings = get_settings()
    tol = settings.grid.fixed_point_tolerance
    cap = settings.radial.divergence_cap
    slack = discretization_slack(sigma.h)

    interior = cfg.interior(sigma)
    u = GridField(np.zeros(sigma.density.shape), interior, sigma.h, sigma.n, sigma.L, "u")
    trace = IterationTrace(direction="ascending")
    trace.add(IterationRecord(j=0, sup_value=0.0, sup_ratio=math.nan, monotone=True))
    for j in range(1, settings.grid.max_outer_iterations + 1):
        nu = sigma.with_density(sigma.density * u.values**q + mu.density)
        new = _solve(nu, op, cfg, initial=u)
        sup = new.sup()
        if not math.isfinite(sup) or sup > cap:
            raise DivergenceError(f"grid iterate {j} exceeded the divergence cap {cap:g}", j, sup)
        change = sup_relative_difference(new.values, u.values)
        monotone = bool(np.all(new.values >= u.values - slack))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = float(np.max(new.values[u.values > 0] / u.values[u.values > 0])) if u.sup() > 0 else math.nan
        trace.add(IterationRecord(j=j, sup_value=sup, sup_ratio=ratio, monotone=monotone, change=change))
        logger.debug("grid sublinear iterate %d: sup=%.8g change=%.3g", j, sup, change)
        u = new
        if change < tol:
            trace.converged = True
            break
    logger.info("Grid sublinear scheme: converged=%s after %d iterations", trace.converged, trace.iterations)
    return u, trace


@dataclass(frozen=True, eq=False)
class CellSet:
    """A set of grid cells (nodes) on the grid of ``grid``.

    Sets built by :meth:`ball` remember the ball, so the capacity solve can
    place the plate boundary between nodes.
    """

    mask: np.ndarray
    grid: GridMeasure
    radius: Optional[float] = None
    center: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        mask = np.array(self.mask, dtype=bool)
        if mask.shape != self.grid.density.shape:
            raise DomainError(f"cell set shape {mask.shape} does not match the grid {self.grid.density.shape}")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def ball(cls, grid: GridMeasure, radius: float, center: Optional[Sequence[float]] = None) -> "CellSet":
        c = tuple(float(v) for v in np.zeros(grid.n)) if center is None else tuple(float(v) for v in center)
        return cls(grid.ball_mask(radius, c), grid, float(radius), c)

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    def __len__(self) -> int:
        return int(self.mask.sum())


def p_capacity(K_cells: CellSet, op: OperatorSpec, cfg: Optional[SolveConfig] = None) -> float:
    """Σ w|∇ₕu|ᵖhⁿ for the minimizer with u ≥ 1 on ``K_cells`` and u = 0 off the domain."""
    cfg = cfg or SolveConfig.from_settings()
    if K_cells.is_empty:
        return 0.0
    grid, K = K_cells.grid, K_cells.mask
    interior = cfg.interior(grid)
    if np.any(K & ~interior):
        raise DomainError("condenser plate touches the boundary of the domain")
    fractions = cut_fractions(grid, interior, ~interior, cfg.crossing(grid))
    if K_cells.radius is not None:
        plate = _plate_crossing(K_cells.radius, np.asarray(K_cells.center, dtype=float))
        inner = cut_fractions(grid, interior & ~K, K, plate)
        fractions = [np.minimum(a, b) for a, b in zip(fractions, inner)]
    energy = _Energy(op, grid, interior, fractions)
    lower = K.ravel()[energy.free].astype(float)
    result = _minimize(energy, np.zeros(grid.density.size), lower, lower, cfg)
    cap = energy.p_energy(result.x)
    logger.info("p-capacity (p=%g, %d plate cells, h=%g): %.8g", op.p, len(K_cells), grid.h, cap)
    return cap
