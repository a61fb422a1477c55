"""Task dispatch: one task document, one module operation, deterministic artifacts.

Artifacts are written as ``<task>.<label>.csv`` / ``<task>.<label>.json`` (plus
suffixed CSVs for traces and fields), each carrying the toolkit version and the
SHA-256 of the task document.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd
import toml
from pydantic import ValidationError

from .measures.grid import GridMeasure
from .measures.measure_core import Measure, load_measure, read_density_csv
from .measures.operator import OperatorSpec
from .measures.radial import RadialMeasure
from .potentials.intrinsic import intrinsic_potential
from .potentials.profiles import RadialProfile, log_mesh, merge_mesh
from .potentials.wolff import (
    PotentialKernel,
    check_finiteness,
    grid_potential_field,
    riesz_I1,
    sphere_area,
    wolff_radial_profile,
)
from .solvers.grid_solver import (
    CellSet,
    GridField,
    SolveConfig,
    discretization_slack,
    ladder_trace,
    minimal_solution_grid,
    p_capacity,
    solve_dirichlet_grid,
    sublinear_minimal_grid,
)
from .solvers.radial_solver import radial_center_identity_check, solve_ball_radial, solve_entire_radial
from .solvers.sublinear import (
    SublinearProblem,
    contraction_experiment,
    existence_report,
    residual_check,
    sublinear_fixed_point_radial,
)
from .utils.config_loader import ensure_dir, get_settings, save_json
from .utils.errors import DomainError, MeasureParseError, TaskDocumentError
from .utils.output import ArtifactMeta, json_number, write_csv
from .utils.settings import MeshSpec, TaskDocument
from .utils.validators import validate_parameters
from .verify import (
    bilateral_ratio_report,
    distribution_table,
    radial_gradient,
    reachability_classifier,
    tail_decay_report,
    uniqueness_battery,
)

logger = logging.getLogger("tasks")


# --- documents ---------------------------------------------------------------------


def document_sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def parse_task_document(text: str) -> TaskDocument:
    try:
        raw = toml.loads(text)
    except toml.TomlDecodeError as exc:
        raise TaskDocumentError(f"task document is not a valid key-value document ({exc})") from exc
    try:
        return TaskDocument(**raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise TaskDocumentError(f"{err['loc'][0]}: {err['msg']}") from exc


@dataclass
class TaskContext:
    doc: TaskDocument
    base_dir: Path
    output_dir: Path
    meta: ArtifactMeta
    threads: int = 1

    @property
    def params(self) -> Dict[str, Any]:
        return self.doc.parameters

    def measure(self, key: str, required: bool = True) -> Optional[Measure]:
        ref = self.doc.measures.get(key)
        if ref is None:
            if required:
                raise TaskDocumentError(f"Missing measure reference: measures.{key}")
            return None
        path = Path(ref)
        if not path.is_absolute():
            path = self.base_dir / path
        if not path.exists():
            raise MeasureParseError(f"measures.{key}", f"file not found: {path}")
        return load_measure(path)

    def radial(self, key: str) -> RadialMeasure:
        m = self.measure(key)
        if not isinstance(m, RadialMeasure):
            raise DomainError(f"task '{self.doc.task}' needs a radial measure for '{key}'")
        return m

    def grid(self, key: str) -> GridMeasure:
        m = self.measure(key)
        if not isinstance(m, GridMeasure):
            raise DomainError(f"task '{self.doc.task}' needs a grid measure for '{key}'")
        return m

    def path(self, suffix: str = "", ext: str = "csv") -> Path:
        middle = f".{suffix}" if suffix else ""
        return self.output_dir / f"{self.doc.task}.{self.doc.label}{middle}.{ext}"

    def write_json(self, data: Dict[str, Any], suffix: str = "") -> Path:
        path = self.path(suffix, "json")
        save_json(path, {"meta": self.meta.to_dict(), **data})
        return path

    def write_frame(self, df: pd.DataFrame, suffix: str = "", comments: Optional[List[str]] = None) -> Path:
        fmt = get_settings().output.float_format
        return write_csv(self.path(suffix), df, self.meta, comments, fmt)


# --- parameters ----------------------------------------------------------------------


def _float(params: Dict[str, Any], key: str, default: Optional[float] = None) -> float:
    if key not in params:
        if default is None:
            raise TaskDocumentError(f"Missing required parameter: {key}")
        return default
    try:
        return float(params[key])
    except (TypeError, ValueError) as exc:
        raise TaskDocumentError(f"parameter {key} must be a number (got {params[key]!r})") from exc


def _int(params: Dict[str, Any], key: str, default: Optional[int] = None) -> int:
    if key not in params:
        if default is None:
            raise TaskDocumentError(f"Missing required parameter: {key}")
        return default
    value = params[key]
    try:
        number = float(value)
    except (TypeError, ValueError) as exc:
        raise TaskDocumentError(f"parameter {key} must be an integer (got {value!r})") from exc
    if isinstance(value, bool) or not number.is_integer():
        raise TaskDocumentError(f"parameter {key} must be an integer (got {value!r})")
    return int(number)


def _floats(params: Dict[str, Any], key: str) -> List[float]:
    validate_parameters(params, [key])
    value = params[key]
    try:
        return [float(v) for v in (value if isinstance(value, list) else [value])]
    except (TypeError, ValueError) as exc:
        raise TaskDocumentError(f"parameter {key} must be a list of numbers") from exc


def _mesh(params: Dict[str, Any]) -> np.ndarray:
    try:
        spec = MeshSpec(**params.get("mesh", {}))
    except ValidationError as exc:
        err = exc.errors()[0]
        raise TaskDocumentError(f"mesh.{err['loc'][0]}: {err['msg']}") from exc
    mesh = log_mesh(spec.r_min, spec.r_max, spec.points, spec.include_origin)
    extra = params.get("mesh_extra")
    return merge_mesh(mesh, [float(r) for r in extra]) if extra else mesh


def _outer_radius(params: Dict[str, Any]) -> Optional[float]:
    return _float(params, "outer_radius") if "outer_radius" in params else None


def _operator(ctx: TaskContext, n: int) -> OperatorSpec:
    params = ctx.params
    weight = None
    if "weight_file" in params:
        path = Path(params["weight_file"])
        weight = read_density_csv(path if path.is_absolute() else ctx.base_dir / path, n)
    return OperatorSpec(
        p=_float(params, "p"),
        n=n,
        weight=weight,
        alpha=_float(params, "alpha", 1.0),
        beta=_float(params, "beta", 1.0),
    )


def _solve_config(params: Dict[str, Any]) -> SolveConfig:
    return SolveConfig.from_settings(
        epsilon_schedule=tuple(_floats(params, "epsilon_schedule")) if "epsilon_schedule" in params else None,
        max_inner_iterations=_int(params, "max_inner_iterations") if "max_inner_iterations" in params else None,
        inner_tolerance=_float(params, "inner_tolerance") if "inner_tolerance" in params else None,
        domain=params.get("domain"),
        radius=_float(params, "radius") if "radius" in params else None,
    )


def _sublinear_problem(ctx: TaskContext) -> SublinearProblem:
    sigma = ctx.radial("sigma")
    mu = ctx.radial("mu") if "mu" in ctx.doc.measures else RadialMeasure.zero(sigma.n)
    op = OperatorSpec(_float(ctx.params, "p"), sigma.n)
    return SublinearProblem(sigma, mu, _float(ctx.params, "q"), op, _outer_radius(ctx.params))


# --- task handlers -----------------------------------------------------------------------


def _task_wolff(ctx: TaskContext) -> List[Path]:
    sigma = ctx.measure("sigma")
    kernel_name = ctx.params.get("kernel", "wolff")
    if kernel_name not in ("wolff", "riesz"):
        raise TaskDocumentError("parameter kernel must be 'wolff' or 'riesz'")
    if isinstance(sigma, GridMeasure):
        p = _float(ctx.params, "p", 2.0 if kernel_name == "riesz" else None)
        kernel = PotentialKernel.riesz(sigma.n) if kernel_name == "riesz" else PotentialKernel.wolff(p, sigma.n)
        everywhere = np.ones(sigma.density.shape, dtype=bool)
        values = grid_potential_field(sigma, kernel, mask=everywhere, threads=ctx.threads)
        header = f"n={sigma.n} h={sigma.h!r} L={sigma.L!r} label={kernel_name}"
        return [ctx.write_frame(pd.DataFrame(values.reshape(-1, sigma.N)), comments=[header])]
    mesh = _mesh(ctx.params)
    if kernel_name == "riesz":
        values = [riesz_I1(sigma, sigma.n, float(r)) for r in mesh]
        profile = RadialProfile(mesh, values, 1.0 - sigma.n, sigma.n, "riesz")
    else:
        profile = wolff_radial_profile(sigma, _float(ctx.params, "p"), sigma.n, mesh, threads=ctx.threads)
    return [ctx.write_frame(profile.to_frame())]


def _task_finiteness(ctx: TaskContext) -> List[Path]:
    sigma = ctx.radial("sigma")
    report = check_finiteness(sigma, _float(ctx.params, "p"), sigma.n)
    return [ctx.write_json({"finiteness": report.to_dict()})]


def _task_solve_radial(ctx: TaskContext) -> List[Path]:
    sigma = ctx.radial("sigma")
    p = _float(ctx.params, "p")
    mesh = _mesh(ctx.params)
    R = _outer_radius(ctx.params)
    if R is not None:
        u = solve_ball_radial(sigma, p, sigma.n, mesh, R)
        summary: Dict[str, Any] = {"outer_radius": R}
    else:
        u = solve_entire_radial(sigma, p, sigma.n, mesh)
        summary = {"center_identity": radial_center_identity_check(sigma, p, sigma.n).to_dict()}
    summary.update(sup=u.sup(), tail_exponent=u.tail_exponent, tail_decay=tail_decay_report(u, p, sigma.n).to_dict())
    return [ctx.write_frame(u.to_frame()), ctx.write_json(summary)]


def _task_sublinear_radial(ctx: TaskContext) -> List[Path]:
    prob = _sublinear_problem(ctx)
    start = ctx.params.get("start", "auto")
    u, trace = sublinear_fixed_point_radial(prob, _mesh(ctx.params), start=start)
    summary = {"trace": trace.to_dict(), "residual": json_number(residual_check(prob, u))}
    return [ctx.write_frame(u.to_frame()), ctx.write_frame(trace.to_frame(), "trace"), ctx.write_json(summary)]


def _task_contraction(ctx: TaskContext) -> List[Path]:
    prob = _sublinear_problem(ctx)
    trace = contraction_experiment(prob, _mesh(ctx.params), _float(ctx.params, "C0"))
    frame = trace.to_frame().assign(
        ln_rho=[r.ln_rho for r in trace.records], bound=[r.bound for r in trace.records]
    )
    return [ctx.write_frame(frame), ctx.write_json({"trace": trace.to_dict(), "theta": prob.theta})]


def _task_solve_grid(ctx: TaskContext) -> List[Path]:
    nu = ctx.grid("nu")
    u = solve_dirichlet_grid(nu, _operator(ctx, nu.n), _solve_config(ctx.params))
    fmt = get_settings().output.float_format
    summary = {
        "sup": u.sup(),
        "residual_history": u.info["residual_history"],
        "iterations": u.info.get("iterations", 0),
        "delta_h": discretization_slack(nu.h),
    }
    return [u.write(ctx.path(), ctx.meta, fmt), ctx.write_json(summary)]


def _task_minimal_ladder(ctx: TaskContext) -> List[Path]:
    sigma = ctx.grid("sigma")
    ks = _floats(ctx.params, "k_list")
    fields = minimal_solution_grid(sigma, _operator(ctx, sigma.n), ks, _solve_config(ctx.params), ctx.threads)
    fmt = get_settings().output.float_format
    paths = [ctx.write_frame(ladder_trace(fields).to_frame().assign(k=ks))]
    for i, u in enumerate(fields):
        paths.append(u.write(ctx.path(f"k{i}"), ctx.meta, fmt))
    rungs = [
        {key: json_number(u.info[key]) for key in ("k", "restricted_mass", "max_wolff", "ladder_violation", "monotone")}
        for u in fields
    ]
    paths.append(ctx.write_json({"rungs": rungs, "delta_h": discretization_slack(sigma.h)}))
    return paths


def _task_sublinear_grid(ctx: TaskContext) -> List[Path]:
    sigma = ctx.grid("sigma")
    mu = ctx.grid("mu") if "mu" in ctx.doc.measures else GridMeasure.zeros(sigma.n, sigma.h, sigma.L)
    op = _operator(ctx, sigma.n)
    u, trace = sublinear_minimal_grid(sigma, mu, _float(ctx.params, "q"), op, _solve_config(ctx.params))
    fmt = get_settings().output.float_format
    return [
        u.write(ctx.path(), ctx.meta, fmt),
        ctx.write_frame(trace.to_frame(), "trace"),
        ctx.write_json({"trace": trace.to_dict()}),
    ]


def condenser_capacity(a: float, R: float, p: float, n: int) -> float:
    """Continuum p-capacity of B(0,a) relative to B(0,R)."""
    e = (p - n) / (p - 1.0)
    return sphere_area(n) * ((n - p) / (p - 1.0)) ** (p - 1.0) / (a**e - R**e) ** (p - 1.0)


def _task_capacity(ctx: TaskContext) -> List[Path]:
    params = ctx.params
    validate_parameters(params, ["n", "spacing", "box_half_width", "plate_radius"])
    n = _int(params, "n")
    grid = GridMeasure.zeros(n, _float(params, "spacing"), _float(params, "box_half_width"))
    cfg = _solve_config(params)
    plate = _float(params, "plate_radius")
    cap = p_capacity(CellSet.ball(grid, plate), _operator(ctx, n), cfg)
    summary: Dict[str, Any] = {"capacity": cap, "plate_radius": plate, "domain": cfg.domain}
    if cfg.domain == "ball":
        R = cfg.radius if cfg.radius is not None else grid.L
        exact = condenser_capacity(plate, R, _float(params, "p"), n)
        summary.update(continuum=exact, relative_error=abs(cap / exact - 1.0))
    return [ctx.write_json(summary)]


def _task_verify_bilateral(ctx: TaskContext) -> List[Path]:
    sigma = ctx.radial("sigma")
    p = _float(ctx.params, "p")
    mesh = _mesh(ctx.params)
    u = solve_entire_radial(sigma, p, sigma.n, mesh)
    report = bilateral_ratio_report(u, sigma, p, sigma.n, threads=ctx.threads)
    w = wolff_radial_profile(sigma, p, sigma.n, mesh, threads=ctx.threads)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(w.values > 0, u.values / w.values, np.nan)
    frame = pd.DataFrame({"r": mesh, "u": u.values, "wolff": w.values, "ratio": ratio})
    return [ctx.write_frame(frame), ctx.write_json({"bilateral": report.to_dict()})]


def _task_verify_uniqueness(ctx: TaskContext) -> List[Path]:
    prob = _sublinear_problem(ctx)
    summary = uniqueness_battery(prob, _mesh(ctx.params), _floats(ctx.params, "C0_list"))
    return [ctx.write_frame(summary.rate_table), ctx.write_json({"battery": summary.to_dict()})]


def _task_classify(ctx: TaskContext) -> List[Path]:
    sigma = ctx.measure("sigma")
    p = _float(ctx.params, "p")
    q = _float(ctx.params, "q") if "q" in ctx.params else None
    points = get_settings().verify.weak_norm_points
    gammas = ((p - 1.0) * sigma.n / (sigma.n - 1.0), p)
    refined: Optional[GridField] = None
    if isinstance(sigma, GridMeasure):
        op, cfg = _operator(ctx, sigma.n), _solve_config(ctx.params)
        u = solve_dirichlet_grid(sigma, op, cfg)
        # весовой оператор задан на исходной сетке
        if bool(ctx.params.get("refine", True)) and op.weight is None:
            refined = solve_dirichlet_grid(sigma.refined(), op, cfg)
        table = distribution_table(u.gradient_magnitude(), u.h**u.n, points, gammas)
    else:
        mesh = _mesh(ctx.params)
        R = _outer_radius(ctx.params)
        u = solve_ball_radial(sigma, p, sigma.n, mesh, R) if R is not None else solve_entire_radial(sigma, p, sigma.n, mesh)
        table = distribution_table(*radial_gradient(u), points, gammas)
    report = reachability_classifier(u, sigma, p, sigma.n, q=q, refined=refined)
    return [ctx.write_frame(table, "distribution"), ctx.write_json({"reachability": report.to_dict()})]


def _t_mesh(params: Dict[str, Any]) -> np.ndarray:
    if "t_mesh" in params:
        return np.asarray(_floats(params, "t_mesh"))
    spec = params.get("t_range", {})
    if not isinstance(spec, dict):
        raise TaskDocumentError("t_range must be a table with t_min, t_max and points")
    return np.geomspace(_float(spec, "t_min", 0.01), _float(spec, "t_max", 100.0), _int(spec, "points", 33))


def _task_intrinsic(ctx: TaskContext) -> List[Path]:
    sigma = ctx.measure("sigma")
    p, q = _float(ctx.params, "p"), _float(ctx.params, "q")
    x = ctx.params.get("x", 0.0)
    est = intrinsic_potential(sigma, p, q, sigma.n, x, _t_mesh(ctx.params), threads=ctx.threads)
    frame = pd.DataFrame({"t": est.t_mesh, "kappa_lower_bound": est.kappas})
    return [ctx.write_frame(frame), ctx.write_json({"intrinsic": est.to_dict()})]


def _task_existence(ctx: TaskContext) -> List[Path]:
    sigma = ctx.radial("sigma")
    mu = ctx.radial("mu") if "mu" in ctx.doc.measures else RadialMeasure.zero(sigma.n)
    report = existence_report(sigma, mu, _float(ctx.params, "p"), _float(ctx.params, "q"), _t_mesh(ctx.params))
    return [ctx.write_json({"existence": report.to_dict()})]


HANDLERS: Dict[str, Callable[[TaskContext], List[Path]]] = {
    "wolff": _task_wolff,
    "finiteness": _task_finiteness,
    "solve-radial": _task_solve_radial,
    "sublinear-radial": _task_sublinear_radial,
    "contraction": _task_contraction,
    "solve-grid": _task_solve_grid,
    "minimal-ladder": _task_minimal_ladder,
    "sublinear-grid": _task_sublinear_grid,
    "capacity": _task_capacity,
    "verify-bilateral": _task_verify_bilateral,
    "verify-uniqueness": _task_verify_uniqueness,
    "classify": _task_classify,
    "intrinsic": _task_intrinsic,
    "existence": _task_existence,
}


def run_task(ctx: TaskContext) -> List[Path]:
    """Dispatch to exactly one operation; returns the written artifact paths."""
    ensure_dir(ctx.output_dir)
    logger.info("Running task %s (label=%s)", ctx.doc.task, ctx.doc.label)
    paths = HANDLERS[ctx.doc.task](ctx)
    logger.info("Task %s wrote %d artifact(s) to %s", ctx.doc.task, len(paths), ctx.output_dir)
    return paths
