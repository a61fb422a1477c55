from __future__ import annotations

from typing import Dict, List, Optional, Union

from pydantic import BaseModel, Field, validator


class QuadratureSettings(BaseModel):
    order: int = Field(20, ge=4, le=64)
    rel_tol: float = Field(1e-10, gt=0.0, lt=1e-2)
    max_panels: int = Field(4000, ge=16)
    far_ratio: float = Field(2.0**34, gt=1.0)
    stieltjes_order: int = Field(16, ge=4, le=64)


class MeasureSettings(BaseModel):
    tail_match_rtol: float = Field(1e-12, gt=0.0)
    bisection_tol: float = Field(1e-9, gt=0.0)
    sublevel_samples: int = Field(96, ge=8)


class RadialSettings(BaseModel):
    tolerance: float = Field(1e-8, gt=0.0)
    max_iterations: int = Field(200, ge=1)
    divergence_cap: float = Field(1e12, gt=0.0)
    seed_halvings: int = Field(60, ge=0)


class ContractionSettings(BaseModel):
    slack: float = Field(1e-6, ge=0.0)
    converged_tol: float = Field(1e-6, gt=0.0)


class GridSettings(BaseModel):
    epsilon_schedule: List[float] = Field(default_factory=lambda: [1e-2, 1e-4, 1e-6])
    max_inner_iterations: int = Field(20000, ge=1)
    inner_tolerance: float = Field(1e-8, gt=0.0)
    slack_factor: float = Field(10.0, gt=0.0)
    fixed_point_tolerance: float = Field(1e-6, gt=0.0)
    max_outer_iterations: int = Field(200, ge=1)

    @validator("epsilon_schedule")
    def strictly_decreasing(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("epsilon_schedule must not be empty")
        if any(e <= 0 for e in v):
            raise ValueError("epsilon_schedule entries must be positive")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("epsilon_schedule must be strictly decreasing")
        if v[-1] > 1e-6:
            raise ValueError("final epsilon must be <= 1e-6")
        return v


class VerifySettings(BaseModel):
    ratio_floor: float = Field(1e-14, gt=0.0)
    weak_norm_points: int = Field(64, ge=8)
    liminf_tol: float = Field(1e-6, gt=0.0)
    agreement_tol: float = Field(1e-5, gt=0.0)
    identity_rtol: float = Field(1e-8, gt=0.0)
    tail_slope_tol: float = Field(0.01, gt=0.0)
    tail_points: int = Field(4, ge=2)
    refinement_tol: float = Field(0.1, gt=0.0)


class OutputSettings(BaseModel):
    directory: str = "output"
    float_format: str = "%.17g"


class ToolkitSettings(BaseModel):
    quadrature: QuadratureSettings = QuadratureSettings()
    measure: MeasureSettings = MeasureSettings()
    radial: RadialSettings = RadialSettings()
    contraction: ContractionSettings = ContractionSettings()
    grid: GridSettings = GridSettings()
    verify: VerifySettings = VerifySettings()
    output: OutputSettings = OutputSettings()
    descriptions: Dict[str, Dict[str, object]] = Field(default_factory=dict)
    threads: int = Field(1, ge=1)


class MeshSpec(BaseModel):
    """Log-spaced radial mesh as written in task documents."""

    r_min: float = Field(1e-3, gt=0.0)
    r_max: float = Field(1e4, gt=0.0)
    points: int = Field(121, ge=2)
    include_origin: bool = True

    @validator("r_max")
    def above_r_min(cls, v: float, values) -> float:
        if "r_min" in values and v <= values["r_min"]:
            raise ValueError("r_max must exceed r_min")
        return v


class MeasureDocument(BaseModel):
    """Measure spec document (``kind = "radial"`` or ``kind = "grid"``)."""

    kind: str
    n: int = Field(..., ge=2)
    knots: Optional[Union[str, List[List[float]]]] = None
    tail: Optional[Union[str, List[float]]] = None
    tail_start: Optional[float] = Field(None, gt=0.0)
    density_file: Optional[str] = None
    spacing: Optional[float] = Field(None, gt=0.0)
    box_half_width: Optional[float] = Field(None, gt=0.0)

    @validator("kind")
    def known_kind(cls, v: str) -> str:
        if v not in ("radial", "grid"):
            raise ValueError("kind must be 'radial' or 'grid'")
        return v


TASKS = (
    "wolff",
    "finiteness",
    "solve-radial",
    "sublinear-radial",
    "contraction",
    "solve-grid",
    "minimal-ladder",
    "sublinear-grid",
    "capacity",
    "verify-bilateral",
    "verify-uniqueness",
    "classify",
    "intrinsic",
    "existence",
)


class TaskDocument(BaseModel):
    task: str
    label: str = "run"
    output: str = "output"
    measures: Dict[str, str] = Field(default_factory=dict)
    parameters: Dict[str, object] = Field(default_factory=dict)

    @validator("task")
    def known_task(cls, v: str) -> str:
        if v not in TASKS:
            raise ValueError(f"unknown task '{v}'")
        return v

    @validator("label")
    def filename_safe(cls, v: str) -> str:
        if not v or any(ch in v for ch in "/\\ "):
            raise ValueError("label must be a non-empty filename-safe token")
        return v
