"""Ingest, query and transform the measures σ and μ.

Measure spec documents are TOML key-value documents::

    kind = "radial"
    n = 3
    knots = "1, 4.1887902047863905"      # "r,m; r,m; ..." or [[r, m], ...]
    tail = "4.1887902047863905, 0, 0"    # a, b, c

    kind = "grid"
    n = 2
    spacing = 0.1
    box_half_width = 1.0
    density_file = "zero_density.csv"    # row-major CSV, relative to the document
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import toml
from pydantic import ValidationError
from scipy.optimize import brentq

from ..utils.config_loader import get_settings
from ..utils.errors import DomainError, MeasureParseError
from ..utils.settings import MeasureDocument
from ..utils.validators import validate_positive
from .grid import GridMeasure, grid_size
from .radial import RadialMeasure

logger = logging.getLogger(__name__)

Measure = Union[RadialMeasure, GridMeasure]


# --- parsing -------------------------------------------------------------------


def _parse_numbers(key: str, value, width: Optional[int] = None) -> List[List[float]]:
    """Rows of floats from ``"a,b; c,d"`` or from a TOML array (of arrays)."""
    try:
        if isinstance(value, str):
            rows = [[float(v) for v in chunk.split(",")] for chunk in value.split(";") if chunk.strip()]
        elif value and not isinstance(value[0], (list, tuple)):
            rows = [[float(v) for v in value]]
        else:
            rows = [[float(v) for v in row] for row in value]
    except (TypeError, ValueError) as exc:
        raise MeasureParseError(key, f"expected comma-separated numbers ({exc})") from exc
    if not rows:
        raise MeasureParseError(key, "empty value")
    if width is not None and any(len(row) != width for row in rows):
        raise MeasureParseError(key, f"every entry needs exactly {width} numbers")
    return rows


def _radial_from_document(doc: MeasureDocument) -> RadialMeasure:
    if doc.tail is None:
        raise MeasureParseError("tail", "radial measure needs a tail 'a, b, c'")
    tail_rows = _parse_numbers("tail", doc.tail, width=3)
    if len(tail_rows) != 1:
        raise MeasureParseError("tail", "expected a single triple 'a, b, c'")
    a, b, c = tail_rows[0]
    if doc.knots is None:
        if doc.tail_start is None:
            raise MeasureParseError("knots", "radial measure needs knots or tail_start")
        return RadialMeasure.from_tail(a, b, c, doc.n, doc.tail_start)
    if doc.tail_start is not None:
        raise MeasureParseError("tail_start", "give either knots or tail_start, not both")
    knots = tuple((r, m) for r, m in _parse_numbers("knots", doc.knots, width=2))
    return RadialMeasure(knots=knots, tail=(a, b, c), n=doc.n)


def read_density_csv(path: Path, n: int) -> np.ndarray:
    """Row-major density samples; the grid side N is inferred from the sample count."""
    values = pd.read_csv(path, header=None, comment="#").to_numpy(dtype=float).ravel()
    N = int(round(values.size ** (1.0 / n)))
    if N**n != values.size:
        raise MeasureParseError("density_file", f"{values.size} samples do not form an N^{n} grid")
    return values.reshape((N,) * n)


def _grid_from_document(doc: MeasureDocument, base_dir: Optional[Path]) -> GridMeasure:
    if doc.density_file is None:
        raise MeasureParseError("density_file", "grid measure needs a density_file")
    if doc.spacing is None:
        raise MeasureParseError("spacing", "grid measure needs a spacing")
    path = Path(doc.density_file)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    if not path.exists():
        raise MeasureParseError("density_file", f"file not found: {path}")
    density = read_density_csv(path, doc.n)
    N = density.shape[0]
    L = doc.box_half_width if doc.box_half_width is not None else 0.5 * (N - 1) * doc.spacing
    if grid_size(L, doc.spacing) != N:
        raise MeasureParseError("box_half_width", f"box [-{L}, {L}] with h={doc.spacing} does not have {N} nodes")
    return GridMeasure(density, doc.spacing, doc.n, L)


def parse_measure_spec(text: str, base_dir: Optional[Path] = None) -> Measure:
    """Parse a measure spec document; errors name the offending key."""
    try:
        raw = toml.loads(text)
    except toml.TomlDecodeError as exc:
        raise MeasureParseError("document", f"not a valid key-value document ({exc})") from exc
    try:
        doc = MeasureDocument(**raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise MeasureParseError(str(err["loc"][0]), err["msg"]) from exc
    if doc.kind == "radial":
        m: Measure = _radial_from_document(doc)
    else:
        m = _grid_from_document(doc, base_dir)
    logger.debug("Parsed %s measure in dimension %d", doc.kind, doc.n)
    return m


def load_measure(path: Union[str, Path]) -> Measure:
    path = Path(path)
    if not path.exists():
        raise MeasureParseError("path", f"measure document not found: {path}")
    return parse_measure_spec(path.read_text(encoding="utf-8"), base_dir=path.parent)


# --- queries and transformations ----------------------------------------------


def ball_mass(m: Measure, radius: float) -> float:
    """σ(B(0, radius))."""
    validate_positive("radius", radius)
    if isinstance(m, GridMeasure):
        return m.ball_mass(radius)
    return float(m.mass(radius))


def restrict_to_ball(m: Measure, R: float) -> Measure:
    """σ restricted to B(0, R); ``R = inf`` returns ``m`` itself."""
    validate_positive("R", R)
    if math.isinf(R):
        return m
    if isinstance(m, GridMeasure):
        return m.restricted(m.ball_mask(R))
    return m.restricted(((0.0, R),))


def scale(m: Measure, lam: float) -> Measure:
    if not (lam > 0) or math.isinf(lam):
        raise DomainError(f"scale factor must be positive and finite (got {lam})")
    if lam == 1.0:
        return m
    return m.scaled(lam)


def _sublevel_shells(
    radii: np.ndarray, below: np.ndarray, crossing
) -> List[Tuple[float, float]]:
    shells = []
    start = radii[0] if below[0] else None
    for i in range(1, len(radii)):
        if below[i] and not below[i - 1]:
            start = crossing(radii[i - 1], radii[i])
        elif not below[i] and below[i - 1]:
            shells.append((start, crossing(radii[i - 1], radii[i])))
            start = None
    if start is not None:
        shells.append((start, radii[-1]))
    return shells


def restrict_to_wolff_sublevel(m: RadialMeasure, k: float, p: float, n: int) -> RadialMeasure:
    """σ restricted to B(0, k) ∩ {W₁,ₚσ < k}.

    W₁,ₚσ is sampled on [0, k]; each change of sign of W − k is located by
    Brent's method in the radius. Points with W = k are excluded.
    """
    from ..potentials.wolff import wolff_potential

    validate_positive("k", k)
    ball = restrict_to_ball(m, k)
    if m.is_zero:
        return ball
    ms = get_settings().measure
    bps = m.breakpoints()
    radii = np.unique(
        np.concatenate(([0.0], np.geomspace(k * 1e-6, k, ms.sublevel_samples), bps[bps < k]))
    )
    values = np.array([wolff_potential(m, p, n, r) for r in radii])
    below = values < k
    if below.all():
        logger.info("Wolff sublevel k=%g covers B(0,k): max W=%.6g", k, values.max())
        return ball

    def crossing(lo: float, hi: float) -> float:
        return float(brentq(lambda r: wolff_potential(m, p, n, r) - k, lo, hi, xtol=ms.bisection_tol))

    shells = _sublevel_shells(radii, below, crossing)
    logger.info("Wolff sublevel k=%g: %d shell(s) %s", k, len(shells), shells)
    return ball.restricted(shells)


def grid_from_radial(m: RadialMeasure, L: float, h: float) -> GridMeasure:
    """Sample the density of a radial measure on the grid over [−L, L]ⁿ.

    The density is M'(ρ)/(s_{n−1}ρ^{n−1}) at the nodes inside B(0, L),
    renormalized so that the grid mass equals σ(B(0, L)).
    """
    from ..potentials.wolff import sphere_area

    N = grid_size(L, h)
    template = GridMeasure(np.zeros((N,) * m.n), h, m.n, L)
    rho = template.distance_from()
    floor = 1e-6 * min(h, m.knots[0][0])
    rr = np.maximum(rho, floor)
    density = m.density(rr) / (sphere_area(m.n) * rr ** (m.n - 1))
    density = np.where(rho <= L, density, 0.0)
    current = density.sum() * h**m.n
    target = float(m.mass(L))
    if current > 0:
        density *= target / current
    return template.with_density(density)

