"""Gauss–Legendre panels in s = ln t for integrals of the form ∫ f(t) dt/t."""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Iterable, Optional, Tuple

import numpy as np
from scipy.special import roots_legendre

from ..utils.errors import QuadratureError

Integrand = Callable[[np.ndarray], np.ndarray]

# panels evaluated together while extending an integral towards 0 or ∞
BATCH = 8


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_on(a: float, b: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights mapped to [a, b]."""
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def dyadic_edges(t_lo: float, t_hi: float, breakpoints: Optional[Iterable[float]] = None) -> np.ndarray:
    """Panel edges: powers of two inside (t_lo, t_hi), the breakpoints there, and both ends."""
    if not (0 < t_lo < t_hi):
        return np.array([t_lo, t_hi]) if t_lo == t_hi else np.array([], dtype=float)
    k_lo, k_hi = math.floor(math.log2(t_lo)), math.ceil(math.log2(t_hi))
    pts = [2.0**k for k in range(k_lo, k_hi + 1)]
    if breakpoints is not None:
        pts.extend(float(b) for b in breakpoints)
    pts = [p for p in pts if t_lo < p < t_hi]
    edges = np.unique(np.array([t_lo, t_hi] + pts))
    # drop slivers produced by breakpoints sitting next to a power of two
    keep = np.concatenate(([True], np.diff(np.log(edges)) > 1e-13))
    edges = edges[keep]
    edges[-1] = t_hi
    return edges


def panel_integrals(f: Integrand, edges: np.ndarray, order: int) -> np.ndarray:
    """∫ f(t) dt/t over each panel [edges[i], edges[i+1]] (GL in ln t)."""
    if len(edges) < 2:
        return np.zeros(0)
    x, w = gauss_legendre(order)
    s = np.log(edges)
    mid = 0.5 * (s[1:] + s[:-1])
    half = 0.5 * (s[1:] - s[:-1])
    nodes = np.exp(mid[:, None] + half[:, None] * x[None, :])
    values = f(nodes)
    return (values * w[None, :]).sum(axis=1) * half


def integrate_down_to_zero(
    f: Integrand,
    t_start: float,
    reference: float,
    rel_tol: float,
    order: int,
    max_panels: int,
) -> float:
    """∫_0^{t_start} f(t) dt/t by halving panels [t/2, t].

    Panels are added until one contributes less than ``rel_tol`` times the
    running total (``reference`` plus what was already added). The caller
    guarantees that f is monotone in t below ``t_start``.
    """
    acc = 0.0
    top = t_start
    used = 0
    while used < max_panels:
        edges = top * 2.0 ** -np.arange(BATCH + 1)[::-1]
        contrib = panel_integrals(f, edges, order)[::-1]
        for c in contrib:
            acc += c
            used += 1
            if c <= rel_tol * abs(reference + acc):
                return acc
        top = edges[0]
    raise QuadratureError(f"integral towards t = 0 did not settle within {max_panels} panels")


def integrate_up_to_infinity(
    f: Integrand,
    t_start: float,
    rel_tol: float,
    order: int,
    max_panels: int,
) -> float:
    """∫_{t_start}^∞ f(t) dt/t for a decaying f, panels doubling in width in ln t."""
    acc = 0.0
    s = math.log(t_start)
    width = math.log(2.0)
    for _ in range(max_panels):
        lo, hi = s, s + width
        c = float(panel_integrals(f, np.exp(np.array([lo, hi])), order)[0])
        acc += c
        if not math.isfinite(acc):
            raise QuadratureError("tail integral overflowed")
        if c <= rel_tol * abs(acc):
            return acc
        s, width = hi, 2.0 * width
        if s > 700.0:
            return acc
    raise QuadratureError(f"tail integral did not settle within {max_panels} panels")
