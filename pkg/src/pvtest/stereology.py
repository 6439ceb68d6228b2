"""Section summaries and the four intensity estimators.

For a plane section of a Poisson-Voronoi diagram with intensity ``lam``::

    P_A = c1 * lam**(2/3)       vertices per unit area
    N_A = c1 / 2 * lam**(2/3)   cells per unit area (= 1 / E[area])
    L_A = c2 * lam**(1/3)       edge length per unit area

and each relation inverts to an estimator of ``lam``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .geometry import SectionTessellation, unique_vertices

Method = Literal["P", "N", "L", "a"]
METHODS: tuple[Method, ...] = ("P", "N", "L", "a")

C1 = 8.0 / 15.0 * (3.0 / 4.0) ** (1.0 / 3.0) * math.pi ** (5.0 / 3.0) * math.gamma(4.0 / 3.0)
C2 = math.pi * (math.pi / 6.0) ** (1.0 / 3.0) * math.gamma(5.0 / 3.0)


class EstimateError(ValueError):
    """The summary entry needed by an estimator is zero or invalid."""


@dataclass(frozen=True)
class SectionSummary:
    p_a: float
    n_a: float
    l_a: float
    mean_area: float
    n_cells: int


@dataclass(frozen=True)
class LambdaEstimate:
    value: float
    method: Method


def _boundary_edge_mask(verts: np.ndarray, window, tol: float) -> np.ndarray:
    x0, y0, x1, y1 = window
    nxt = np.roll(verts, -1, axis=0)
    mask = np.zeros(len(verts), dtype=bool)
    for side, col in ((x0, 0), (x1, 0), (y0, 1), (y1, 1)):
        mask |= (np.abs(verts[:, col] - side) <= tol) & (np.abs(nxt[:, col] - side) <= tol)
    return mask


def summarize_section(tess: SectionTessellation, include_clipped: bool = True,
                      rel_tol: float = 1e-9) -> SectionSummary:
    """Per-area vertex, cell and edge-length densities plus the mean cell area.

    Vertices and edges on the window boundary are artefacts of the window
    and are left out of ``p_a`` and ``l_a``; interior edges shared by two
    cells count once. ``include_clipped=False`` restricts ``mean_area`` to
    completely visible cells.
    """
    if tess.n_2d == 0:
        raise EstimateError("cannot summarise an empty tessellation")
    area = tess.window_area
    x0, y0, x1, y1 = tess.window
    tol = rel_tol * max(x1 - x0, y1 - y0)

    verts = unique_vertices(tess, rel_tol)
    if tess.periodic:
        n_vertices = len(verts)
    else:
        on_boundary = (
            (np.abs(verts[:, 0] - x0) <= tol) | (np.abs(verts[:, 0] - x1) <= tol)
            | (np.abs(verts[:, 1] - y0) <= tol) | (np.abs(verts[:, 1] - y1) <= tol)
        )
        n_vertices = int(np.count_nonzero(~on_boundary))

    length = 0.0
    for cell in tess.cells:
        v = cell.vertices
        seg = np.hypot(*(np.roll(v, -1, axis=0) - v).T)
        if not tess.periodic:
            seg = seg[~_boundary_edge_mask(v, tess.window, tol)]
        length += float(seg.sum())
    length *= 0.5

    areas = tess.areas()
    if not include_clipped:
        complete = np.array([c.visibility == "complete" for c in tess.cells])
        if not complete.any():
            raise EstimateError("no completely visible cells")
        areas = areas[complete]
    return SectionSummary(
        p_a=n_vertices / area,
        n_a=tess.n_2d / area,
        l_a=length / area,
        mean_area=float(areas.mean()),
        n_cells=tess.n_2d,
    )


def estimate_lambda(summary: SectionSummary, method: Method = "a") -> LambdaEstimate:
    """Invert one stereological relation for the 3D intensity."""
    entry = {"P": summary.p_a, "N": summary.n_a, "L": summary.l_a, "a": summary.mean_area}[method]
    if not (math.isfinite(entry) and entry > 0):
        raise EstimateError(f"estimator {method!r} undefined for summary entry {entry!r}")
    if method == "P":
        value = (entry / C1) ** 1.5
    elif method == "N":
        value = (2.0 * entry / C1) ** 1.5
    elif method == "L":
        value = (entry / C2) ** 3
    else:
        value = (2.0 / (C1 * entry)) ** 1.5
    return LambdaEstimate(value, method)


def estimate_all(summary: SectionSummary) -> dict[str, LambdaEstimate]:
    """Every estimator that is defined for ``summary``."""
    out = {}
    for m in METHODS:
        try:
            out[m] = estimate_lambda(summary, m)
        except EstimateError:
            continue
    return out


def lambda_from_mean_area(mean_area: float) -> float:
    """Shortcut for ``estimate_lambda(..., "a")`` on a bare mean area."""
    if not (math.isfinite(mean_area) and mean_area > 0):
        raise EstimateError(f"mean area must be positive, got {mean_area!r}")
    return (2.0 / (C1 * mean_area)) ** 1.5
