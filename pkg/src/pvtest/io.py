"""Reading and writing section tessellations.

JSON layout::

    {"window": [w, h], "cells": [{"vertices": [[x, y], ...], "visibility": "complete"}]}

``window`` may also be ``[u0, v0, u1, v1]``. Files written here add
``periodic`` and per-cell ``generator_id`` keys; readers treat both as
optional. The CSV form has one vertex per row (``cell_id,x,y``) and a
JSON sidecar ``<name>.meta.json`` carrying the window, the periodic flag
and per-cell visibility.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .geometry import Cell, GeometryError, SectionTessellation, classify_visibility, polygon_area


def _window(raw) -> tuple[float, float, float, float]:
    vals = [float(x) for x in raw]
    if len(vals) == 2:
        vals = [0.0, 0.0, *vals]
    if len(vals) != 4 or not all(math.isfinite(x) for x in vals) or not (vals[2] > vals[0] and vals[3] > vals[1]):
        raise GeometryError(f"bad window {raw!r}")
    return tuple(vals)


def _cell(verts, gid: int, visibility) -> Cell:
    v = np.asarray(verts, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3 or not np.all(np.isfinite(v)):
        raise GeometryError(f"cell {gid}: need at least three finite (x, y) vertices")
    a = polygon_area(v)
    if a == 0.0:
        raise GeometryError(f"cell {gid} has zero area")
    if a < 0:
        v = v[::-1].copy()
    if visibility not in (None, "complete", "clipped"):
        raise GeometryError(f"cell {gid}: unknown visibility {visibility!r}")
    return Cell(v, gid, visibility or "complete")


def tessellation_from_dict(d: dict) -> SectionTessellation:
    if not isinstance(d, dict) or "window" not in d or "cells" not in d:
        raise GeometryError("tessellation needs 'window' and 'cells'")
    window = _window(d["window"])
    periodic = bool(d.get("periodic", False))
    cells = []
    missing_vis = False
    for i, c in enumerate(d["cells"]):
        vis = c.get("visibility")
        missing_vis |= vis is None
        cells.append(_cell(c.get("vertices"), int(c.get("generator_id", i)), vis))
    if missing_vis and not periodic:
        classify_visibility(cells, window)
    return SectionTessellation(cells, window, periodic, not cells, None)


def tessellation_to_dict(tess: SectionTessellation) -> dict:
    return {
        "window": list(tess.window),
        "periodic": tess.periodic,
        "cells": [{"generator_id": c.generator_id, "visibility": c.visibility,
                   "vertices": c.vertices.tolist()} for c in tess.cells],
    }


def read_tessellation(path) -> SectionTessellation:
    """Load a ``.json`` or ``.csv`` tessellation."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_tessellation_csv(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise GeometryError(f"{path}: not valid JSON ({err})") from None
    return tessellation_from_dict(data)


def write_tessellation(tess: SectionTessellation, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        write_tessellation_csv(tess, path)
        return
    path.write_text(json.dumps(tessellation_to_dict(tess), indent=1) + "\n")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_tessellation_csv(tess: SectionTessellation, path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell_id", "x", "y"])
        for i, c in enumerate(tess.cells):
            for x, y in c.vertices:
                w.writerow([i, repr(float(x)), repr(float(y))])
    meta = {"window": list(tess.window), "periodic": tess.periodic,
            "visibility": [c.visibility for c in tess.cells],
            "generator_id": [c.generator_id for c in tess.cells]}
    sidecar_path(path).write_text(json.dumps(meta, indent=1) + "\n")


def read_tessellation_csv(path) -> SectionTessellation:
    """CSV vertices plus sidecar; without a sidecar the window is the vertex bounding box."""
    path = Path(path)
    groups: dict[int, list[tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                cid, x, y = int(row[0]), float(row[1]), float(row[2])
            except (ValueError, IndexError):
                if i == 0:
                    continue
                raise GeometryError(f"{path}: bad row {i + 1}: {row}") from None
            groups.setdefault(cid, []).append((x, y))
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    ids = sorted(groups)
    if "window" in meta:
        window = _window(meta["window"])
    elif groups:
        pts = np.concatenate([np.asarray(g) for g in groups.values()])
        window = (*pts.min(axis=0), *pts.max(axis=0))
    else:
        raise GeometryError(f"{path}: no cells")
    vis = meta.get("visibility")
    gids = meta.get("generator_id")
    cells = [_cell(groups[c], int(gids[k]) if gids else c, vis[k] if vis else None) for k, c in enumerate(ids)]
    periodic = bool(meta.get("periodic", False))
    if vis is None and not periodic:
        classify_visibility(cells, window)
    return SectionTessellation(cells, window, periodic, not cells, None)


def write_metrics_csv(rows, path) -> None:
    """``rows`` of ``(section, cell, generator_id, visibility, CellMetrics)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["section", "cell", "generator_id", "visibility", "area", "perimeter", "n_edges"])
        for sec, cell, gid, vis, m in rows:
            w.writerow([sec, cell, gid, vis, repr(m.area), repr(m.perimeter), m.n_edges])
