"""Poisson generators in a box and exact planar sections of their Voronoi diagram.

A plane cuts the 3D Voronoi diagram of generators ``p_i`` in a 2D power
(Laguerre) diagram: a point ``x`` of the plane belongs to the generator that
minimises ``|x - q_i|^2 + d_i^2``, where ``q_i`` is the projection of ``p_i``
onto the plane and ``d_i`` its distance to it. Cells are therefore built as
intersections of half-planes between neighbours of the regular triangulation
of the weighted projected points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from . import _kernels

BoundaryMode = Literal["periodic", "bounded"]
Anchor = Literal["center", "lower-left", "lower-right", "upper-left", "upper-right"]

# Collinear-vertex merge threshold, relative to the window area.
COLLINEAR_TOL = 1e-12


class GeometryError(ValueError):
    """Invalid geometric input (degenerate box, bad plane, bad polygon)."""


class InfeasibleTargetError(GeometryError):
    """A window cut cannot hold exactly the requested number of cells."""


@dataclass(frozen=True)
class BoxGeometry:
    """Axis-aligned box ``[0, Lx) x [0, Ly) x [0, Lz)``."""

    lengths: tuple[float, float, float]
    boundary_mode: BoundaryMode = "bounded"

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.lengths)
        if len(lengths) != 3 or not all(math.isfinite(v) and v > 0 for v in lengths):
            raise GeometryError(f"box lengths must be three positive numbers, got {self.lengths}")
        if self.boundary_mode not in ("periodic", "bounded"):
            raise GeometryError(f"unknown boundary mode {self.boundary_mode!r}")
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def cube(cls, side: float, boundary_mode: BoundaryMode = "bounded") -> "BoxGeometry":
        return cls((side, side, side), boundary_mode)

    @property
    def volume(self) -> float:
        return self.lengths[0] * self.lengths[1] * self.lengths[2]

    @property
    def periodic(self) -> bool:
        return self.boundary_mode == "periodic"

    def scaled(self, s: float) -> "BoxGeometry":
        return BoxGeometry(tuple(s * v for v in self.lengths), self.boundary_mode)


@dataclass
class GeneratorSet:
    """Generator points of a Voronoi diagram living in ``box``.

    ``intensity`` is metadata only (``None`` for a fixed-count draw).
    """

    points: np.ndarray
    box: BoxGeometry
    intensity: float | None = None
    seed: object = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.points = pts

    def __len__(self) -> int:
        return self.points.shape[0]

    def translated(self, shift: Sequence[float]) -> "GeneratorSet":
        """Shift all points; periodic boxes wrap back into the box."""
        pts = self.points + np.asarray(shift, dtype=float)
        if self.box.periodic:
            pts = np.mod(pts, self.box.lengths)
        return GeneratorSet(pts, self.box, self.intensity, self.seed)

    def scaled(self, s: float) -> "GeneratorSet":
        return GeneratorSet(self.points * s, self.box.scaled(s), self.intensity, self.seed)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_poisson_generators(lam: float, box: BoxGeometry, seed=None) -> GeneratorSet:
    """Homogeneous Poisson process of intensity ``lam`` in ``box``."""
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0:
        raise GeometryError(f"intensity must be finite and nonnegative, got {lam}")
    rng = _rng(seed)
    n = rng.poisson(lam * box.volume)
    pts = rng.random((n, 3)) * np.asarray(box.lengths)
    return GeneratorSet(pts, box, lam, seed if not isinstance(seed, np.random.Generator) else None)


def sample_fixed_generators(k: int, box: BoxGeometry, seed=None) -> GeneratorSet:
    """Binomial process: exactly ``k`` i.i.d. uniform points in ``box``."""
    if int(k) != k or k < 0:
        raise GeometryError(f"point count must be a nonnegative integer, got {k}")
    rng = _rng(seed)
    pts = rng.random((int(k), 3)) * np.asarray(box.lengths)
    return GeneratorSet(pts, box, None, seed if not isinstance(seed, np.random.Generator) else None)


@dataclass(frozen=True)
class SectionPlane:
    """Plane ``{x : normal . x = offset}`` with an in-plane observation window.

    Plane coordinates are ``(u, v) = ((x - o) . e1, (x - o) . e2)`` where ``o``
    is the foot of the origin. For an axis-aligned normal ``e_a`` the in-plane
    axes are the two remaining box axes in increasing order, so plane
    coordinates equal box coordinates. ``window`` is ``(u0, v0, u1, v1)``.
    """

    normal: tuple[float, float, float]
    offset: float
    window: tuple[float, float, float, float]

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if n.shape != (3,) or not np.all(np.isfinite(n)):
            raise GeometryError("plane normal must be a finite 3-vector")
        norm = float(np.linalg.norm(n))
        if abs(norm - 1.0) > 1e-12:
            raise GeometryError(f"plane normal must be a unit vector, |n| = {norm}")
        u0, v0, u1, v1 = (float(x) for x in self.window)
        if not (u1 > u0 and v1 > v0):
            raise GeometryError(f"empty window {self.window}")
        object.__setattr__(self, "normal", tuple(float(x) for x in n))
        object.__setattr__(self, "window", (u0, v0, u1, v1))
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def axis_aligned(cls, box: BoxGeometry, axis: int, offset: float,
                     window: tuple[float, float, float, float] | None = None) -> "SectionPlane":
        """Plane ``x_axis = offset``; the window defaults to the full box face."""
        normal = [0.0, 0.0, 0.0]
        normal[axis] = 1.0
        a, b = [i for i in range(3) if i != axis]
        if window is None:
            window = (0.0, 0.0, box.lengths[a], box.lengths[b])
        return cls(tuple(normal), offset, window)

    @property
    def axis(self) -> int | None:
        """Index of the normal axis for axis-aligned planes, else ``None``."""
        n = np.abs(self.normal)
        hit = np.flatnonzero(n == 1.0)
        return int(hit[0]) if hit.size == 1 else None

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(origin, e1, e2)``."""
        n = np.asarray(self.normal)
        origin = self.offset * n
        axis = self.axis
        if axis is not None:
            a, b = [i for i in range(3) if i != axis]
            e1 = np.zeros(3)
            e2 = np.zeros(3)
            e1[a] = 1.0
            e2[b] = 1.0
            return origin, e1, e2
        helper = np.eye(3)[int(np.argmin(np.abs(n)))]
        e1 = helper - (helper @ n) * n
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        return origin, e1, e2

    @property
    def window_area(self) -> float:
        u0, v0, u1, v1 = self.window
        return (u1 - u0) * (v1 - v0)

    def intersects(self, box: BoxGeometry) -> bool:
        """True when the plane passes through the interior of ``box``."""
        corners = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], float)
        vals = corners * np.asarray(box.lengths) @ np.asarray(self.normal) - self.offset
        return bool(vals.min() < 0.0 < vals.max())


def random_axis_plane(box: BoxGeometry, seed=None) -> SectionPlane:
    """Plane parallel to a uniformly chosen pair of box faces at uniform offset."""
    rng = _rng(seed)
    axis = int(rng.integers(3))
    offset = float(rng.random() * box.lengths[axis])
    return SectionPlane.axis_aligned(box, axis, offset)


@dataclass
class Cell:
    """Convex counter-clockwise polygon in plane coordinates.

    ``edge_labels[k]`` names what bounds the edge from vertex ``k`` to
    ``k + 1``: a neighbouring generator id (``>= 0``) or a window side
    (``< 0``). It is ``None`` for cells read from files.
    """

    vertices: np.ndarray
    generator_id: int = -1
    visibility: Literal["complete", "clipped"] = "complete"
    edge_labels: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)

    @property
    def centroid(self) -> np.ndarray:
        return polygon_centroid(self.vertices)


@dataclass(frozen=True)
class CellMetrics:
    area: float
    perimeter: float
    n_edges: int


@dataclass
class SectionTessellation:
    """Cells of a planar section restricted to the observation window.

    In periodic mode the window is a flat torus: cells are whole (never
    clipped) and are given in unwrapped coordinates, so some vertices may
    lie outside the window.
    """

    cells: list[Cell]
    window: tuple[float, float, float, float]
    periodic: bool = False
    degenerate: bool = False
    n_generators: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_2d(self) -> int:
        return len(self.cells)

    @property
    def window_area(self) -> float:
        u0, v0, u1, v1 = self.window
        return (u1 - u0) * (v1 - v0)

    @property
    def window_size(self) -> tuple[float, float]:
        u0, v0, u1, v1 = self.window
        return (u1 - u0, v1 - v0)

    def areas(self) -> np.ndarray:
        return np.array([c.area for c in self.cells], dtype=np.float64)

    def centroids(self) -> np.ndarray:
        if not self.cells:
            return np.empty((0, 2))
        return np.array([c.centroid for c in self.cells], dtype=np.float64)

    def metrics(self) -> list[CellMetrics]:
        return [cell_metrics(c, self.window_area) for c in self.cells]

    def locate(self, pts: np.ndarray) -> np.ndarray:
        """Generator id of the cell containing each point (``-1`` if none)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        out = np.full(len(pts), -1, dtype=np.int64)
        shifts = [(0.0, 0.0)]
        if self.periodic:
            # unwrapped cells may hold any of the nine nearby copies of a point
            w, h = self.window_size
            shifts = [(i * w, j * h) for i in (-1, 0, 1) for j in (-1, 0, 1)]
        for c in self.cells:
            for du, dv in shifts:
                inside = points_in_convex_polygon(pts + [du, dv], c.vertices)
                out[inside] = c.generator_id
        return out


# ---------------------------------------------------------------------------
# polygon helpers


def polygon_area(vertices: np.ndarray) -> float:
    """Signed shoelace area (positive for counter-clockwise)."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    # shift to the first vertex to limit cancellation
    x = x - x[0]
    y = y - y[0]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_perimeter(vertices: np.ndarray) -> float:
    v = np.asarray(vertices, dtype=float)
    return float(np.hypot(*(np.roll(v, -1, axis=0) - v).T).sum())


def polygon_centroid(vertices: np.ndarray) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    base = v[0]
    q = v - base
    x, y = q[:, 0], q[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum()
    if a == 0.0:
        return v.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (3.0 * a)
    cy = ((y + yn) * cross).sum() / (3.0 * a)
    return base + np.array([cx, cy])


def points_in_convex_polygon(pts: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Boolean mask of points inside (or on) a CCW convex polygon."""
    v = np.asarray(vertices, dtype=float)
    e = np.roll(v, -1, axis=0) - v
    rel_x = pts[:, None, 0] - v[None, :, 0]
    rel_y = pts[:, None, 1] - v[None, :, 1]
    cross = e[None, :, 0] * rel_y - e[None, :, 1] * rel_x
    return np.all(cross >= 0.0, axis=1)


def merge_collinear(vertices: np.ndarray, tol_area: float) -> np.ndarray:
    """Drop vertices whose triangle with their neighbours has area below ``tol_area``."""
    v = [tuple(p) for p in np.asarray(vertices, dtype=float)]
    changed = True
    while changed and len(v) > 3:
        changed = False
        m = len(v)
        for k in range(m):
            a, b, c = v[k - 1], v[k], v[(k + 1) % m]
            tri = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
            if tri < tol_area:
                del v[k]
                changed = True
                break
    return np.asarray(v, dtype=float)


def cell_metrics(cell: Cell | np.ndarray, window_area: float | None = None) -> CellMetrics:
    """Area, perimeter and edge count of a convex cell.

    Vertices whose triangle with their neighbours is thinner than
    ``COLLINEAR_TOL * window_area`` are not counted as corners. Without a
    window area the polygon's own area sets the scale.
    """
    verts = cell.vertices if isinstance(cell, Cell) else np.asarray(cell, dtype=float)
    if len(verts) > 1:
        keep = np.any(np.abs(np.diff(verts, axis=0, append=verts[:1])) > 0, axis=1)
        verts = verts[keep]
    if len(verts) < 3:
        raise GeometryError("a cell needs at least three distinct vertices")
    area = abs(polygon_area(verts))
    scale = window_area if window_area is not None else area
    n_edges = len(merge_collinear(verts, COLLINEAR_TOL * scale))
    return CellMetrics(area, polygon_perimeter(verts), n_edges)


# ---------------------------------------------------------------------------
# sectioning


def _project(gen: GeneratorSet, plane: SectionPlane) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    origin, e1, e2 = plane.basis()
    rel = gen.points - origin
    u = rel @ e1
    v = rel @ e2
    d = rel @ np.asarray(plane.normal)
    if gen.box.periodic:
        axis = plane.axis
        length = gen.box.lengths[axis]
        d = d - length * np.round(d / length)
    return u, v, d * d


def _candidate_neighbours(u: np.ndarray, v: np.ndarray, w: np.ndarray) -> list[np.ndarray]:
    """Superset of the regular-triangulation neighbours of every site.

    Uses the lower convex hull of the lifted points ``(u, v, u^2 + v^2 + w)``;
    tiny inputs or degenerate hulls fall back to all pairs.
    """
    n = len(u)
    if n <= 8:
        return [np.delete(np.arange(n), i) for i in range(n)]
    uc = u - u.mean()
    vc = v - v.mean()
    lifted = np.column_stack([uc, vc, uc * uc + vc * vc + w])
    try:
        hull = ConvexHull(lifted, qhull_options="Qt Qbb Qc")
    except QhullError:
        return [np.delete(np.arange(n), i) for i in range(n)]
    # keep every facet that is not clearly an upper one; extra pairs are harmless
    normal_z = hull.equations[:, 2]
    simplices = hull.simplices[normal_z < 1e-12]
    pairs = np.concatenate([simplices[:, [0, 1]], simplices[:, [1, 2]], simplices[:, [0, 2]]])
    pairs = np.concatenate([pairs, pairs[:, ::-1]])
    pairs = np.unique(pairs, axis=0)
    starts = np.searchsorted(pairs[:, 0], np.arange(n + 1))
    return [pairs[starts[i]:starts[i + 1], 1] for i in range(n)]


def _dedupe(u: np.ndarray, v: np.ndarray, w: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Indices of sites to keep: exact duplicates keep the lowest generator id."""
    key = np.column_stack([u, v, w])
    order = np.lexsort((ids, key[:, 2], key[:, 1], key[:, 0]))
    k = key[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = np.any(k[1:] != k[:-1], axis=1)
    return np.sort(order[first])


def _build_cells(px, py, pw, labels, sites, nbrs, rect, periodic, n_original):
    ptr = np.zeros(len(sites) + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(nbrs[s]) for s in sites])
    idx = np.concatenate([nbrs[s] for s in sites]) if len(sites) else np.empty(0, np.int64)
    cell_site, cptr, vx, vy, vlab = _kernels.clip_power_cells(
        np.ascontiguousarray(px, dtype=np.float64),
        np.ascontiguousarray(py, dtype=np.float64),
        np.ascontiguousarray(pw, dtype=np.float64),
        np.ascontiguousarray(sites, dtype=np.int64),
        ptr,
        np.ascontiguousarray(idx, dtype=np.int64),
        np.ascontiguousarray(labels, dtype=np.int64),
        tuple(float(r) for r in rect),
    )
    cells = []
    for c, site in enumerate(cell_site):
        sl = slice(cptr[c], cptr[c + 1])
        verts = np.column_stack([vx[sl], vy[sl]])
        labs = vlab[sl].copy()
        clipped = (not periodic) and bool(np.any(labs < 0))
        cells.append(Cell(verts, int(labels[site]), "clipped" if clipped else "complete", labs))
    cells.sort(key=lambda c: c.generator_id)
    return cells


def section_tessellation(gen: GeneratorSet, plane: SectionPlane) -> SectionTessellation:
    """Intersect the Voronoi diagram of ``gen`` with ``plane``, within the window.

    Equidistant generators (identical projection and plane distance) are
    resolved in favour of the lower generator id. A plane that misses the
    box, or an empty generator set, gives an empty tessellation flagged
    ``degenerate``.
    """
    box = gen.box
    periodic = box.periodic
    if periodic and plane.axis is None:
        raise GeometryError("periodic sections must be parallel to a box face")
    if periodic:
        a, b = [i for i in range(3) if i != plane.axis]
        full = (0.0, 0.0, box.lengths[a], box.lengths[b])
        if not np.allclose(plane.window, full):
            raise GeometryError("periodic sections use the full box face as window")
    if len(gen) == 0 or not plane.intersects(box):
        return SectionTessellation([], plane.window, periodic, True, len(gen))

    u, v, w = _project(gen, plane)
    ids = np.arange(len(gen), dtype=np.int64)
    keep = _dedupe(u, v, w, ids)
    u, v, w, ids = u[keep], v[keep], w[keep], ids[keep]
    rect = plane.window

    if periodic:
        lu, lv = rect[2] - rect[0], rect[3] - rect[1]
        shifts = [(0, 0)] + [(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1) if (i, j) != (0, 0)]
        px = np.concatenate([u + i * lu for i, j in shifts])
        py = np.concatenate([v + j * lv for i, j in shifts])
        pw = np.tile(w, len(shifts))
        labels = np.tile(ids, len(shifts))
        nbrs = _candidate_neighbours(px, py, pw)
        n = len(u)
        sites = np.array([i for i in range(n) if len(nbrs[i]) or n == 1], dtype=np.int64)
        big = (rect[0] - lu, rect[1] - lv, rect[2] + lu, rect[3] + lv)
        cells = _build_cells(px, py, pw, labels, sites, nbrs, big, True, n)
    else:
        nbrs = _candidate_neighbours(u, v, w)
        n = len(u)
        sites = np.array([i for i in range(n) if len(nbrs[i]) or n == 1], dtype=np.int64)
        cells = _build_cells(u, v, w, ids, sites, nbrs, rect, False, n)
    return SectionTessellation(cells, rect, periodic, False, len(gen))


def brute_force_section_oracle(gen: GeneratorSet, plane: SectionPlane, grid_n: int,
                               return_points: bool = False):
    """Label a ``grid_n x grid_n`` cell-centred grid of the window by nearest 3D generator.

    Distances are plain Euclidean in 3D (minimum image in periodic boxes);
    ties go to the lowest generator id. Independent of the power-diagram
    construction on purpose.
    """
    if grid_n < 2:
        raise GeometryError("grid_n must be at least 2")
    u0, v0, u1, v1 = plane.window
    gu = u0 + (np.arange(grid_n) + 0.5) * (u1 - u0) / grid_n
    gv = v0 + (np.arange(grid_n) + 0.5) * (v1 - v0) / grid_n
    uu, vv = np.meshgrid(gu, gv, indexing="xy")
    origin, e1, e2 = plane.basis()
    pts3 = origin + uu.reshape(-1, 1) * e1 + vv.reshape(-1, 1) * e2
    gp = gen.points
    labels = np.empty(len(pts3), dtype=np.int64)
    lengths = np.asarray(gen.box.lengths)
    for start in range(0, len(pts3), 2048):
        q = pts3[start:start + 2048]
        diff = q[:, None, :] - gp[None, :, :]
        if gen.box.periodic:
            diff = diff - lengths * np.round(diff / lengths)
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        labels[start:start + 2048] = np.argmin(d2, axis=1)  # first minimum = lowest id
    labels = labels.reshape(grid_n, grid_n)
    if return_points:
        return labels, np.stack([uu, vv], axis=-1)
    return labels


def simulate_section(box: BoxGeometry, *, lam: float | None = None, k: int | None = None,
                     seed=None, plane: SectionPlane | None = None) -> SectionTessellation:
    """Draw generators (Poisson with ``lam`` or exactly ``k``) and section them.

    The plane is random and axis-parallel unless given.
    """
    rng = _rng(seed)
    if (lam is None) == (k is None):
        raise ValueError("give exactly one of lam or k")
    gen = sample_poisson_generators(lam, box, rng) if k is None else sample_fixed_generators(k, box, rng)
    if plane is None:
        plane = random_axis_plane(box, rng)
    tess = section_tessellation(gen, plane)
    return tess


# ---------------------------------------------------------------------------
# window reduction


def _rect_clip(vertices: np.ndarray, rect) -> np.ndarray:
    """Clip a convex polygon to an axis-aligned rectangle."""
    x0, y0, x1, y1 = rect
    poly = [tuple(p) for p in vertices]
    for ax, ay, b in ((-1.0, 0.0, -x0), (1.0, 0.0, x1), (0.0, -1.0, -y0), (0.0, 1.0, y1)):
        if not poly:
            break
        out = []
        m = len(poly)
        for k in range(m):
            p, q = poly[k], poly[(k + 1) % m]
            sp = ax * p[0] + ay * p[1] - b
            sq = ax * q[0] + ay * q[1] - b
            if sp <= 0:
                out.append(p)
            if (sp <= 0) != (sq <= 0):
                t = sp / (sp - sq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
        poly = out
    return np.asarray(poly, dtype=float).reshape(-1, 2)


def _gauge_threshold(vertices: np.ndarray, anchor_xy, half, centered: bool) -> float:
    """Smallest scale ``s`` at which the shrunken window meets the polygon.

    For the centred window the gauge is ``max(|x'|, |y'|)`` with
    ``x' = (x - cx) / half_w``; for a corner anchor it is ``max(x', y')``
    with ``x' = (x - ax) / w`` oriented into the window. The minimum over a
    convex polygon sits at a vertex, at an edge crossing of a diagonal, or
    at the anchor itself when the polygon contains it.
    """
    q = (np.asarray(vertices, float) - anchor_xy) / half
    if centered:
        gauge = lambda p: np.maximum(np.abs(p[:, 0]), np.abs(p[:, 1]))  # noqa: E731
    else:
        gauge = lambda p: np.maximum(p[:, 0], p[:, 1])  # noqa: E731
    if points_in_convex_polygon(np.zeros((1, 2)), q)[0]:
        return 0.0
    cands = [q]
    r = np.roll(q, -1, axis=0)
    for sign in (1.0, -1.0):
        f0 = q[:, 1] - sign * q[:, 0]
        f1 = r[:, 1] - sign * r[:, 0]
        hit = (f0 * f1 <= 0) & (f0 != f1)
        t = f0[hit] / (f0[hit] - f1[hit])
        cands.append(q[hit] + t[:, None] * (r[hit] - q[hit]))
    return float(gauge(np.concatenate(cands)).min())


def window_cut(tess: SectionTessellation, target: int, anchor: Anchor = "center") -> SectionTessellation:
    """Shrink the window about ``anchor`` until exactly ``target`` cells are visible.

    Returns the largest such window: the one whose boundary just touches
    the next cell to enter. Cells are clipped to the reduced window.
    """
    if tess.periodic:
        raise GeometryError("window cuts apply to bounded sections")
    n = tess.n_2d
    if target < 1 or target > n:
        raise InfeasibleTargetError(f"target {target} outside 1..{n}")
    if target == n:
        return tess
    u0, v0, u1, v1 = tess.window
    w, h = u1 - u0, v1 - v0
    if anchor == "center":
        origin = np.array([(u0 + u1) / 2, (v0 + v1) / 2])
        scale = np.array([w / 2, h / 2])
        centered = True
    else:
        vert, horiz = anchor.split("-")
        ox = u0 if horiz == "left" else u1
        oy = v0 if vert == "lower" else v1
        origin = np.array([ox, oy])
        scale = np.array([w if horiz == "left" else -w, h if vert == "lower" else -h])
        centered = False
    thresholds = np.array([_gauge_threshold(c.vertices, origin, scale, centered) for c in tess.cells])
    order = np.sort(thresholds)
    s = order[target]
    if order[target - 1] >= s:
        raise InfeasibleTargetError(
            f"no window about {anchor} holds exactly {target} cells: "
            f"{int(np.sum(thresholds < s))} cells enter together at scale {s:.6g}")
    if centered:
        rect = (origin[0] - s * scale[0], origin[1] - s * scale[1],
                origin[0] + s * scale[0], origin[1] + s * scale[1])
    else:
        xa, xb = sorted((origin[0], origin[0] + s * scale[0]))
        ya, yb = sorted((origin[1], origin[1] + s * scale[1]))
        rect = (xa, ya, xb, yb)
    area = (rect[2] - rect[0]) * (rect[3] - rect[1])
    cells = []
    for c, t in zip(tess.cells, thresholds):
        if t >= s:
            continue
        poly = _rect_clip(c.vertices, rect)
        if len(poly) < 3 or polygon_area(poly) <= 1e-14 * area:
            continue
        on_edge = _touches_boundary(poly, rect)
        cells.append(Cell(poly, c.generator_id, "clipped" if on_edge else "complete"))
    if len(cells) != target:
        raise InfeasibleTargetError(f"window cut produced {len(cells)} cells instead of {target}")
    return SectionTessellation(cells, rect, False, False, tess.n_generators, dict(tess.meta))


def _touches_boundary(poly: np.ndarray, rect, rel_tol: float = 1e-12) -> bool:
    """True when some polygon edge lies on the rectangle boundary."""
    x0, y0, x1, y1 = rect
    tol = rel_tol * max(x1 - x0, y1 - y0)
    q = np.roll(poly, -1, axis=0)
    for side, col in ((x0, 0), (x1, 0), (y0, 1), (y1, 1)):
        on = (np.abs(poly[:, col] - side) <= tol) & (np.abs(q[:, col] - side) <= tol)
        if np.any(on):
            return True
    return False


def classify_visibility(cells: list[Cell], window) -> None:
    """Set ``visibility`` from geometry for cells without edge labels."""
    for c in cells:
        c.visibility = "clipped" if _touches_boundary(c.vertices, window) else "complete"


def unique_vertices(tess: SectionTessellation, rel_tol: float = 1e-9) -> np.ndarray:
    """Distinct vertex positions, merged within ``rel_tol`` of the window size.

    Periodic sections wrap vertices onto the torus first.
    """
    if not tess.cells:
        return np.empty((0, 2))
    pts = np.concatenate([c.vertices for c in tess.cells])
    u0, v0, u1, v1 = tess.window
    tol = rel_tol * max(u1 - u0, v1 - v0)
    if tess.periodic:
        size = np.array([u1 - u0, v1 - v0])
        pts = np.mod(pts - [u0, v0], size)
        # points a hair below the period wrap to ~0 under cKDTree's box
        pts[pts >= size] -= size[np.nonzero(pts >= size)[1]]
        tree = cKDTree(pts, boxsize=size)
    else:
        tree = cKDTree(pts)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    parent = np.arange(len(pts))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(pts))])
    return pts[np.unique(roots)]
