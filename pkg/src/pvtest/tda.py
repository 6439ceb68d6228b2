"""Alpha-complex persistence of planar point clouds and persistence landscapes.

Filtration values are circle radii: two points at distance ``r`` connect at
``r / 2``. Landscapes are kept exactly as piecewise-linear functions, one
breakpoint array per level ``k``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.spatial import Delaunay, QhullError

from . import _kernels

_EPS = 2.0 ** -53
_CCW_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_ICC_BOUND = (10.0 + 96.0 * _EPS) * _EPS


class TDAError(ValueError):
    """Invalid point cloud or filtration."""


# ---------------------------------------------------------------------------
# predicates


def orient2d(a, b, c) -> int:
    """Sign of the signed area of triangle ``abc`` (+1 counter-clockwise), exactly."""
    detleft = (a[0] - c[0]) * (b[1] - c[1])
    detright = (a[1] - c[1]) * (b[0] - c[0])
    det = detleft - detright
    bound = _CCW_BOUND * (abs(detleft) + abs(detright))
    if det > bound:
        return 1
    if -det > bound:
        return -1
    fa = [Fraction(float(v)) for v in a]
    fb = [Fraction(float(v)) for v in b]
    fc = [Fraction(float(v)) for v in c]
    d = (fa[0] - fc[0]) * (fb[1] - fc[1]) - (fa[1] - fc[1]) * (fb[0] - fc[0])
    return (d > 0) - (d < 0)


def incircle(a, b, c, d) -> int:
    """+1 if ``d`` is strictly inside the circle through CCW ``a, b, c``; exact."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = (alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy)
           + clift * (adx * bdy - bdx * ady))
    perm = ((abs(bdx * cdy) + abs(cdx * bdy)) * alift + (abs(cdx * ady) + abs(adx * cdy)) * blift
            + (abs(adx * bdy) + abs(bdx * ady)) * clift)
    bound = _ICC_BOUND * perm
    if det > bound:
        return 1
    if -det > bound:
        return -1
    A = [Fraction(float(v)) for v in a]
    B = [Fraction(float(v)) for v in b]
    C = [Fraction(float(v)) for v in c]
    D = [Fraction(float(v)) for v in d]
    adx, ady = A[0] - D[0], A[1] - D[1]
    bdx, bdy = B[0] - D[0], B[1] - D[1]
    cdx, cdy = C[0] - D[0], C[1] - D[1]
    e = ((adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
         + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
         + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady))
    return (e > 0) - (e < 0)


def in_diametral_circle(a, b, v) -> bool:
    """True if ``v`` lies strictly inside the circle with diameter ``ab``."""
    t1 = (a[0] - v[0]) * (b[0] - v[0])
    t2 = (a[1] - v[1]) * (b[1] - v[1])
    dot = t1 + t2
    bound = 8.0 * _EPS * (abs(t1) + abs(t2))
    if abs(dot) > bound:
        return dot < 0
    A = [Fraction(float(x)) for x in a]
    B = [Fraction(float(x)) for x in b]
    V = [Fraction(float(x)) for x in v]
    return (A[0] - V[0]) * (B[0] - V[0]) + (A[1] - V[1]) * (B[1] - V[1]) < 0


# ---------------------------------------------------------------------------
# Delaunay triangulation


@dataclass
class Triangulation:
    """Delaunay triangulation with edge/triangle incidences.

    ``triangles`` are counter-clockwise; ``edges`` are sorted vertex pairs;
    ``edge_triangles[e]`` lists the (up to two) incident triangles, ``-1``
    marking the outer face.
    """

    points: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_triangles: np.ndarray
    triangle_edges: np.ndarray


def _validate_cloud(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return np.empty((0, 2))
    pts = pts.reshape(-1, 2)
    if not np.all(np.isfinite(pts)):
        raise TDAError("point coordinates must be finite")
    if len(np.unique(pts, axis=0)) != len(pts):
        raise TDAError("point cloud contains duplicate points")
    return pts


def _incidence(pts: np.ndarray, tris: np.ndarray, extra_edges: np.ndarray | None = None) -> Triangulation:
    tris = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
    if len(tris):
        raw = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        raw.sort(axis=1)
        edges, inverse = np.unique(raw, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        t_of = np.tile(np.arange(len(tris)), 3)
        edge_tri = np.full((len(edges), 2), -1, dtype=np.int64)
        order = np.argsort(inverse, kind="stable")
        inv_sorted = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = inv_sorted[1:] != inv_sorted[:-1]
        edge_tri[inv_sorted[first], 0] = t_of[order][first]
        edge_tri[inv_sorted[~first], 1] = t_of[order][~first]
        tri_edges = inverse.reshape(3, -1).T.copy()
    else:
        edges = np.asarray(extra_edges if extra_edges is not None else np.empty((0, 2)), np.int64)
        edges = edges.reshape(-1, 2)
        edge_tri = np.full((len(edges), 2), -1, dtype=np.int64)
        tri_edges = np.empty((0, 3), dtype=np.int64)
    return Triangulation(pts, tris, edges.astype(np.int64), edge_tri, tri_edges.astype(np.int64))


def _lawson_repair(pts: np.ndarray, tris: list[list[int]]) -> list[list[int]]:
    """Flip edges until every triangle pair passes the exact in-circle test."""
    owner: dict[tuple[int, int], int] = {}
    for t, (a, b, c) in enumerate(tris):
        owner[(a, b)] = t
        owner[(b, c)] = t
        owner[(c, a)] = t
    stack = list(owner.keys())
    while stack:
        a, b = stack.pop()
        t1 = owner.get((a, b))
        t2 = owner.get((b, a))
        if t1 is None or t2 is None:
            continue
        c = next(v for v in tris[t1] if v != a and v != b)
        d = next(v for v in tris[t2] if v != a and v != b)
        if incircle(pts[a], pts[b], pts[c], pts[d]) <= 0:
            continue
        # replace (a,b,c) and (b,a,d) with (a,d,c) and (d,b,c)
        for e in ((a, b), (b, c), (c, a), (b, a), (a, d), (d, b)):
            owner.pop(e, None)
        tris[t1] = [a, d, c]
        tris[t2] = [d, b, c]
        for t in (t1, t2):
            x, y, z = tris[t]
            owner[(x, y)] = t
            owner[(y, z)] = t
            owner[(z, x)] = t
        stack.extend([(a, d), (d, b), (b, c), (c, a)])
    return tris


def delaunay2(points) -> Triangulation:
    """Delaunay triangulation with exact orientation and in-circle predicates.

    Qhull supplies the initial triangulation; any edge failing the exact
    in-circle test is flipped. Fewer than three points, or collinear input,
    give edges only.
    """
    pts = _validate_cloud(points)
    n = len(pts)
    if n < 2:
        return _incidence(pts, np.empty((0, 3)), np.empty((0, 2)))
    if n == 2:
        return _incidence(pts, np.empty((0, 3)), np.array([[0, 1]]))
    p0 = pts[0]
    far = int(np.argmax(np.sum((pts - p0) ** 2, axis=1)))
    if all(orient2d(p0, pts[far], pts[i]) == 0 for i in range(n)):
        direction = pts[far] - p0
        order = np.argsort((pts - p0) @ direction, kind="stable")
        path = np.sort(np.column_stack([order[:-1], order[1:]]), axis=1)
        return _incidence(pts, np.empty((0, 3)), path)
    try:
        dt = Delaunay(pts)
    except QhullError as exc:  # pragma: no cover - collinear input is caught above
        raise TDAError(f"triangulation failed: {exc}") from exc
    if len(dt.coplanar):
        raise TDAError("triangulation dropped near-coincident points")
    tris = []
    for a, b, c in dt.simplices.tolist():
        o = orient2d(pts[a], pts[b], pts[c])
        if o == 0:
            raise TDAError("degenerate triangle in triangulation")
        tris.append([a, b, c] if o > 0 else [a, c, b])
    tris = _lawson_repair(pts, tris)
    return _incidence(pts, np.array(tris, dtype=np.int64))


# ---------------------------------------------------------------------------
# alpha filtration


@dataclass
class Filtration:
    """Filtered simplicial complex on a point cloud.

    ``order`` holds ``(dim, index)`` for edges and triangles sorted by
    value, then dimension, then index; vertices all enter at 0 first.
    """

    triangulation: Triangulation
    edge_values: np.ndarray
    triangle_values: np.ndarray
    order: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.order is None:
            ne, nt = len(self.edge_values), len(self.triangle_values)
            vals = np.concatenate([self.edge_values, self.triangle_values])
            dims = np.concatenate([np.ones(ne, np.int64), np.full(nt, 2, np.int64)])
            idx = np.concatenate([np.arange(ne), np.arange(nt)]).astype(np.int64)
            perm = np.lexsort((idx, dims, vals))
            self.order = np.column_stack([dims[perm], idx[perm]])

    @property
    def n_vertices(self) -> int:
        return len(self.triangulation.points)

    def value(self, dim: int, idx: int) -> float:
        if dim == 0:
            return 0.0
        return float(self.edge_values[idx] if dim == 1 else self.triangle_values[idx])

    @property
    def simplices(self) -> list[tuple[tuple[int, ...], float]]:
        """All simplices as ``(vertex tuple, value)`` in filtration order."""
        tri = self.triangulation
        out = [((i,), 0.0) for i in range(self.n_vertices)]
        for dim, idx in self.order:
            verts = tri.edges[idx] if dim == 1 else tri.triangles[idx]
            out.append((tuple(int(v) for v in verts), self.value(dim, idx)))
        return out

    def check_monotone(self) -> None:
        tri = self.triangulation
        if np.any(self.edge_values < 0) or np.any(self.triangle_values < 0):
            raise TDAError("negative filtration value")
        if len(tri.triangles):
            faces = self.edge_values[tri.triangle_edges]
            if np.any(faces > self.triangle_values[:, None]):
                raise TDAError("filtration is not monotone: an edge enters after its triangle")


def _circumradius(pts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    a = pts[tris[:, 0]]
    b = pts[tris[:, 1]] - a
    c = pts[tris[:, 2]] - a
    d = 2.0 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    b2 = (b * b).sum(axis=1)
    c2 = (c * c).sum(axis=1)
    ux = (c[:, 1] * b2 - b[:, 1] * c2) / d
    uy = (b[:, 0] * c2 - c[:, 0] * b2) / d
    return np.hypot(ux, uy)


def half_lengths(pts: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Half the Euclidean length of each segment, as used for edge values."""
    diff = pts[pairs[:, 1]] - pts[pairs[:, 0]]
    return 0.5 * np.hypot(diff[:, 0], diff[:, 1])


def alpha_filtration(cloud) -> Filtration:
    """Alpha filtration in radius units.

    An edge enters at half its length when its diametral circle holds no
    other point (checked on the opposite vertices of its triangles), and
    otherwise with the cheapest incident triangle. Triangles enter at their
    circumradius.
    """
    tri = cloud if isinstance(cloud, Triangulation) else delaunay2(cloud)
    pts = tri.points
    edge_vals = half_lengths(pts, tri.edges) if len(tri.edges) else np.empty(0)
    if len(tri.triangles) == 0:
        return Filtration(tri, edge_vals, np.empty(0))
    radius = _circumradius(pts, tri.triangles)
    # rounding can put a right-angle circumradius a hair under its hypotenuse
    radius = np.maximum(radius, edge_vals[tri.triangle_edges].max(axis=1))
    for e, (a, b) in enumerate(tri.edges):
        attached = None
        for t in tri.edge_triangles[e]:
            if t < 0:
                continue
            v = next(x for x in tri.triangles[t] if x != a and x != b)
            if in_diametral_circle(pts[a], pts[b], pts[v]):
                attached = True
                break
        if attached:
            inc = [radius[t] for t in tri.edge_triangles[e] if t >= 0]
            edge_vals[e] = min(inc)
    radius = np.maximum(radius, edge_vals[tri.triangle_edges].max(axis=1))
    return Filtration(tri, edge_vals, radius)


# ---------------------------------------------------------------------------
# persistence


@dataclass
class PersistenceDiagram:
    """Finite (birth, death) pairs per dimension plus the essential H0 class.

    Zero-length H1 pairs (a hole filled at the instant it forms) are left
    out; they carry no landscape mass.
    """

    pairs_h0: np.ndarray
    pairs_h1: np.ndarray
    essential_h0: list[float]
    index_pairs: dict = field(default_factory=dict, repr=False)

    def pairs(self, dimension: int) -> np.ndarray:
        if dimension == 0:
            return self.pairs_h0
        if dimension == 1:
            return self.pairs_h1
        raise TDAError(f"only dimensions 0 and 1 exist in the plane, got {dimension}")

    @property
    def max_death(self) -> float:
        deaths = [p[:, 1].max() for p in (self.pairs_h0, self.pairs_h1) if len(p)]
        return float(max(deaths)) if deaths else 0.0

    def to_rows(self) -> list[tuple[int, float, float]]:
        rows = [(0, float(b), float(d)) for b, d in self.pairs_h0]
        rows += [(0, 0.0, math.inf) for _ in self.essential_h0]
        rows += [(1, float(b), float(d)) for b, d in self.pairs_h1]
        return rows


def persistence_pairs(filt: Filtration, backend=None) -> PersistenceDiagram:
    """Persistence pairs of an alpha filtration (H0 and H1)."""
    filt.check_monotone()
    tri = filt.triangulation
    kern = backend if backend is not None else _kernels
    h0e, h1e, h1t = kern.persistence_pairs_2d(
        int(filt.n_vertices),
        np.ascontiguousarray(tri.edges, dtype=np.int64).reshape(-1, 2),
        np.ascontiguousarray(tri.edge_triangles, dtype=np.int64).reshape(-1, 2),
        int(len(tri.triangles)),
        np.ascontiguousarray(filt.order[:, 0], dtype=np.int64),
        np.ascontiguousarray(filt.order[:, 1], dtype=np.int64),
    )
    d0 = filt.edge_values[h0e]
    h0 = np.column_stack([np.zeros(len(d0)), d0])
    h0 = h0[np.argsort(h0[:, 1], kind="stable")]
    b1 = filt.edge_values[h1e]
    d1 = filt.triangle_values[h1t]
    keep = d1 > b1
    h1 = np.column_stack([b1[keep], d1[keep]]).reshape(-1, 2)
    h1 = h1[np.lexsort((h1[:, 0], h1[:, 1]))]
    essential = [0.0] if filt.n_vertices else []
    return PersistenceDiagram(h0, h1, essential,
                              {"h0_edges": h0e, "h1_edges": h1e, "h1_triangles": h1t})


def diagram_from_points(points) -> PersistenceDiagram:
    return persistence_pairs(alpha_filtration(points))


def betti_curve(filt: Filtration, diag: PersistenceDiagram) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Betti numbers after each insertion step, from the index pairing.

    Step 0 is the moment all vertices are in; step ``i`` follows the
    ``i``-th edge or triangle. Returns ``(beta0, beta1, euler)`` where
    ``euler`` is ``V - E + T`` of the current complex. Zero-length pairs
    count here: they are real (if instantaneous) births and deaths.
    """
    n = filt.n_vertices
    steps = len(filt.order)
    negative = np.zeros(len(filt.edge_values), dtype=bool)
    negative[diag.index_pairs["h0_edges"]] = True
    killer = np.zeros(len(filt.triangle_values), dtype=bool)
    killer[diag.index_pairs["h1_triangles"]] = True
    b0 = np.empty(steps + 1, dtype=np.int64)
    b1 = np.empty(steps + 1, dtype=np.int64)
    chi = np.empty(steps + 1, dtype=np.int64)
    b0[0], b1[0], chi[0] = n, 0, n
    for i, (dim, idx) in enumerate(filt.order, start=1):
        b0[i], b1[i], chi[i] = b0[i - 1], b1[i - 1], chi[i - 1]
        if dim == 1:
            chi[i] -= 1
            if negative[idx]:
                b0[i] -= 1
            else:
                b1[i] += 1
        else:
            chi[i] += 1
            if killer[idx]:
                b1[i] -= 1
            else:
                # a triangle that kills nothing would create a 2-cycle
                b1[i] += 10**9
    return b0, b1, chi


# ---------------------------------------------------------------------------
# landscapes


@dataclass
class Landscape:
    """Persistence landscape ``lambda(k, t)`` for ``k = 1..K``.

    ``ts[k-1]`` and ``vals[k-1]`` are the breakpoints of level ``k``; the
    function is linear in between and zero outside. ``domain_end`` is the
    integration end ``T``.
    """

    ts: list[np.ndarray]
    vals: list[np.ndarray]
    domain_end: float = 0.0

    @property
    def n_levels(self) -> int:
        return len(self.ts)

    def evaluate(self, k: int, t) -> np.ndarray:
        """Value of level ``k`` (1-based) at ``t``; zero beyond ``K``."""
        t = np.asarray(t, dtype=float)
        if k < 1 or k > self.n_levels:
            return np.zeros_like(t)
        return np.interp(t, self.ts[k - 1], self.vals[k - 1], left=0.0, right=0.0)

    def scaled(self, c: float) -> "Landscape":
        return Landscape([t.copy() for t in self.ts], [c * v for v in self.vals], self.domain_end)

    def to_rows(self) -> list[tuple[int, float, float]]:
        return [(k + 1, float(t), float(v))
                for k in range(self.n_levels) for t, v in zip(self.ts[k], self.vals[k])]


def _compress(t: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop breakpoints inside linear runs and inside zero stretches."""
    if len(t) <= 2:
        return t, v
    tol = 1e-12 * max(float(np.abs(v).max()), 1e-300)
    keep = np.ones(len(t), dtype=bool)
    # an interior point is redundant when its neighbours' chord passes through it
    lin = np.abs(v[1:-1] - (v[:-2] + (v[2:] - v[:-2]) * (t[1:-1] - t[:-2]) / (t[2:] - t[:-2]))) <= tol
    keep[1:-1] = ~lin
    return t[keep], v[keep]


def landscape_from_diagram(diag, dimension: int | None = None, T: float | None = None) -> Landscape:
    """Exact landscape of the finite pairs of ``diag`` in one dimension.

    Between consecutive points of the set ``{b_i, d_i, (b_i + d_i)/2,
    (b_i + d_j)/2}`` no two tents cross and none has a kink, so the k-th
    largest tent is linear there; evaluating at those abscissae and
    interpolating is exact.
    """
    if isinstance(diag, PersistenceDiagram):
        if dimension is None:
            raise TDAError("dimension is required with a PersistenceDiagram")
        pairs = diag.pairs(dimension)
    else:
        pairs = np.asarray(diag, dtype=float).reshape(-1, 2)
    pairs = pairs[np.isfinite(pairs[:, 1]) & (pairs[:, 1] > pairs[:, 0])]
    max_death = float(pairs[:, 1].max()) if len(pairs) else 0.0
    if T is None:
        T = max_death
    if len(pairs) == 0:
        return Landscape([], [], float(T))
    b, d = pairs[:, 0], pairs[:, 1]
    mid = 0.5 * (b + d)
    cross = 0.5 * (b[:, None] + d[None, :])
    ok = (cross >= b[:, None]) & (cross <= mid[:, None]) & (cross >= mid[None, :]) & (cross <= d[None, :])
    cand = np.unique(np.concatenate([b, d, mid, cross[ok]]))
    m = len(pairs)
    vals = np.empty((len(cand), m))
    for start in range(0, len(cand), 4096):
        tc = cand[start:start + 4096, None]
        vals[start:start + 4096] = np.maximum(0.0, np.minimum(tc - b, d - tc))
    vals = -np.sort(-vals, axis=1)
    ts, vs = [], []
    for k in range(m):
        col = vals[:, k]
        nz = np.flatnonzero(col > 0)
        if len(nz) == 0:
            break
        lo, hi = max(nz[0] - 1, 0), min(nz[-1] + 1, len(cand) - 1)
        t_k, v_k = _compress(cand[lo:hi + 1], col[lo:hi + 1])
        ts.append(t_k)
        vs.append(v_k)
    return Landscape(ts, vs, float(T))


def _kinks(t: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Slope changes of a piecewise-linear function that is zero at both ends."""
    slope = np.diff(v) / np.diff(t)
    dslope = np.empty(len(t))
    dslope[0] = slope[0]
    dslope[1:-1] = np.diff(slope)
    dslope[-1] = -slope[-1]
    return t, dslope


def mean_landscape(landscapes: Sequence[Landscape], weights: Sequence[float] | None = None) -> Landscape:
    """Pointwise (weighted) mean; missing levels count as zero functions.

    The mean is assembled from the slope changes of all inputs, so it is
    exact on the union of their breakpoints.
    """
    if len(landscapes) == 0:
        raise TDAError("mean of an empty set of landscapes")
    w = np.ones(len(landscapes)) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()
    K = max(L.n_levels for L in landscapes)
    T = max(L.domain_end for L in landscapes)
    ts, vs = [], []
    for k in range(K):
        kt, ks = [], []
        for L, wi in zip(landscapes, w):
            if k < L.n_levels and wi != 0.0:
                t, ds = _kinks(L.ts[k], L.vals[k])
                kt.append(t)
                ks.append(wi * ds)
        if not kt:
            ts.append(np.array([0.0, 0.0]))
            vs.append(np.zeros(2))
            continue
        t_all = np.concatenate(kt)
        s_all = np.concatenate(ks)
        grid, inv = np.unique(t_all, return_inverse=True)
        dslope = np.bincount(inv.reshape(-1), weights=s_all, minlength=len(grid))
        slope = np.cumsum(dslope)[:-1]
        vals = np.concatenate([[0.0], np.cumsum(slope * np.diff(grid))])
        vals[-1] = 0.0
        vals = np.maximum(vals, 0.0)
        t_k, v_k = _compress(grid, vals)
        ts.append(t_k)
        vs.append(v_k)
    return Landscape(ts, vs, float(T))


def _seg_sq_integral(t: np.ndarray, e: np.ndarray) -> float:
    dt = np.diff(t)
    e0, e1 = e[:-1], e[1:]
    return float(np.sum(dt * (e0 * e0 + e0 * e1 + e1 * e1)) / 3.0)


def landscape_l2_distance(a: Landscape, b: Landscape, T: float | None = None,
                          k_max: int | None = None) -> float:
    """``[sum_k int_0^T (a(k,t) - b(k,t))^2 dt]^(1/2)``, integrated exactly.

    ``T`` defaults to the larger ``domain_end`` of the two; ``k_max`` caps
    the number of levels summed.
    """
    if T is None:
        T = max(a.domain_end, b.domain_end)
    K = max(a.n_levels, b.n_levels)
    if k_max is not None:
        K = min(K, k_max)
    total = 0.0
    for k in range(1, K + 1):
        parts = [np.array([0.0, T])]
        if k <= a.n_levels:
            parts.append(a.ts[k - 1])
        if k <= b.n_levels:
            parts.append(b.ts[k - 1])
        grid = np.unique(np.concatenate(parts))
        grid = grid[(grid >= 0.0) & (grid <= T)]
        if len(grid) < 2:
            continue
        e = a.evaluate(k, grid) - b.evaluate(k, grid)
        total += _seg_sq_integral(grid, e)
    return math.sqrt(max(total, 0.0))


class LandscapeIntegrals:
    """Precomputed moments of a fixed landscape for fast distances to it.

    ``distance(L)`` equals ``landscape_l2_distance(L, self.base)`` with ``T``
    covering both supports; the cross term is integrated segment by segment
    against cumulative moments of the base.
    """

    def __init__(self, base: Landscape):
        self.base = base
        self._cum = []
        sq = 0.0
        for t, v in zip(base.ts, base.vals):
            dt = np.diff(t)
            s = np.diff(v) / np.where(dt > 0, dt, 1.0)
            # int_{t_j}^{t_{j+1}} g and int t g on each segment
            i0 = v[:-1] * dt + s * dt * dt / 2
            i1 = t[:-1] * v[:-1] * dt + (t[:-1] * s + v[:-1]) * dt * dt / 2 + s * dt ** 3 / 3
            self._cum.append((t, v, s, np.concatenate([[0.0], np.cumsum(i0)]),
                              np.concatenate([[0.0], np.cumsum(i1)])))
            sq += _seg_sq_integral(t, v)
        self.norm_sq = sq

    def _moments_at(self, k: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        t, v, s, c0, c1 = self._cum[k]
        x = np.clip(x, t[0], t[-1])
        j = np.clip(np.searchsorted(t, x, side="right") - 1, 0, len(t) - 2)
        dx = x - t[j]
        tj, vj, sj = t[j], v[j], s[j]
        m0 = c0[j] + vj * dx + sj * dx * dx / 2
        m1 = c1[j] + tj * vj * dx + (tj * sj + vj) * dx * dx / 2 + sj * dx ** 3 / 3
        return m0, m1

    def inner(self, L: Landscape) -> float:
        total = 0.0
        for k in range(min(L.n_levels, len(self._cum))):
            t, v = L.ts[k], L.vals[k]
            if len(self._cum[k][0]) < 2:
                continue
            dt = np.diff(t)
            good = dt > 0
            beta = np.zeros_like(dt)
            beta[good] = np.diff(v)[good] / dt[good]
            alpha = v[:-1] - beta * t[:-1]
            m0, m1 = self._moments_at(k, t)
            total += float(np.sum(alpha * np.diff(m0) + beta * np.diff(m1)))
        return total

    def distance(self, L: Landscape) -> float:
        """Distance via ``|L|^2 - 2<L, base> + |base|^2``.

        The expansion loses absolute accuracy of order ``1e-8 * |L|``;
        squared distances inside that rounding band are reported as 0.
        """
        own = sum(_seg_sq_integral(t, v) for t, v in zip(L.ts, L.vals))
        sq = own - 2.0 * self.inner(L) + self.norm_sq
        if sq <= 64 * _EPS * (own + self.norm_sq):
            return 0.0
        return math.sqrt(sq)


# ---------------------------------------------------------------------------
# export


def write_diagram_csv(diag: PersistenceDiagram, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dimension", "birth", "death"])
        for row in diag.to_rows():
            w.writerow([row[0], repr(row[1]), repr(row[2])])


def write_landscape_csv(land: Landscape, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "t", "value"])
        for k, t, v in land.to_rows():
            w.writerow([k, repr(t), repr(v)])


def read_points_csv(path) -> np.ndarray:
    """Two-column point file; a non-numeric first row is taken as a header."""
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                rows.append([float(row[0]), float(row[1])])
            except ValueError:
                if i == 0:
                    continue
                raise TDAError(f"bad point row {i + 1}: {row}") from None
    return np.asarray(rows, dtype=float).reshape(-1, 2)

