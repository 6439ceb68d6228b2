"""Pure-Python versions of the hot kernels.

Semantics are identical to ``_core.pyx``; the compiled module is preferred
when it imports (see ``_kernels``).
"""

from __future__ import annotations

import numpy as np

# Edge labels for the four sides of the starting rectangle.
BOTTOM, RIGHT, TOP, LEFT = -1, -2, -3, -4


def _clip(xs, ys, labs, ax, ay, b, lab_new):
    """Clip polygon to ``ax*x + ay*y <= b``, labelling the new edge ``lab_new``."""
    m = len(xs)
    s = [ax * xs[k] + ay * ys[k] - b for k in range(m)]
    if max(s) <= 0.0:
        return xs, ys, labs
    if min(s) > 0.0:
        return [], [], []
    ox, oy, ol = [], [], []
    for k in range(m):
        k1 = k + 1 if k + 1 < m else 0
        sc, sn = s[k], s[k1]
        cin = sc <= 0.0
        if cin:
            ox.append(xs[k])
            oy.append(ys[k])
            ol.append(labs[k])
        if cin != (sn <= 0.0):
            t = sc / (sc - sn)
            ox.append(xs[k] + t * (xs[k1] - xs[k]))
            oy.append(ys[k] + t * (ys[k1] - ys[k]))
            ol.append(lab_new if cin else labs[k])
    return ox, oy, ol


def _tidy(xs, ys, labs, eps):
    """Drop vertices closer than ``eps`` to their predecessor."""
    changed = True
    while changed and len(xs) >= 3:
        changed = False
        m = len(xs)
        for k in range(m):
            k1 = k + 1 if k + 1 < m else 0
            if abs(xs[k1] - xs[k]) <= eps and abs(ys[k1] - ys[k]) <= eps:
                # merge k1 into k; the surviving edge leaves k with k1's label
                labs[k] = labs[k1]
                del xs[k1], ys[k1], labs[k1]
                changed = True
                break
    return xs, ys, labs


def _area2(xs, ys):
    m = len(xs)
    acc = 0.0
    for k in range(m):
        k1 = k + 1 if k + 1 < m else 0
        acc += xs[k] * ys[k1] - xs[k1] * ys[k]
    return acc


def clip_power_cells(px, py, pw, sites, nbr_ptr, nbr_idx, labels, rect):
    """Power cells of ``sites`` clipped to ``rect``.

    Cell of site i is ``rect`` intersected with the half-planes
    ``|x - p_i|^2 + w_i <= |x - p_j|^2 + w_j`` for every listed neighbour j.
    Returns ``(cell_site, ptr, vx, vy, vlab)`` in flat CSR form; empty cells
    are skipped.
    """
    x0, y0, x1, y1 = (float(v) for v in rect)
    eps = 1e-13 * max(x1 - x0, y1 - y0)
    cell_site, ptr, vx, vy, vlab = [], [0], [], [], []
    for s, i in enumerate(sites):
        i = int(i)
        cx, cy, cw = float(px[i]), float(py[i]), float(pw[i])
        xs = [x0 - cx, x1 - cx, x1 - cx, x0 - cx]
        ys = [y0 - cy, y0 - cy, y1 - cy, y1 - cy]
        labs = [BOTTOM, RIGHT, TOP, LEFT]
        for q in range(int(nbr_ptr[s]), int(nbr_ptr[s + 1])):
            j = int(nbr_idx[q])
            ax = float(px[j]) - cx
            ay = float(py[j]) - cy
            b = 0.5 * (ax * ax + ay * ay + float(pw[j]) - cw)
            xs, ys, labs = _clip(xs, ys, labs, ax, ay, b, int(labels[j]))
            if not xs:
                break
        if len(xs) < 3:
            continue
        xs, ys, labs = _tidy(xs, ys, labs, eps)
        if len(xs) < 3 or _area2(xs, ys) <= 0.0:
            continue
        cell_site.append(i)
        vx.extend(x + cx for x in xs)
        vy.extend(y + cy for y in ys)
        vlab.extend(labs)
        ptr.append(len(vx))
    return (
        np.asarray(cell_site, dtype=np.int64),
        np.asarray(ptr, dtype=np.int64),
        np.asarray(vx, dtype=np.float64),
        np.asarray(vy, dtype=np.float64),
        np.asarray(vlab, dtype=np.int64),
    )


def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def persistence_pairs_2d(n_vertices, edge_v, edge_t, n_triangles, order_dim, order_idx):
    """Index-level persistence pairing of a filtered planar complex.

    ``order_dim``/``order_idx`` list the edges (dim 1) and triangles (dim 2) in
    filtration order. ``edge_t`` holds the two triangles incident to each
    edge, ``-1`` meaning the outer face. H0 comes from union-find on the
    vertices; H1 from union-find on the dual graph swept in reverse order,
    where merging two dual components kills the younger one.

    Returns ``(h0_edges, h1_edges, h1_tris)``.
    """
    parent = list(range(n_vertices))
    h0 = []
    negative = set()
    for dim, idx in zip(order_dim, order_idx):
        if dim != 1:
            continue
        ra = _find(parent, int(edge_v[idx, 0]))
        rb = _find(parent, int(edge_v[idx, 1]))
        if ra != rb:
            parent[rb] = ra
            h0.append(int(idx))
            negative.add(int(idx))

    outer = n_triangles
    dparent = list(range(n_triangles + 1))
    # component key: forward position of its oldest (last-added) triangle
    key = [-1] * (n_triangles + 1)
    key[outer] = len(order_dim) + 1
    h1e, h1t = [], []
    for pos in range(len(order_dim) - 1, -1, -1):
        dim, idx = order_dim[pos], int(order_idx[pos])
        if dim == 2:
            key[idx] = pos
            continue
        if idx in negative:
            continue
        ta, tb = int(edge_t[idx, 0]), int(edge_t[idx, 1])
        ta = outer if ta < 0 else ta
        tb = outer if tb < 0 else tb
        ra, rb = _find(dparent, ta), _find(dparent, tb)
        if ra == rb:
            continue
        if key[ra] < key[rb]:
            ra, rb = rb, ra
        # rb is younger; as a root it is its own oldest triangle
        h1e.append(idx)
        h1t.append(rb)
        dparent[rb] = ra
    return (
        np.asarray(h0, dtype=np.int64),
        np.asarray(h1e, dtype=np.int64),
        np.asarray(h1t, dtype=np.int64),
    )

