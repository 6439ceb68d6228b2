# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: power-cell clipping and planar persistence pairing.

Mirrors ``_fallback.py`` operation for operation.
"""

import numpy as np
cimport numpy as cnp
from libcpp.vector cimport vector

cnp.import_array()

cdef enum:
    BOTTOM = -1
    RIGHT = -2
    TOP = -3
    LEFT = -4


cdef int _clip(vector[double]& xs, vector[double]& ys, vector[long]& labs,
               vector[double]& ox, vector[double]& oy, vector[long]& ol,
               vector[double]& s, double ax, double ay, double b, long lab_new):
    """Clip in place; returns the new vertex count."""
    cdef Py_ssize_t m = xs.size(), k, k1
    cdef double smax = -1e308, smin = 1e308, sc, sn, t
    cdef bint cin
    s.resize(m)
    for k in range(m):
        s[k] = ax * xs[k] + ay * ys[k] - b
        if s[k] > smax:
            smax = s[k]
        if s[k] < smin:
            smin = s[k]
    if smax <= 0.0:
        return <int>m
    if smin > 0.0:
        xs.clear(); ys.clear(); labs.clear()
        return 0
    ox.clear(); oy.clear(); ol.clear()
    for k in range(m):
        k1 = k + 1 if k + 1 < m else 0
        sc = s[k]
        sn = s[k1]
        cin = sc <= 0.0
        if cin:
            ox.push_back(xs[k]); oy.push_back(ys[k]); ol.push_back(labs[k])
        if cin != (sn <= 0.0):
            t = sc / (sc - sn)
            ox.push_back(xs[k] + t * (xs[k1] - xs[k]))
            oy.push_back(ys[k] + t * (ys[k1] - ys[k]))
            ol.push_back(lab_new if cin else labs[k])
    xs.swap(ox); ys.swap(oy); labs.swap(ol)
    return <int>xs.size()


cdef void _tidy(vector[double]& xs, vector[double]& ys, vector[long]& labs, double eps):
    cdef bint changed = True
    cdef Py_ssize_t m, k, k1
    while changed and xs.size() >= 3:
        changed = False
        m = xs.size()
        for k in range(m):
            k1 = k + 1 if k + 1 < m else 0
            if abs(xs[k1] - xs[k]) <= eps and abs(ys[k1] - ys[k]) <= eps:
                labs[k] = labs[k1]
                xs.erase(xs.begin() + k1)
                ys.erase(ys.begin() + k1)
                labs.erase(labs.begin() + k1)
                changed = True
                break


cdef double _area2(vector[double]& xs, vector[double]& ys):
    cdef Py_ssize_t m = xs.size(), k, k1
    cdef double acc = 0.0
    for k in range(m):
        k1 = k + 1 if k + 1 < m else 0
        acc += xs[k] * ys[k1] - xs[k1] * ys[k]
    return acc


def clip_power_cells(const double[::1] px, const double[::1] py, const double[::1] pw,
                     const long[::1] sites, const long[::1] nbr_ptr,
                     const long[::1] nbr_idx, const long[::1] labels, rect):
    cdef double x0 = rect[0], y0 = rect[1], x1 = rect[2], y1 = rect[3]
    cdef double eps = 1e-13 * max(x1 - x0, y1 - y0)
    cdef vector[double] xs, ys, ox, oy, s
    cdef vector[long] labs, ol
    cdef vector[long] cell_site, ptr, vlab
    cdef vector[double] vx, vy
    cdef Py_ssize_t si, q, k, nsites = sites.shape[0]
    cdef long i, j
    cdef double cx, cy, cw, ax, ay, b
    ptr.push_back(0)
    for si in range(nsites):
        i = sites[si]
        cx = px[i]; cy = py[i]; cw = pw[i]
        xs.clear(); ys.clear(); labs.clear()
        xs.push_back(x0 - cx); ys.push_back(y0 - cy); labs.push_back(BOTTOM)
        xs.push_back(x1 - cx); ys.push_back(y0 - cy); labs.push_back(RIGHT)
        xs.push_back(x1 - cx); ys.push_back(y1 - cy); labs.push_back(TOP)
        xs.push_back(x0 - cx); ys.push_back(y1 - cy); labs.push_back(LEFT)
        for q in range(nbr_ptr[si], nbr_ptr[si + 1]):
            j = nbr_idx[q]
            ax = px[j] - cx
            ay = py[j] - cy
            b = 0.5 * (ax * ax + ay * ay + pw[j] - cw)
            if _clip(xs, ys, labs, ox, oy, ol, s, ax, ay, b, labels[j]) == 0:
                break
        if xs.size() < 3:
            continue
        _tidy(xs, ys, labs, eps)
        if xs.size() < 3 or _area2(xs, ys) <= 0.0:
            continue
        cell_site.push_back(i)
        for k in range(<Py_ssize_t>xs.size()):
            vx.push_back(xs[k] + cx)
            vy.push_back(ys[k] + cy)
            vlab.push_back(labs[k])
        ptr.push_back(vx.size())
    return (_lvec(cell_site), _lvec(ptr), _dvec(vx), _dvec(vy), _lvec(vlab))


cdef object _lvec(vector[long]& v):
    cdef Py_ssize_t k, n = v.size()
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    for k in range(n):
        o[k] = v[k]
    return out


cdef object _dvec(vector[double]& v):
    cdef Py_ssize_t k, n = v.size()
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for k in range(n):
        o[k] = v[k]
    return out


cdef inline long _find(long* parent, long x) noexcept nogil:
    cdef long root = x, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def persistence_pairs_2d(long n_vertices, const long[:, ::1] edge_v, const long[:, ::1] edge_t,
                         long n_triangles, const long[::1] order_dim, const long[::1] order_idx):
    cdef Py_ssize_t n_order = order_dim.shape[0], pos
    cdef long n_edges = edge_v.shape[0]
    cdef vector[long] parent, dparent, key, h0, h1e, h1t
    cdef vector[char] negative
    cdef long idx, ra, rb, ta, tb, tmp, outer = n_triangles
    parent.resize(n_vertices)
    for idx in range(n_vertices):
        parent[idx] = idx
    negative.assign(n_edges, 0)
    for pos in range(n_order):
        if order_dim[pos] != 1:
            continue
        idx = order_idx[pos]
        ra = _find(parent.data(), edge_v[idx, 0])
        rb = _find(parent.data(), edge_v[idx, 1])
        if ra != rb:
            parent[rb] = ra
            h0.push_back(idx)
            negative[idx] = 1

    dparent.resize(n_triangles + 1)
    key.assign(n_triangles + 1, -1)
    for idx in range(n_triangles + 1):
        dparent[idx] = idx
    key[outer] = n_order + 1
    for pos in range(n_order - 1, -1, -1):
        idx = order_idx[pos]
        if order_dim[pos] == 2:
            key[idx] = pos
            continue
        if negative[idx]:
            continue
        ta = edge_t[idx, 0]
        tb = edge_t[idx, 1]
        if ta < 0:
            ta = outer
        if tb < 0:
            tb = outer
        ra = _find(dparent.data(), ta)
        rb = _find(dparent.data(), tb)
        if ra == rb:
            continue
        if key[ra] < key[rb]:
            tmp = ra; ra = rb; rb = tmp
        h1e.push_back(idx)
        h1t.push_back(rb)
        dparent[rb] = ra
    return _lvec(h0), _lvec(h1e), _lvec(h1t)
