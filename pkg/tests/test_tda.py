import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pvtest import tda, _kernels
from oracles import boundary_matrix_pairs, kruskal_half_lengths, landscape_grid


def _orient_exact(a, b, c):
    F = lambda p: [Fraction(float(x)) for x in p]  # noqa: E731
    a, b, c = F(a), F(b), F(c)
    d = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return (d > 0) - (d < 0)


def test_orient2d_near_collinear_matches_rational():
    rng = np.random.default_rng(0)
    a, b = np.array([0.5, 0.5]), np.array([12.0, 12.0])
    for _ in range(500):
        c = np.array([24.0, 24.0]) + rng.integers(-3, 4, 2) * 2.0 ** -48
        assert tda.orient2d(a, b, c) == _orient_exact(a, b, c)


def test_incircle_cocircular_is_zero():
    pts = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    assert tda.incircle(*pts) == 0
    assert tda.incircle((1, 0), (0, 1), (-1, 0), (0, 0)) == 1
    assert tda.incircle((1, 0), (0, 1), (-1, 0), (0, -1.0000001)) == -1


def _assert_delaunay(tri):
    pts = tri.points
    for a, b, c in tri.triangles:
        assert tda.orient2d(pts[a], pts[b], pts[c]) == 1
        for v in range(len(pts)):
            if v not in (a, b, c):
                assert tda.incircle(pts[a], pts[b], pts[c], pts[v]) <= 0


def test_delaunay_empty_circumcircle_uniform():
    pts = np.random.default_rng(3).random((200, 2))
    _assert_delaunay(tda.delaunay2(pts))


def test_delaunay_cocircular_grid_tiles_hull():
    g = np.array([(i, j) for i in range(5) for j in range(5)], dtype=float)
    tri = tda.delaunay2(g)
    _assert_delaunay(tri)
    p = tri.points[tri.triangles]
    u, v = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]).sum()
    assert area == pytest.approx(16.0, abs=1e-12)


def test_small_and_collinear_clouds():
    assert len(tda.diagram_from_points(np.empty((0, 2))).pairs_h0) == 0
    d1 = tda.diagram_from_points([[0.0, 0.0]])
    assert len(d1.pairs_h0) == 0 and d1.essential_h0 == [0.0]
    line = np.array([[0, 0], [3, 0], [1, 0], [6, 0]], dtype=float)
    d = tda.diagram_from_points(line)
    assert d.pairs_h0[:, 1].tolist() == [0.5, 1.0, 1.5]
    assert len(d.pairs_h1) == 0


def test_rejects_duplicates_and_nonfinite():
    with pytest.raises(tda.TDAError):
        tda.delaunay2([[0, 0], [1, 1], [0, 0]])
    with pytest.raises(tda.TDAError):
        tda.delaunay2([[0, 0], [np.nan, 1], [2, 0]])


def test_equilateral_triangle_has_one_hole():
    pts = np.array([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]])
    d = tda.diagram_from_points(pts)
    assert d.pairs_h0[:, 1] == pytest.approx([0.5, 0.5])
    assert d.pairs_h1.shape == (1, 2)
    assert d.pairs_h1[0] == pytest.approx([0.5, 1 / math.sqrt(3)])


def test_right_triangle_hole_has_zero_length_and_is_dropped():
    d = tda.diagram_from_points([[0, 0], [1, 0], [0, 1]])
    assert len(d.pairs_h1) == 0
    assert d.pairs_h0[:, 1].tolist() == [0.5, 0.5]


def test_obtuse_long_edge_enters_with_triangle():
    pts = np.array([[0, 0], [2, 0], [1, 0.2]])
    f = tda.alpha_filtration(pts)
    e = [i for i, (a, b) in enumerate(f.triangulation.edges) if {a, b} == {0, 1}][0]
    assert f.edge_values[e] == f.triangle_values[0]
    assert f.triangle_values[0] == pytest.approx(1.04 / 0.4)
    assert len(tda.persistence_pairs(f).pairs_h1) == 0


def test_filtration_monotone_and_sorted():
    f = tda.alpha_filtration(np.random.default_rng(4).random((60, 2)))
    f.check_monotone()
    simp = f.simplices
    keys = [(v, len(s)) for s, v in simp]
    assert keys == sorted(keys)
    assert all(v == 0.0 for s, v in simp if len(s) == 1)


def test_non_monotone_filtration_rejected():
    f = tda.alpha_filtration(np.random.default_rng(5).random((10, 2)))
    f.edge_values[0] = 1e9
    with pytest.raises(tda.TDAError):
        tda.persistence_pairs(f)


@pytest.mark.parametrize("seed", range(10))
def test_h0_deaths_equal_mst(seed):
    pts = np.random.default_rng(seed).random((60, 2))
    d = tda.diagram_from_points(pts)
    assert np.array_equal(d.pairs_h0[:, 1], kruskal_half_lengths(pts))


@pytest.mark.parametrize("seed", range(10))
def test_pairs_match_boundary_matrix_reduction(seed):
    pts = np.random.default_rng(100 + seed).random((30, 2))
    f = tda.alpha_filtration(pts)
    d = tda.persistence_pairs(f)
    ref = boundary_matrix_pairs(f)
    ref_h1 = sorted((b, e) for b, e in ref[1] if e > b)
    assert sorted(map(tuple, d.pairs_h1.tolist())) == ref_h1
    assert sorted(e for _, e in ref[0]) == d.pairs_h0[:, 1].tolist()


def test_backends_agree_on_pairs():
    backends = _kernels.backends()
    if len(backends) < 2:
        pytest.skip("compiled backend not built")
    for seed in range(5):
        f = tda.alpha_filtration(np.random.default_rng(seed).random((80, 2)))
        outs = [tda.persistence_pairs(f, backend=b).index_pairs for b in backends.values()]
        for k in outs[0]:
            assert np.array_equal(outs[0][k], outs[1][k])


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 40), st.integers(0, 10**6))
def test_euler_identity_property(n, seed):
    pts = np.random.default_rng(seed).random((n, 2))
    f = tda.alpha_filtration(pts)
    b0, b1, chi = tda.betti_curve(f, tda.persistence_pairs(f))
    assert np.array_equal(b0 - b1, chi)
    assert b0[-1] == 1 and b1[-1] == 0


# landscapes


def _random_pairs(rng, m):
    b = rng.random(m)
    return np.column_stack([b, b + rng.random(m) * 0.7 + 1e-3])


@pytest.mark.parametrize("seed", range(5))
def test_landscape_matches_dense_grid(seed):
    rng = np.random.default_rng(seed)
    pairs = _random_pairs(rng, 25)
    L = tda.landscape_from_diagram(pairs)
    t = np.linspace(0, 2, 20001)
    ref = landscape_grid(pairs, t, 25)
    got = np.array([L.evaluate(k, t) for k in range(1, 26)])
    assert np.max(np.abs(got - ref)) <= 1e-12


def test_landscape_invariants():
    L = tda.landscape_from_diagram(_random_pairs(np.random.default_rng(9), 30))
    t = np.linspace(0, 2, 5001)
    vals = np.array([L.evaluate(k, t) for k in range(1, L.n_levels + 2)])
    assert np.all(vals >= 0)
    assert np.all(vals[:-1] >= vals[1:] - 1e-15)
    for t_k, v_k in zip(L.ts, L.vals):
        assert np.all(np.abs(np.diff(v_k)) <= np.diff(t_k) * (1 + 1e-12) + 1e-15)


def test_h0_landscape_levels_are_death_tents():
    deaths = np.array([0.3, 0.9, 0.5, 0.1])
    L = tda.landscape_from_diagram(np.column_stack([np.zeros(4), deaths]))
    for k, d in enumerate(sorted(deaths, reverse=True), start=1):
        assert L.ts[k - 1].tolist() == [0.0, d / 2, d]
        assert L.vals[k - 1].tolist() == [0.0, d / 2, 0.0]


def test_empty_diagram_distance_is_norm():
    m = tda.landscape_from_diagram([[0.0, 1.0], [0.2, 0.6]])
    empty = tda.landscape_from_diagram(np.empty((0, 2)))
    norm = math.sqrt(sum(tda._seg_sq_integral(t, v) for t, v in zip(m.ts, m.vals)))
    assert tda.landscape_l2_distance(empty, m) == pytest.approx(norm, rel=1e-14)
    assert tda.landscape_l2_distance(m, m) == 0.0


def test_l2_distance_matches_quadrature():
    rng = np.random.default_rng(11)
    a = tda.landscape_from_diagram(_random_pairs(rng, 15))
    b = tda.landscape_from_diagram(_random_pairs(rng, 12))
    T = max(a.domain_end, b.domain_end)
    n = 10**6
    t = (np.arange(n) + 0.5) * (T / n)
    sq = 0.0
    for k in range(1, 16):
        sq += np.sum((a.evaluate(k, t) - b.evaluate(k, t)) ** 2) * (T / n)
    assert tda.landscape_l2_distance(a, b) == pytest.approx(math.sqrt(sq), rel=1e-6)


def test_mean_landscape_matches_grid_average():
    rng = np.random.default_rng(12)
    lands = [tda.landscape_from_diagram(_random_pairs(rng, int(rng.integers(3, 12)))) for _ in range(20)]
    w = rng.random(20)
    M = tda.mean_landscape(lands, w)
    t = np.linspace(0, 2, 4001)
    for k in range(1, M.n_levels + 1):
        ref = sum(wi * L.evaluate(k, t) for wi, L in zip(w, lands)) / w.sum()
        assert np.max(np.abs(M.evaluate(k, t) - ref)) <= 1e-12


def test_single_mean_is_identity_and_integrals_agree():
    rng = np.random.default_rng(13)
    lands = [tda.landscape_from_diagram(_random_pairs(rng, 10)) for _ in range(30)]
    M = tda.mean_landscape(lands)
    one = tda.mean_landscape(lands[:1])
    assert tda.landscape_l2_distance(one, lands[0]) <= 1e-13
    fast = tda.LandscapeIntegrals(M)
    for L in lands[:10]:
        slow = tda.landscape_l2_distance(L, M)
        assert fast.distance(L) == pytest.approx(slow, rel=1e-9, abs=1e-12)


def test_csv_export(tmp_path):
    d = tda.diagram_from_points(np.random.default_rng(1).random((20, 2)))
    tda.write_diagram_csv(d, tmp_path / "d.csv")
    rows = (tmp_path / "d.csv").read_text().splitlines()
    assert rows[0] == "dimension,birth,death"
    assert len(rows) == 1 + len(d.pairs_h0) + 1 + len(d.pairs_h1)
    L = tda.landscape_from_diagram(d, 0)
    tda.write_landscape_csv(L, tmp_path / "l.csv")
    assert (tmp_path / "l.csv").read_text().startswith("k,t,value")


def test_two_points_at_094():
    d = tda.diagram_from_points([[0.0, 0.0], [0.94, 0.0]])
    assert d.pairs_h0.tolist() == [[0.0, 0.47]]
    assert len(d.pairs_h1) == 0
    L = tda.landscape_from_diagram(d, 0)
    assert L.evaluate(1, [0.235])[0] == pytest.approx(0.235)
    assert L.evaluate(1, [-0.1, 0.5]).tolist() == [0.0, 0.0]


def test_unit_square_has_one_hole():
    d = tda.diagram_from_points([[0, 0], [1, 0], [1, 1], [0, 1]])
    assert d.pairs_h1.shape == (1, 2)
    assert d.pairs_h1[0, 0] == 0.5
    assert d.pairs_h1[0, 1] == pytest.approx(math.sqrt(2) / 2, abs=1e-15)


def test_two_tent_overlap_second_level():
    L = tda.landscape_from_diagram([[0.0, 2.0], [1.0, 3.0]])
    assert L.ts[1].tolist() == [1.0, 1.5, 2.0]
    assert L.vals[1].tolist() == [0.0, 0.5, 0.0]


def test_single_tent_distance_closed_form():
    a = tda.landscape_from_diagram([[0.0, 2.0]])
    empty = tda.landscape_from_diagram(np.empty((0, 2)))
    assert tda.landscape_l2_distance(a, empty) == pytest.approx(math.sqrt(2 / 3), rel=1e-15)


def test_mean_with_zero_landscape_halves():
    a = tda.landscape_from_diagram([[0.0, 2.0], [0.5, 1.5]])
    m = tda.mean_landscape([a, tda.landscape_from_diagram(np.empty((0, 2)))])
    t = np.linspace(0, 2, 101)
    for k in (1, 2):
        assert np.allclose(m.evaluate(k, t), a.evaluate(k, t) / 2, atol=1e-15)


def test_rigid_motion_and_scaling():
    pts = np.random.default_rng(21).random((50, 2))
    d = tda.diagram_from_points(pts)
    th = 0.7
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    d2 = tda.diagram_from_points(pts @ R.T + [3.0, -2.0])
    assert np.allclose(d.pairs_h0, d2.pairs_h0, atol=1e-9)
    assert np.allclose(d.pairs_h1, d2.pairs_h1, atol=1e-9)
    d3 = tda.diagram_from_points(pts * 2.5)
    assert np.allclose(d3.pairs_h1, 2.5 * d.pairs_h1, rtol=1e-12)
