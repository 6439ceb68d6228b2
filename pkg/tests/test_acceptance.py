"""Exit criteria. Each test prints one PASS/FAIL line before asserting.

These runs take several minutes in total; select them with ``-m acceptance``
or skip them with ``-m "not acceptance"``.
"""

import math

import numpy as np
import pytest

from oracles import edge_distance, kruskal_half_lengths, landscape_grid
from pvtest import nulldist as nd
from pvtest import stereology as sg
from pvtest import tda
from pvtest import teststats as ts
from pvtest.geometry import (BoxGeometry, SectionPlane, brute_force_section_oracle, random_axis_plane,
                             sample_fixed_generators, section_tessellation, simulate_section)
from pvtest.seeding import child_seed

pytestmark = pytest.mark.acceptance

# bounded 10 x 10 x 10 box with 10 x 10 sections, intensity 0.2, conditioned on 50 cells
NULL_BOX = BoxGeometry.cube(10.0, "bounded")
NULL_LAMBDA = 0.2
NULL_N2D = 50
NULL_REPLICATES = 80_000
NULL_SEED = 20240


@pytest.fixture
def report(capsys):
    def _report(number, ok, detail):
        with capsys.disabled():
            print(f"\nAC{number:<2} {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
        assert ok, detail

    return _report


@pytest.fixture(scope="session")
def null_tables():
    return nd.build_null_tables(["C", "D", "L0", "L1"], NULL_N2D, NULL_LAMBDA, NULL_BOX,
                                NULL_REPLICATES, seed=NULL_SEED)


def _within(x, target, tol):
    return abs(x - target) <= tol


# ---------------------------------------------------------------------------
# 1. moments of sectional cells


def test_ac01_moments(report):
    box = BoxGeometry.cube(10.0, "periodic")
    areas, perims, edges = [], [], []
    s = 0
    while len(areas) < 100_000:
        tess = simulate_section(box, lam=1.0, seed=child_seed(1, 0, s))
        for m in tess.metrics():
            areas.append(m.area)
            perims.append(m.perimeter)
            edges.append(m.n_edges)
        s += 1
    a = np.array(areas)
    got = {"mean area": a.mean(), "mean perimeter": np.mean(perims), "mean edges": np.mean(edges),
           "area 2nd moment": np.mean(a * a), "area sd": a.std(ddof=1)}
    want = {"mean area": (0.686, 0.005), "mean perimeter": (3.136, 0.02), "mean edges": (6.0, 0.05),
            "area 2nd moment": (0.699, 0.01), "area sd": (0.4734, 0.005)}
    ok = all(_within(got[k], *want[k]) for k in want)
    detail = f"{len(a)} cells from {s} sections; " + ", ".join(
        f"{k} {got[k]:.4f} (target {want[k][0]} +- {want[k][1]})" for k in want)
    report(1, ok, detail)


# ---------------------------------------------------------------------------
# 2. estimator bias near 50 cells


def test_ac02_estimator_bias(report):
    # a periodic cube whose faces hold 50 cells on average at unit intensity
    side = math.sqrt(50 * 0.686)
    box = BoxGeometry.cube(side, "periodic")
    vals = {m: [] for m in sg.METHODS}
    ns = []
    for i in range(10_000):
        tess = simulate_section(box, lam=1.0, seed=child_seed(2, 0, i))
        ns.append(tess.n_2d)
        est = sg.estimate_all(sg.summarize_section(tess))
        for m in sg.METHODS:
            vals[m].append(est[m].value)
    bias = {m: np.mean(v) - 1.0 for m, v in vals.items()}
    ok = all(abs(b) < 0.01 for b in bias.values())
    detail = f"10000 sections, mean {np.mean(ns):.1f} cells; " + ", ".join(
        f"bias_{m} {b:+.4f}" for m, b in bias.items()) + " (limit 0.01)"
    report(2, ok, detail)


# ---------------------------------------------------------------------------
# 3, 4. conditional null quantiles


def test_ac03_cv_quantiles(report, null_tables):
    t = null_tables["C"]
    q05, q95 = t.quantile(0.05), t.quantile(0.95)
    ok = _within(q05, 0.591, 0.01) and _within(q95, 0.826, 0.01)
    report(3, ok, f"c0.05 {q05:.4f} (target 0.591), c0.95 {q95:.4f} (target 0.826), tol 0.01; "
                  f"{t.diagnostics['retained']} retained of {t.diagnostics['simulated']}, ESS {t.ess:.0f}")


def test_ac04_ks_quantile(report, null_tables):
    t = null_tables["D"]
    q95 = t.quantile(0.95)
    ok = _within(q95, 0.135, 0.01)
    report(4, ok, f"d0.95 {q95:.4f} (target 0.135 +- 0.01) from leave-one-out over {len(t.values)} replicates")


# ---------------------------------------------------------------------------
# 5. bootstrap interval


def test_ac05_bootstrap_ci(report):
    ci = nd.bootstrap_ci_lambda(0.2, BoxGeometry.cube(10.0, "periodic"), n_boot=10_000, seed=5)
    ok = _within(ci.lower, 0.1498, 0.01) and _within(ci.upper, 0.2439, 0.01)
    report(5, ok, f"[{ci.lower:.4f}, {ci.upper:.4f}] vs [0.1498, 0.2439] +- 0.01 ({ci.n_boot} resimulations)")


# ---------------------------------------------------------------------------
# 6-8. persistence and landscapes


def test_ac06_h0_equals_mst(report):
    bad = 0
    for s in range(100):
        pts = np.random.default_rng(600 + s).random((100, 2))
        deaths = tda.diagram_from_points(pts).pairs_h0[:, 1]
        bad += not np.array_equal(np.sort(deaths), kruskal_half_lengths(pts))
    report(6, bad == 0, f"{100 - bad}/100 clouds of 100 points with bitwise-equal H0 deaths and MST half-lengths")


def _components_by_step(filt):
    parent = list(range(filt.n_vertices))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    count = filt.n_vertices
    out = [count]
    for dim, idx in filt.order:
        if dim == 1:
            a, b = (find(int(v)) for v in filt.triangulation.edges[idx])
            if a != b:
                parent[a] = b
                count -= 1
        out.append(count)
    return np.array(out)


def test_ac07_euler_characteristic(report):
    bad = 0
    steps = 0
    for s in range(100):
        pts = np.random.default_rng(700 + s).random((100, 2))
        f = tda.alpha_filtration(pts)
        b0, b1, chi = tda.betti_curve(f, tda.persistence_pairs(f))
        # chi counted directly from the simplices present after each step
        dims = np.array([d for d, _ in f.order])
        direct = f.n_vertices - np.concatenate([[0], np.cumsum(dims == 1)]) + np.concatenate([[0], np.cumsum(dims == 2)])
        ok = (np.array_equal(chi, direct) and np.array_equal(b0 - b1, direct)
              and np.array_equal(b0, _components_by_step(f)) and np.all(b1 >= 0))
        bad += not ok
        steps += len(chi)
    report(7, bad == 0, f"{100 - bad}/100 clouds satisfy V - E + F = b0 - b1 at all {steps} filtration steps")


def test_ac08_landscape_oracles(report):
    rng = np.random.default_rng(800)
    worst_grid = 0.0
    for s in range(20):
        pts = rng.random((60, 2))
        diag = tda.diagram_from_points(pts)
        for dim in (0, 1):
            pairs = diag.pairs(dim)
            pairs = pairs[np.isfinite(pairs[:, 1])]
            L = tda.landscape_from_diagram(pairs)
            K = max(L.n_levels, 1)
            t = np.linspace(0.0, max(L.domain_end, 1e-3) * 1.05, 20001)
            got = np.array([L.evaluate(k, t) for k in range(1, K + 1)])
            worst_grid = max(worst_grid, float(np.max(np.abs(got - landscape_grid(pairs, t, K)))))
    worst_rel = 0.0
    n = 10**6
    for s in range(5):
        a = tda.landscape_from_diagram(tda.diagram_from_points(rng.random((50, 2))), 1)
        b = tda.landscape_from_diagram(tda.diagram_from_points(rng.random((50, 2))), 1)
        T = max(a.domain_end, b.domain_end)
        t = (np.arange(n) + 0.5) * (T / n)
        sq = sum(np.sum((a.evaluate(k, t) - b.evaluate(k, t)) ** 2) * (T / n)
                 for k in range(1, max(a.n_levels, b.n_levels) + 1))
        exact = tda.landscape_l2_distance(a, b)
        worst_rel = max(worst_rel, abs(exact - math.sqrt(sq)) / math.sqrt(sq))
    ok = worst_grid <= 1e-12 and worst_rel <= 1e-6
    report(8, ok, f"grid sup error {worst_grid:.2e} (limit 1e-12), quadrature relative error {worst_rel:.2e} (limit 1e-6)")


# ---------------------------------------------------------------------------
# 9. sectioning oracle


def _random_instance(s):
    rng = np.random.default_rng(900 + s)
    mode = "periodic" if s % 2 else "bounded"
    box = BoxGeometry.cube(float(rng.uniform(4, 10)), mode)
    gen = sample_fixed_generators(int(rng.integers(5, 80)), box, rng)
    if mode == "bounded" and s % 4 == 0:
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        centre = np.asarray(box.lengths) / 2
        probe = SectionPlane(tuple(n), float(n @ centre), (0.0, 0.0, 1.0, 1.0))
        origin, e1, e2 = probe.basis()
        cu, cv = (centre - origin) @ e1, (centre - origin) @ e2
        half = box.lengths[0] / 3
        plane = SectionPlane(tuple(n), probe.offset, (cu - half, cv - half, cu + half, cv + half))
    else:
        plane = random_axis_plane(box, rng)
    return gen, plane


def test_ac09_sectioning_oracle(report):
    bad = 0
    checked = 0
    for s in range(100):
        gen, plane = _random_instance(s)
        tess = section_tessellation(gen, plane)
        labels, pts = brute_force_section_oracle(gen, plane, 100, return_points=True)
        pts = pts.reshape(-1, 2)
        far = edge_distance(pts, tess) > 1e-9
        got = tess.locate(pts)
        checked += int(far.sum())
        bad += int(np.count_nonzero(got[far] != labels.ravel()[far]))
    report(9, bad == 0, f"{checked - bad}/{checked} grid points agree over 100 instances (10^4 points each)")


# ---------------------------------------------------------------------------
# 10. weighted decomposition vs direct conditioning


def test_ac10_decomposition_consistency(report):
    box = BoxGeometry.cube(2.0, "bounded")
    lam, n2d = 0.4, 3
    table = nd.build_null_table("C", n2d, lam, box, 20_000, seed=10)
    direct = []
    i = 0
    while len(direct) < 4000:
        tess = simulate_section(box, lam=lam, seed=child_seed(1010, 0, i))
        i += 1
        if tess.n_2d == n2d:
            direct.append(ts.cv_statistic(ts.AreaSample(tess.areas())).value)
    direct = np.array(direct)
    worst = 0.0
    parts = []
    for q in (0.25, 0.5, 0.75, 0.9):
        t = float(np.quantile(direct, q))
        p_w = table.p_value(t)
        p_d = float(np.mean(direct >= t))
        sigma = math.sqrt(p_d * (1 - p_d) / len(direct) + p_w * (1 - p_w) / table.ess)
        z = abs(p_w - p_d) / sigma
        worst = max(worst, z)
        parts.append(f"t={t:.3f}: {p_w:.4f} vs {p_d:.4f}")
    report(10, worst <= 3.0, "; ".join(parts) + f"; max |z| {worst:.2f} (limit 3), ESS {table.ess:.0f}, "
                                               f"{len(direct)} direct sections")


# ---------------------------------------------------------------------------
# 11. size of the tests under the null


def test_ac11_calibration(report, null_tables):
    qc = null_tables["C"].quantile(0.95)
    qd = null_tables["D"].quantile(0.95)
    mean_cdf = null_tables["D"].extras["mean_cdf"]
    means = (null_tables["L0"].extras["mean_h0"], null_tables["L1"].extras["mean_h1"])
    q0, q1, _ = nd.joint_thresholds(null_tables["L0"], null_tables["L1"], 0.05)
    rej = {"C": 0, "D": 0, "joint": 0}
    n = 0
    i = 0
    while n < 1500:
        tess = simulate_section(NULL_BOX, lam=NULL_LAMBDA, seed=child_seed(1111, 0, i))
        i += 1
        if tess.n_2d != NULL_N2D:
            continue
        n += 1
        sample = ts.AreaSample(tess.areas())
        rej["C"] += ts.cv_statistic(sample).value > qc
        rej["D"] += ts.ks_statistic_conditional(sample, mean_cdf).value > qd
        l0, l1 = ts.landscape_statistics(ts.centroid_landscapes(tess), means)
        rej["joint"] += ts.joint_landscape_reject(l0.value, l1.value, q0, q1)
    rates = {k: v / n for k, v in rej.items()}
    ok = all(abs(r - 0.05) <= 0.02 for r in rates.values())
    report(11, ok, f"{n} null sections; rejection rates " + ", ".join(f"{k} {r:.4f}" for k, r in rates.items())
           + " (target 0.05 +- 0.02)")
