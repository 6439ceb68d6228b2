import math

import numpy as np
import pytest

from pvtest import teststats as ts
from pvtest import tda
from pvtest.geometry import BoxGeometry, simulate_section


def test_cv_hand_values():
    assert ts.cv_statistic(ts.AreaSample([2.0, 2.0, 2.0])).value == 0.0
    assert ts.cv_statistic(ts.AreaSample([1.0, 3.0])).value == pytest.approx(math.sqrt(2) / 2, rel=1e-15)
    with pytest.raises(ts.StatisticError):
        ts.cv_statistic(ts.AreaSample([1.0]))


def test_area_sample_validation():
    with pytest.raises(ts.StatisticError):
        ts.AreaSample([1.0, -2.0])
    with pytest.raises(ts.StatisticError):
        ts.AreaSample([1.0, np.inf])


def test_cv_scale_invariant():
    a = np.random.default_rng(0).gamma(3.0, size=80)
    c = ts.cv_statistic(ts.AreaSample(a)).value
    for s in (1e-3, 7.5, 1e4):
        assert ts.cv_statistic(ts.AreaSample(s * a)).value == pytest.approx(c, abs=1e-12)


def _brute_sup(F, G, lo, hi):
    # evaluate on a grid containing every jump and midpoints between them
    z = np.union1d(F.support, G.support)
    mids = (z[1:] + z[:-1]) / 2
    grid = np.concatenate([z, mids, [lo, hi]])
    return np.max(np.abs(F(grid) - G(grid)))


def test_sup_distance_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(20):
        F = ts.StepCDF.ecdf(rng.random(40))
        G = ts.StepCDF.ecdf(rng.random(25) * 1.2)
        d = ts.sup_distance(F, G)
        assert d == pytest.approx(_brute_sup(F, G, -1, 3), abs=1e-15)
        assert ts.sup_distance_at_sample(F, np.sort(rng.random(1))) <= 1.0
        s = np.sort(rng.random(25) * 1.2)
        assert ts.sup_distance_at_sample(F, s) == pytest.approx(ts.sup_distance(F, ts.StepCDF.ecdf(s)), abs=1e-15)


def test_sup_distance_with_ties():
    F = ts.StepCDF.ecdf([1.0, 1.0, 2.0, 3.0])
    assert ts.sup_distance_at_sample(F, np.array([1.0, 1.0, 2.0, 3.0])) == 0.0
    assert ts.sup_distance_at_sample(F, np.array([1.0])) == pytest.approx(0.5)


@pytest.fixture(scope="module")
def small_ref():
    return ts.build_reference_cdf(replicates=30, seed=5, box=BoxGeometry.cube(6.0, "periodic"))


def test_reference_cdf_structure(small_ref, tmp_path):
    assert small_ref.size > 30 * 50
    s = small_ref.step
    assert s.values[-1] == 1.0 and np.all(np.diff(s.values) > 0)
    assert small_ref(np.array([-1.0]))[0] == 0.0
    ref2 = ts.build_reference_cdf(replicates=30, seed=5, box=BoxGeometry.cube(6.0, "periodic"), cache_dir=tmp_path)
    ref3 = ts.build_reference_cdf(replicates=30, seed=5, box=BoxGeometry.cube(6.0, "periodic"), cache_dir=tmp_path)
    assert np.array_equal(ref2.areas, small_ref.areas) and np.array_equal(ref3.areas, ref2.areas)


def test_ks_periodic_one_point_at_median(small_ref):
    a = small_ref.areas
    # a value strictly inside a jump-free gap around the median
    i = len(a) // 2
    x = 0.5 * (a[i - 1] + a[i])
    d = ts.ks_statistic_periodic(ts.AreaSample([x]), small_ref, 1.0).value
    assert d == pytest.approx(0.5, abs=1.0 / len(a))


def test_ks_periodic_depends_on_normalised_areas(small_ref):
    rng = np.random.default_rng(2)
    areas = rng.gamma(3.5, 0.2, 50)
    lam = 0.37
    d = ts.ks_statistic_periodic(ts.AreaSample(areas), small_ref, lam).value
    s = 4.0
    d2 = ts.ks_statistic_periodic(ts.AreaSample(areas * s), small_ref, lam / s ** 1.5).value
    # scaled inputs reproduce the same normalised areas up to rounding
    assert d2 == pytest.approx(d, abs=2.0 / small_ref.size)
    assert 0.0 <= d <= 1.0


def test_ks_periodic_self_consistency(small_ref):
    d = ts.ks_statistic_periodic(ts.AreaSample(small_ref.areas), small_ref, 1.0).value
    assert d == 0.0
    with pytest.raises(ts.StatisticError):
        ts.ks_statistic_periodic(ts.AreaSample(small_ref.areas[:5]), small_ref, 0.0)


def test_ks_conditional_checks_count():
    class Mean:
        n_2d = 3
        lam = 0.2
        step = ts.StepCDF.ecdf([1.0, 2.0, 3.0])

    assert ts.ks_statistic_conditional(ts.AreaSample([1.0, 2.0, 3.0]), Mean).value == 0.0
    with pytest.raises(ts.StatisticError):
        ts.ks_statistic_conditional(ts.AreaSample([1.0, 2.0]), Mean)


def test_landscape_statistics_identity_and_empty():
    m0 = tda.landscape_from_diagram([[0.0, 1.0], [0.0, 0.5]])
    m1 = tda.landscape_from_diagram([[0.2, 0.6]])
    l0, l1 = ts.landscape_statistics((m0, m1), (m0, m1))
    assert (l0.value, l1.value) == (0.0, 0.0)
    empty = tda.landscape_from_diagram(np.empty((0, 2)))
    _, l1 = ts.landscape_statistics((m0, empty), (m0, m1))
    assert l1.value == pytest.approx(tda.landscape_l2_distance(empty, m1))
    assert l1.value == pytest.approx(math.sqrt(2 * 0.2 ** 3 / 3))
    with pytest.raises(ts.StatisticError):
        ts.landscape_statistics((m0, m1), None)


def test_joint_rule():
    assert not ts.joint_landscape_reject(0.1, 0.1, 0.2, 0.2)
    assert ts.joint_landscape_reject(0.3, 0.1, 0.2, 0.2)
    assert ts.joint_landscape_reject(0.1, 0.2, 0.2, 0.2)


def test_centroid_landscapes_of_section():
    tess = simulate_section(BoxGeometry.cube(6.0, "bounded"), lam=0.5, seed=3)
    h0, h1 = ts.centroid_landscapes(tess)
    assert h0.n_levels == tess.n_2d - 1


def test_kde_interior_matches_plain_kernel():
    rng = np.random.default_rng(4)
    data = rng.gamma(4.0, 0.25, 300) + 0.5
    h = 0.2
    x = np.linspace(0.3, 3.0, 200)
    _, dens = ts.kde_boundary_corrected(data, h, grid=x)
    u = (x[:, None] - data[None, :]) / h
    plain = (0.75 * np.clip(1 - u * u, 0, None)).sum(axis=1) / (len(data) * h)
    far = x >= h
    assert np.max(np.abs(dens[far] - plain[far])) <= 1e-9


def test_kde_uniform_boundary_improves():
    data = np.random.default_rng(5).random(5000)
    h = 0.2
    _, d = ts.kde_boundary_corrected(data, h, grid=np.array([0.0]))
    plain0 = (0.75 * np.clip(1 - (data / h) ** 2, 0, None)).sum() / (len(data) * h)
    assert abs(d[0] - 1.0) < abs(plain0 - 1.0)
    assert plain0 == pytest.approx(0.5, abs=0.05)


def test_kde_normalised_on_section_areas():
    box = BoxGeometry.cube(8.0, "periodic")
    areas = np.concatenate([simulate_section(box, lam=1.0, seed=s).areas() for s in range(20)])
    x = np.linspace(0.0, areas.max() + 0.2, 40001)
    _, d = ts.kde_boundary_corrected(areas, 0.2, grid=x)
    assert np.trapezoid(d, x) == pytest.approx(1.0, abs=1e-3)
    _, below = ts.kde_boundary_corrected(areas, 0.2, grid=np.array([-0.5, -0.01]))
    assert np.all(below == 0.0)
    with pytest.raises(ts.StatisticError):
        ts.kde_boundary_corrected(areas, 0.0)
