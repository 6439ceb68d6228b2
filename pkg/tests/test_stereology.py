import math

import numpy as np
import pytest

from pvtest import stereology as sg
from pvtest.geometry import BoxGeometry, Cell, SectionTessellation, simulate_section


def _grid():
    cells = [Cell(np.array([[i, j], [i + 1, j], [i + 1, j + 1], [i, j + 1.0]]), 2 * i + j, "clipped")
             for i in (0, 1) for j in (0, 1)]
    return SectionTessellation(cells, (0.0, 0.0, 2.0, 2.0))


def test_prefactors():
    assert round((1 / sg.C1) ** 1.5, 4) == 0.2008
    assert round((2 / sg.C1) ** 1.5, 4) == 0.5680
    assert round((1 / sg.C2) ** 3, 4) == 0.0837


def test_constants_against_independent_gamma():
    from scipy.special import gamma
    c1 = 8 / 15 * 0.75 ** (1 / 3) * math.pi ** (5 / 3) * gamma(4 / 3)
    c2 = math.pi * (math.pi / 6) ** (1 / 3) * gamma(5 / 3)
    assert sg.C1 == pytest.approx(c1, rel=1e-14)
    assert sg.C2 == pytest.approx(c2, rel=1e-14)


def test_formula_identities():
    s = sg.SectionSummary(p_a=sg.C1, n_a=sg.C1 / 2, l_a=sg.C2, mean_area=2 / sg.C1, n_cells=1)
    for m in sg.METHODS:
        assert sg.estimate_lambda(s, m).value == pytest.approx(1.0, rel=1e-14)
    s = sg.SectionSummary(0, 0, 0, 0.686, 1)
    assert sg.estimate_lambda(s, "a").value == pytest.approx(1.0, abs=0.002)


def test_single_cell_summary():
    tess = SectionTessellation([Cell(np.array([[0, 0], [3, 0], [3, 2], [0, 2.0]]), 0, "clipped")], (0, 0, 3, 2))
    s = sg.summarize_section(tess)
    assert (s.p_a, s.l_a, s.mean_area, s.n_cells) == (0.0, 0.0, 6.0, 1)
    assert s.n_a == pytest.approx(1 / 6)
    est = sg.estimate_all(s)
    assert set(est) == {"N", "a"}
    with pytest.raises(sg.EstimateError):
        sg.estimate_lambda(s, "P")


def test_grid_summary():
    s = sg.summarize_section(_grid())
    assert s.p_a == pytest.approx(0.25)
    assert s.l_a == pytest.approx(1.0)
    assert s.n_a == pytest.approx(1.0)
    assert s.mean_area == pytest.approx(1.0)
    with pytest.raises(sg.EstimateError):
        sg.summarize_section(_grid(), include_clipped=False)


def test_empty_rejected():
    with pytest.raises(sg.EstimateError):
        sg.summarize_section(SectionTessellation([], (0, 0, 1, 1)))
    with pytest.raises(sg.EstimateError):
        sg.lambda_from_mean_area(0.0)


def test_periodic_complete_cells_invert_mean_area():
    tess = simulate_section(BoxGeometry.cube(6.0, "periodic"), lam=1.0, seed=3)
    s = sg.summarize_section(tess)
    assert s.mean_area * s.n_a == pytest.approx(1.0, rel=1e-8)
    assert sg.estimate_lambda(s, "N").value == pytest.approx(sg.estimate_lambda(s, "a").value, rel=1e-8)
    # torus Euler relation with degree-3 vertices
    assert s.p_a == pytest.approx(2 * s.n_a, rel=1e-12)


def test_scale_equivariance():
    box = BoxGeometry.cube(8.0)
    tess = simulate_section(box, lam=0.5, seed=1)
    base = sg.estimate_all(sg.summarize_section(tess))
    for f in (0.25, 4.0):
        cells = [Cell(c.vertices * f, c.generator_id, c.visibility) for c in tess.cells]
        scaled = SectionTessellation(cells, tuple(f * np.array(tess.window)))
        est = sg.estimate_all(sg.summarize_section(scaled))
        for m in sg.METHODS:
            assert est[m].value == pytest.approx(base[m].value * f ** -3, rel=1e-10)


def test_periodic_estimators_near_truth():
    box = BoxGeometry.cube(10.0, "periodic")
    vals = {m: [] for m in sg.METHODS}
    for s in range(30):
        for m, e in sg.estimate_all(sg.summarize_section(simulate_section(box, lam=1.0, seed=s))).items():
            vals[m].append(e.value)
    for m in sg.METHODS:
        assert abs(np.mean(vals[m]) - 1.0) < 0.05
