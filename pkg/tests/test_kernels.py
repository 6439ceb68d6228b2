import numpy as np
import pytest

from pvtest import _kernels
from pvtest import geometry as g
from pvtest.geometry import BoxGeometry

BACKENDS = _kernels.backends()


def _sections(backend, monkeypatch, mode):
    monkeypatch.setattr(_kernels, "clip_power_cells", BACKENDS[backend].clip_power_cells)
    box = BoxGeometry.cube(8.0, mode)
    return [g.simulate_section(box, lam=0.6, seed=s) for s in range(5)]


def test_python_backend_always_available():
    assert "python" in BACKENDS
    assert _kernels.BACKEND in BACKENDS


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled core not built")
@pytest.mark.parametrize("mode", ["bounded", "periodic"])
def test_clip_backends_agree(monkeypatch, mode):
    a = _sections("python", monkeypatch, mode)
    b = _sections("cython", monkeypatch, mode)
    for ta, tb in zip(a, b):
        assert ta.n_2d == tb.n_2d
        for ca, cb in zip(ta.cells, tb.cells):
            assert ca.generator_id == cb.generator_id
            assert ca.visibility == cb.visibility
            assert np.array_equal(ca.edge_labels, cb.edge_labels)
            np.testing.assert_allclose(ca.vertices, cb.vertices, rtol=0, atol=1e-12)


def test_clip_handles_sites_without_neighbours():
    out = _kernels.clip_power_cells(
        np.array([0.5]), np.array([0.5]), np.array([0.0]),
        np.array([0], dtype=np.int64), np.array([0, 0], dtype=np.int64),
        np.empty(0, dtype=np.int64), np.array([7], dtype=np.int64), (0.0, 0.0, 1.0, 1.0))
    cell_site, cptr, vx, vy, vlab = out
    assert list(cell_site) == [0]
    assert cptr[1] - cptr[0] == 4
    assert np.all(np.asarray(vlab) < 0)
