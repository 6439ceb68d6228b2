"""Time the compiled and pure-Python kernels on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5]

Reports the best wall time per backend for cell clipping (whole planar
sections) and for persistence pairing (alpha filtrations of point clouds).
"""

import argparse
import time

import numpy as np

from pvtest import _kernels, tda
from pvtest.geometry import BoxGeometry, random_axis_plane, sample_poisson_generators, section_tessellation


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_clip(backend, repeat):
    box = BoxGeometry.cube(10.0, "periodic")
    cases = [(sample_poisson_generators(1.0, box, s), random_axis_plane(box, 100 + s)) for s in range(10)]
    original = _kernels.clip_power_cells
    _kernels.clip_power_cells = backend.clip_power_cells
    try:
        return _best(lambda: [section_tessellation(g, p) for g, p in cases], repeat) / len(cases)
    finally:
        _kernels.clip_power_cells = original


def bench_persistence(backend, repeat):
    filts = [tda.alpha_filtration(np.random.default_rng(s).random((2000, 2))) for s in range(5)]
    return _best(lambda: [tda.persistence_pairs(f, backend=backend) for f in filts], repeat) / len(filts)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = _kernels.backends()
    print(f"default backend: {_kernels.BACKEND}")
    print(f"{'kernel':<40}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    rows = [
        ("section, lambda=1, periodic 10^3 (ms)", bench_clip),
        ("persistence, 2000 points (ms)", bench_persistence),
    ]
    for label, fn in rows:
        t = {name: fn(mod, args.repeat) * 1e3 for name, mod in backends.items()}
        speed = t["python"] / t["cython"] if "cython" in t else float("nan")
        print(f"{label:<40}" + "".join(f"{v:>12.2f}" for v in t.values()) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
