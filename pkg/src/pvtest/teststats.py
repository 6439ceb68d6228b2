"""Goodness-of-fit statistics for sectional tessellations.

C is the coefficient of variation of cell areas. D is a sup distance between
step CDFs. L0 and L1 are landscape distances of the cell-centroid cloud.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from . import tda
from .geometry import BoxGeometry, SectionTessellation, simulate_section
from .seeding import child_seed


class StatisticError(ValueError):
    """Invalid input to a test statistic."""


@dataclass(frozen=True)
class AreaSample:
    areas: np.ndarray
    source: Literal["periodic_model", "observed"] = "observed"

    def __post_init__(self):
        a = np.asarray(self.areas, dtype=float).reshape(-1)
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise StatisticError("cell areas must be positive and finite")
        object.__setattr__(self, "areas", a)

    @property
    def n(self) -> int:
        return len(self.areas)

    @classmethod
    def from_tessellation(cls, tess: SectionTessellation, source="observed") -> "AreaSample":
        return cls(tess.areas(), source)


@dataclass
class TestResult:
    statistic: str
    value: float
    p_value: float | None = None
    meta: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self) -> dict:
        out = {"statistic": self.statistic, "value": self.value, "p_value": self.p_value}
        out.update(self.meta)
        return out


# ---------------------------------------------------------------------------
# coefficient of variation


def cv_statistic(sample: AreaSample) -> TestResult:
    """Sample standard deviation (n - 1 denominator) over the mean."""
    if sample.n < 2:
        raise StatisticError("the coefficient of variation needs at least two cells")
    a = sample.areas
    return TestResult("C", float(np.std(a, ddof=1) / np.mean(a)), meta={"n_2d": sample.n})


# ---------------------------------------------------------------------------
# step-function sup distance


@dataclass(frozen=True)
class StepCDF:
    """Right-continuous step CDF with jumps at ``support``.

    ``values[i]`` is the CDF at ``support[i]``; left of ``support[0]`` it is 0.
    """

    support: np.ndarray
    values: np.ndarray

    def __call__(self, x) -> np.ndarray:
        i = np.searchsorted(self.support, x, side="right")
        return np.concatenate([[0.0], self.values])[i]

    def left(self, x) -> np.ndarray:
        i = np.searchsorted(self.support, x, side="left")
        return np.concatenate([[0.0], self.values])[i]

    @classmethod
    def ecdf(cls, x) -> "StepCDF":
        x = np.asarray(x, dtype=float)
        support, counts = np.unique(x, return_counts=True)
        return cls(support, np.cumsum(counts) / len(x))

    @classmethod
    def weighted(cls, x, w) -> "StepCDF":
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        support, inv = np.unique(x, return_inverse=True)
        mass = np.bincount(inv.reshape(-1), weights=w, minlength=len(support))
        cum = np.cumsum(mass) / w.sum()
        cum[-1] = 1.0
        return cls(support, np.minimum(cum, 1.0))


def sup_distance(F: StepCDF, G: StepCDF) -> float:
    """``sup_x |F(x) - G(x)|`` from both one-sided limits at every jump."""
    z = np.union1d(F.support, G.support)
    d_right = np.abs(F(z) - G(z))
    d_left = np.abs(F.left(z) - G.left(z))
    return float(max(d_right.max(initial=0.0), d_left.max(initial=0.0)))


def sup_distance_at_sample(F: StepCDF, sample_sorted: np.ndarray) -> float:
    """``sup |F - Ghat|`` where ``Ghat`` is the ecdf of a sorted sample.

    Between sample jumps ``Ghat`` is flat and ``F`` monotone, so the extremes
    sit at the sample jumps: compare ``F`` there with ``Ghat``, and the
    left limit of ``F`` with the left limit of ``Ghat``.
    """
    G = StepCDF.ecdf(sample_sorted)
    z = G.support
    right = np.abs(F(z) - G.values)
    g_left = np.concatenate([[0.0], G.values[:-1]])
    left = np.abs(F.left(z) - g_left)
    return float(max(right.max(initial=0.0), left.max(initial=0.0)))


# ---------------------------------------------------------------------------
# periodic reference CDF


@dataclass
class ReferenceCDF:
    """Empirical CDF of sectional cell areas at intensity 1."""

    areas: np.ndarray
    n_sections: int
    seed: int | None = None

    def __post_init__(self):
        self.areas = np.sort(np.asarray(self.areas, dtype=float))
        if len(self.areas) == 0:
            raise StatisticError("reference CDF needs at least one area")
        self._step = StepCDF.ecdf(self.areas)

    @property
    def size(self) -> int:
        return len(self.areas)

    @property
    def step(self) -> StepCDF:
        return self._step

    def __call__(self, x) -> np.ndarray:
        return self._step(x)

    def save(self, path) -> None:
        np.savez_compressed(path, areas=self.areas, n_sections=self.n_sections,
                            seed=-1 if self.seed is None else self.seed)

    @classmethod
    def load(cls, path) -> "ReferenceCDF":
        with np.load(path) as z:
            seed = int(z["seed"])
            return cls(z["areas"], int(z["n_sections"]), None if seed < 0 else seed)


def reference_box() -> BoxGeometry:
    return BoxGeometry.cube(10.0, "periodic")


def build_reference_cdf(replicates: int = 10_000, seed: int = 0, box: BoxGeometry | None = None,
                        cache_dir=None) -> ReferenceCDF:
    """Pool cell areas of ``replicates`` periodic sections at intensity 1."""
    box = box or reference_box()
    path = None
    if cache_dir is not None:
        key = json.dumps({"kind": "reference", "lengths": list(box.lengths), "mode": box.boundary_mode,
                          "replicates": replicates, "seed": seed}, sort_keys=True)
        digest = hashlib.sha256(key.encode()).hexdigest()[:16]
        path = Path(cache_dir) / f"reference-{digest}.npz"
        if path.exists():
            return ReferenceCDF.load(path)
    chunks = [simulate_section(box, lam=1.0, seed=child_seed(seed, 0, i)).areas()
              for i in range(replicates)]
    ref = ReferenceCDF(np.concatenate(chunks) if chunks else np.empty(0), replicates, seed)
    if path is not None:
        os.makedirs(path.parent, exist_ok=True)
        ref.save(path)
    return ref


def ks_statistic_periodic(sample: AreaSample, ref: ReferenceCDF, lambda_hat: float) -> TestResult:
    """Sup distance between the reference CDF and the ecdf of ``lambda_hat**(2/3) * a_i``.

    Areas at intensity ``lam`` are ``lam**(-2/3)`` times areas at intensity 1,
    so rescaling the sample puts it on the reference scale.
    """
    if sample.n == 0:
        raise StatisticError("empty sample")
    if not (lambda_hat > 0 and math.isfinite(lambda_hat)):
        raise StatisticError("lambda_hat must be positive")
    x = np.sort(lambda_hat ** (2.0 / 3.0) * sample.areas)
    d = sup_distance_at_sample(ref.step, x)
    return TestResult("D", d, meta={"n_2d": sample.n, "lambda_hat": lambda_hat,
                                    "reference_size": ref.size})


def ks_statistic_conditional(sample: AreaSample, mean_cdf) -> TestResult:
    """Sup distance between the conditional mean CDF and the sample ecdf."""
    if sample.n == 0:
        raise StatisticError("empty sample")
    if mean_cdf.n_2d != sample.n:
        raise StatisticError(f"mean CDF is conditioned on {mean_cdf.n_2d} cells, sample has {sample.n}")
    d = sup_distance_at_sample(mean_cdf.step, np.sort(sample.areas))
    return TestResult("D", d, meta={"n_2d": sample.n, "lambda": mean_cdf.lam})


# ---------------------------------------------------------------------------
# landscapes of cell centroids


def centroid_landscapes(tess_or_points, T: float | None = None) -> tuple[tda.Landscape, tda.Landscape]:
    """H0 and H1 landscapes of the cell centroids (or of a raw point cloud)."""
    pts = tess_or_points.centroids() if isinstance(tess_or_points, SectionTessellation) else tess_or_points
    diag = tda.diagram_from_points(np.asarray(pts, dtype=float))
    return (tda.landscape_from_diagram(diag, 0, T), tda.landscape_from_diagram(diag, 1, T))


def landscape_statistics(observed: tuple[tda.Landscape, tda.Landscape],
                         means: tuple[tda.Landscape, tda.Landscape] | None,
                         T: float | None = None) -> tuple[TestResult, TestResult]:
    """L0 and L1: distances of the observed landscapes to the mean ones."""
    if means is None or len(means) != 2 or any(m is None for m in means):
        raise StatisticError("both mean landscapes are required")
    out = []
    for name, obs, mean in (("L0", observed[0], means[0]), ("L1", observed[1], means[1])):
        t_end = T if T is not None else max(obs.domain_end, mean.domain_end)
        out.append(TestResult(name, tda.landscape_l2_distance(obs, mean, t_end), meta={"T": t_end}))
    return out[0], out[1]


def joint_landscape_reject(l0: float, l1: float, q0: float, q1: float) -> bool:
    """Reject unless both distances fall below their thresholds."""
    return not (l0 < q0 and l1 < q1)


# ---------------------------------------------------------------------------
# boundary-corrected kernel density


def _epan(u):
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _epan_cdf(u):
    u = np.clip(u, -1.0, 1.0)
    return 0.75 * (u - u ** 3 / 3.0) + 0.5


def _jones(x: np.ndarray, data: np.ndarray, h: float) -> np.ndarray:
    u = (x[:, None] - data[None, :]) / h
    k = _epan(u)
    p = np.minimum(x / h, 1.0)[:, None]
    a0 = 0.75 * (p - p ** 3 / 3 + 2.0 / 3.0)
    a1 = 0.75 * (p ** 2 / 2 - p ** 4 / 4 - 0.25)
    a2 = 0.75 * (p ** 3 / 3 - p ** 5 / 5 + 2.0 / 15.0)
    kl = np.where(p < 1.0, (a2 - a1 * u) * k / (a0 * a2 - a1 * a1), k)
    return kl.sum(axis=1) / (len(data) * h)


def kde_boundary_corrected(sample, h: float, grid=None, n_grid: int = 512,
                           strip_points: int = 4001) -> tuple[np.ndarray, np.ndarray]:
    """Epanechnikov density on ``[0, inf)`` with linear-combination boundary correction.

    Within ``h`` of zero the kernel is replaced by
    ``(a2 - a1 u) K(u) / (a0 a2 - a1^2)``, with ``a_l`` the partial moments of
    ``K`` over the part of its support that stays above zero. That
    correction does not conserve mass, so on ``[0, h)`` negative values are
    cut to zero and the strip is rescaled to hold exactly the mass the plain
    estimate leaves outside ``[h, inf)``. Beyond ``h`` the result is the
    plain kernel estimate. Returns ``(x, density)``.
    """
    if not (h > 0 and math.isfinite(h)):
        raise StatisticError("bandwidth must be positive")
    data = sample.areas if isinstance(sample, AreaSample) else np.asarray(sample, dtype=float).reshape(-1)
    if len(data) == 0:
        raise StatisticError("empty sample")
    if grid is None:
        grid = np.linspace(0.0, float(data.max()) + h, n_grid)
    x = np.asarray(grid, dtype=float)

    xs = np.linspace(0.0, h, strip_points)
    raw = np.maximum(_jones(xs, data, h), 0.0)
    strip_mass = float(np.sum((raw[1:] + raw[:-1]) * np.diff(xs)) / 2.0)
    outer_mass = float(np.mean(1.0 - _epan_cdf((h - data) / h)))
    factor = (1.0 - outer_mass) / strip_mass if strip_mass > 0 else 0.0

    dens = np.zeros(len(x))
    inside = x >= 0
    vals = _jones(x[inside], data, h)
    near = x[inside] < h
    vals[near] = np.maximum(vals[near], 0.0) * factor
    dens[inside] = vals
    return x, dens
