"""Null distributions conditioned on the number of section cells.

Given ``N3D = k`` generators, neither the section cell count nor any test
statistic depends on the intensity. So we simulate per ``k`` stratum, keep
sections with exactly ``n_2d`` cells, and weight stratum ``k`` by
``P(N2D = n_2d | N3D = k) * Poisson(k; lam * V)``, normalised. Only the
weights depend on ``lam``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from . import tda
from .geometry import BoxGeometry, SectionTessellation, simulate_section
from .seeding import child_seed, run_replicates
from .stereology import lambda_from_mean_area
from .teststats import StepCDF, sup_distance_at_sample

SCHEMA_VERSION = 1
ALPHA_GRID = (0.005, 0.01, 0.0125, 0.025, 0.05, 0.1, 0.9, 0.95, 0.975, 0.9875, 0.99, 0.995)
STATISTICS = ("C", "D", "L0", "L1")


class NullDistError(ValueError):
    """Invalid request for a null distribution."""


class InfeasibleConditioningError(NullDistError):
    """No simulated section reached the requested cell count."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


# ---------------------------------------------------------------------------
# geometry descriptors and Poisson support


def geometry_descriptor(box: BoxGeometry) -> dict:
    return {"lengths": [float(x) for x in box.lengths], "boundary_mode": box.boundary_mode}


def geometry_from_descriptor(d: dict) -> BoxGeometry:
    return BoxGeometry(tuple(d["lengths"]), d["boundary_mode"])


def poisson_support(mean: float, k_min: int = 0, eps: float = 1e-6) -> tuple[np.ndarray, np.ndarray, float]:
    """Central range of Poisson(``mean``) with tail mass at most ``eps``, cut below at ``k_min``.

    Returns ``(ks, pmf, lost_mass)``. Mass below ``k_min`` is not counted as
    lost: those strata cannot reach the conditioning count.
    """
    lo = max(int(stats.poisson.ppf(eps / 2, mean)), k_min)
    hi = max(int(stats.poisson.isf(eps / 2, mean)) + 1, lo)
    ks = np.arange(lo, hi + 1)
    pmf = stats.poisson.pmf(ks, mean)
    below = stats.poisson.cdf(lo - 1, mean) - (stats.poisson.cdf(k_min - 1, mean) if k_min > 0 else 0.0)
    lost = float(below + stats.poisson.sf(hi, mean))
    return ks, pmf, lost


def allocate(pmf: np.ndarray, total: int) -> np.ndarray:
    """Proportional replicate counts per stratum, at least one each."""
    share = pmf / pmf.sum() * total
    return np.maximum(np.round(share).astype(np.int64), 1)


def estimate_n2d_given_n3d(k: int, geometry: BoxGeometry, replicates: int, seed: int) -> dict[int, float]:
    """Empirical distribution of the section cell count with exactly ``k`` generators."""
    if k < 0:
        raise NullDistError("k must be nonnegative")
    if k == 0:
        return {0: 1.0}
    counts: dict[int, int] = {}
    for i in range(replicates):
        n = simulate_section(geometry, k=k, seed=child_seed(seed, k, i)).n_2d
        counts[n] = counts.get(n, 0) + 1
    return {n: c / replicates for n, c in sorted(counts.items())}


# ---------------------------------------------------------------------------
# weighted empirical distributions


def weighted_quantile(values: np.ndarray, weights: np.ndarray, alpha: float) -> float:
    """Smallest ``x`` with weighted CDF at ``x`` at least ``alpha``."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    cw /= cw[-1]
    i = int(np.searchsorted(cw, alpha - 1e-12, side="left"))
    return float(v[min(i, len(v) - 1)])


def effective_sample_size(weights: np.ndarray) -> float:
    w = np.asarray(weights, dtype=float)
    return float(w.sum() ** 2 / np.sum(w * w)) if len(w) else 0.0


@dataclass
class NullTable:
    """Conditioned Monte Carlo sample of one statistic.

    ``values[i]`` came from a section with ``n3d[i]`` generators and carries
    weight ``sample_weights[i]``. ``weights_by_n3d`` holds the normalised
    stratum weights; ``extras`` holds mean objects needed to evaluate D or
    landscape statistics on new data.
    """

    statistic: str
    n_2d: int
    lam: float
    geometry: dict
    seed: int
    replicates: int
    values: np.ndarray
    n3d: np.ndarray
    sample_weights: np.ndarray
    weights_by_n3d: dict
    diagnostics: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def samples(self) -> list[tuple[float, int]]:
        return list(zip(self.values.tolist(), self.n3d.tolist()))

    @property
    def ess(self) -> float:
        return effective_sample_size(self.sample_weights)

    @property
    def resolution(self) -> float:
        return 1.0 / self.ess if self.ess > 0 else 1.0

    def quantile(self, alpha: float) -> float:
        return weighted_quantile(self.values, self.sample_weights, alpha)

    def quantiles(self, alphas: Iterable[float] = ALPHA_GRID) -> dict[float, float]:
        return {float(a): self.quantile(a) for a in alphas}

    def cdf(self, t: float) -> float:
        w = self.sample_weights
        return float(w[self.values <= t].sum() / w.sum())

    def p_value(self, t_obs: float, two_sided: bool = False) -> float:
        """Weighted upper-tail probability ``P(T >= t_obs)``.

        With ``two_sided`` the smaller tail is doubled (capped at 1).
        Values smaller than ``resolution`` are not resolved by the sample.
        """
        w = self.sample_weights
        W = w.sum()
        upper = float(w[self.values >= t_obs].sum() / W)
        if not two_sided:
            return min(upper, 1.0)
        lower = float(w[self.values <= t_obs].sum() / W)
        return min(1.0, 2.0 * min(upper, lower))

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "statistic": self.statistic,
            "n_2d": self.n_2d,
            "lambda": self.lam,
            "geometry": self.geometry,
            "seed": self.seed,
            "replicates": self.replicates,
            "samples": {"values": self.values.tolist(), "n3d": self.n3d.tolist(),
                        "weights": self.sample_weights.tolist()},
            "weights_by_n3d": {str(k): v for k, v in self.weights_by_n3d.items()},
            "diagnostics": self.diagnostics,
            "extras": _extras_to_json(self.extras),
        }

    @classmethod
    def from_json(cls, d: dict) -> "NullTable":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise NullDistError(f"unsupported cache schema {d.get('schema_version')!r}")
        s = d["samples"]
        return cls(d["statistic"], int(d["n_2d"]), float(d["lambda"]), d["geometry"], d["seed"],
                   int(d["replicates"]), np.asarray(s["values"], float), np.asarray(s["n3d"], np.int64),
                   np.asarray(s["weights"], float),
                   {int(k): float(v) for k, v in d["weights_by_n3d"].items()},
                   d.get("diagnostics", {}), _extras_from_json(d.get("extras", {}), d["n_2d"], d["lambda"]))

    def write_quantiles_csv(self, path, alphas: Iterable[float] = ALPHA_GRID) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "quantile"])
            for a, q in self.quantiles(alphas).items():
                w.writerow([a, repr(q)])


# ---------------------------------------------------------------------------
# conditional mean objects


@dataclass
class ConditionalMeanCDF:
    """Weighted mean of retained replicates' area ecdfs."""

    step: StepCDF
    n_2d: int
    lam: float

    def __call__(self, x) -> np.ndarray:
        return self.step(x)

    def median(self) -> float:
        i = int(np.searchsorted(self.step.values, 0.5, side="left"))
        return float(self.step.support[min(i, len(self.step.support) - 1)])


def mean_cdf_from_samples(area_sets: Sequence[np.ndarray], weights: np.ndarray, n_2d: int,
                          lam: float) -> ConditionalMeanCDF:
    if len(area_sets) == 0:
        raise NullDistError("no replicates to average")
    x = np.concatenate([np.asarray(a, float) for a in area_sets])
    w = np.concatenate([np.full(len(a), wi / len(a)) for a, wi in zip(area_sets, weights)])
    return ConditionalMeanCDF(StepCDF.weighted(x, w), n_2d, lam)


def _landscape_to_json(L: tda.Landscape) -> dict:
    return {"T": L.domain_end, "ts": [t.tolist() for t in L.ts], "vals": [v.tolist() for v in L.vals]}


def _landscape_from_json(d: dict) -> tda.Landscape:
    return tda.Landscape([np.asarray(t, float) for t in d["ts"]], [np.asarray(v, float) for v in d["vals"]],
                         float(d["T"]))


def _extras_to_json(extras: dict) -> dict:
    out = {}
    if "mean_cdf" in extras:
        s = extras["mean_cdf"].step
        out["mean_cdf"] = {"support": s.support.tolist(), "values": s.values.tolist()}
    for key in ("mean_h0", "mean_h1"):
        if key in extras:
            out[key] = _landscape_to_json(extras[key])
    if "joint_partner" in extras:
        out["joint_partner"] = extras["joint_partner"]
    return out


def _extras_from_json(d: dict, n_2d: int, lam: float) -> dict:
    out = {}
    if "mean_cdf" in d:
        out["mean_cdf"] = ConditionalMeanCDF(StepCDF(np.asarray(d["mean_cdf"]["support"], float),
                                                     np.asarray(d["mean_cdf"]["values"], float)), n_2d, lam)
    for key in ("mean_h0", "mean_h1"):
        if key in d:
            out[key] = _landscape_from_json(d[key])
    if "joint_partner" in d:
        out["joint_partner"] = d["joint_partner"]
    return out


# ---------------------------------------------------------------------------
# leave-one-out


def loo_values(statistic: str, replicates: Sequence, weights: Sequence[float] | None = None) -> np.ndarray:
    """Each replicate's distance to the weighted mean of the others.

    Removing replicate ``i`` (weight ``w_i`` of total ``W``) moves the mean
    to ``(W M - w_i X_i) / (W - w_i)``, so the distance from ``X_i`` to it
    is ``W / (W - w_i)`` times its distance to the full mean ``M``.
    ``replicates`` are area arrays for ``D`` and landscapes for ``L0``/``L1``.
    """
    B = len(replicates)
    if B < 2:
        raise NullDistError("leave-one-out needs at least two replicates")
    w = np.ones(B) if weights is None else np.asarray(weights, dtype=float)
    W = w.sum()
    if np.any(W - w <= 0):
        raise NullDistError("a single replicate carries all the weight")
    scale = W / (W - w)
    if statistic == "D":
        x = np.concatenate([np.asarray(a, float) for a in replicates])
        xw = np.concatenate([np.full(len(a), wi / len(a)) for a, wi in zip(replicates, w)])
        F = StepCDF.weighted(x, xw)
        dist = np.array([sup_distance_at_sample(F, np.sort(np.asarray(a, float))) for a in replicates])
    elif statistic in ("L0", "L1"):
        M = tda.mean_landscape(replicates, w)
        integ = tda.LandscapeIntegrals(M)
        dist = np.array([integ.distance(L) for L in replicates])
    else:
        raise NullDistError(f"leave-one-out is defined for D, L0 and L1, not {statistic!r}")
    return scale * dist


def loo_quantiles(statistic: str, replicates: Sequence, weights: Sequence[float] | None = None,
                  alphas: Iterable[float] = ALPHA_GRID) -> dict[float, float]:
    vals = loo_values(statistic, replicates, weights)
    w = np.ones(len(vals)) if weights is None else np.asarray(weights, dtype=float)
    return {float(a): weighted_quantile(vals, w, a) for a in alphas}


# ---------------------------------------------------------------------------
# conditioned simulation


@dataclass
class Retained:
    n3d: int
    areas: np.ndarray
    centroids: np.ndarray
    landscapes: tuple | None = None


@dataclass
class ConditionedSample:
    """Retained sections and their normalised weights."""

    n_2d: int
    lam: float
    geometry: dict
    seed: int
    replicates: int
    retained: list[Retained]
    weights: np.ndarray
    weights_by_n3d: dict
    diagnostics: dict

    @property
    def n3d(self) -> np.ndarray:
        return np.array([r.n3d for r in self.retained], dtype=np.int64)


def _simulate_one(job):
    box, k, seed, i, n_2d, want_tda = job
    tess = simulate_section(box, k=k, seed=child_seed(seed, k, i))
    if tess.n_2d != n_2d:
        return None
    cents = tess.centroids()
    lands = None
    if want_tda:
        diag = tda.diagram_from_points(cents)
        lands = (tda.landscape_from_diagram(diag, 0), tda.landscape_from_diagram(diag, 1))
    return Retained(k, tess.areas(), cents, lands)


def simulate_conditioned(n_2d: int, lam: float, geometry: BoxGeometry, replicates: int, seed: int,
                         want_tda: bool = False, workers: int = 1, eps: float = 1e-6) -> ConditionedSample:
    """Stratified simulation over ``N3D`` keeping sections with ``n_2d`` cells."""
    if not (lam > 0 and math.isfinite(lam)):
        raise NullDistError("lambda must be positive")
    if n_2d < 1:
        raise NullDistError("n_2d must be at least 1")
    ks, pmf, lost = poisson_support(lam * geometry.volume, k_min=max(n_2d, 1), eps=eps)
    if not pmf.sum() > 0:
        raise InfeasibleConditioningError(
            f"{n_2d} cells need at least {n_2d} generators, which has negligible probability at "
            f"mean {lam * geometry.volume:.4g}", {"retained": 0, "simulated": 0, "truncated_mass": lost})
    m = allocate(pmf, replicates)
    jobs = [(geometry, int(k), seed, i, n_2d, want_tda) for k, mk in zip(ks, m) for i in range(int(mk))]
    results = run_replicates(_simulate_one, jobs, workers=workers)
    by_k: dict[int, list[Retained]] = {}
    for job, res in zip(jobs, results):
        by_k.setdefault(job[1], [])
        if res is not None:
            by_k[job[1]].append(res)
    hit = np.array([len(by_k.get(int(k), [])) for k in ks])
    p_hat = hit / m
    raw = p_hat * pmf
    diagnostics = {
        "strata": [int(ks[0]), int(ks[-1])],
        "simulated_per_k": {int(k): int(x) for k, x in zip(ks, m)},
        "retained_per_k": {int(k): int(x) for k, x in zip(ks, hit)},
        "truncated_mass": lost,
        "simulated": int(m.sum()),
        "retained": int(hit.sum()),
    }
    if raw.sum() == 0:
        raise InfeasibleConditioningError(
            f"no simulated section had exactly {n_2d} cells ({int(m.sum())} sections over k in "
            f"[{ks[0]}, {ks[-1]}])", diagnostics)
    wk = raw / raw.sum()
    retained, weights = [], []
    for k, w_k, h in zip(ks, wk, hit):
        for r in by_k.get(int(k), []):
            retained.append(r)
            weights.append(w_k / h)
    weights = np.asarray(weights)
    weights /= weights.sum()
    diagnostics["ess"] = effective_sample_size(weights)
    return ConditionedSample(n_2d, float(lam), geometry_descriptor(geometry), seed, replicates, retained,
                             weights, {int(k): float(w) for k, w in zip(ks, wk) if w > 0}, diagnostics)


def tables_from_sample(cs: ConditionedSample, statistics: Sequence[str] = STATISTICS) -> dict[str, NullTable]:
    """Null tables for several statistics from one conditioned sample."""
    from .teststats import AreaSample, cv_statistic

    out = {}
    base = dict(n_2d=cs.n_2d, lam=cs.lam, geometry=cs.geometry, seed=cs.seed, replicates=cs.replicates,
                n3d=cs.n3d, sample_weights=cs.weights, weights_by_n3d=cs.weights_by_n3d,
                diagnostics=cs.diagnostics)
    for st in statistics:
        extras = {}
        if st == "C":
            vals = np.array([cv_statistic(AreaSample(r.areas)).value for r in cs.retained])
        elif st == "D":
            area_sets = [r.areas for r in cs.retained]
            vals = loo_values("D", area_sets, cs.weights) if len(area_sets) >= 2 else np.zeros(len(area_sets))
            extras["mean_cdf"] = mean_cdf_from_samples(area_sets, cs.weights, cs.n_2d, cs.lam)
        elif st in ("L0", "L1"):
            dim = 0 if st == "L0" else 1
            if cs.retained and cs.retained[0].landscapes is None:
                raise NullDistError("landscape tables need a sample simulated with want_tda=True")
            lands = [r.landscapes[dim] for r in cs.retained]
            vals = loo_values(st, lands, cs.weights) if len(lands) >= 2 else np.zeros(len(lands))
            extras[f"mean_h{dim}"] = tda.mean_landscape(lands, cs.weights)
            extras["joint_partner"] = "L1" if st == "L0" else "L0"
        else:
            raise NullDistError(f"unknown statistic {st!r}")
        out[st] = NullTable(st, values=np.asarray(vals, float), extras=extras, **base)
    return out


# ---------------------------------------------------------------------------
# caching


def cache_key(statistic: str, n_2d: int, lam: float, geometry: BoxGeometry | dict, seed: int,
              replicates: int) -> str:
    g = geometry if isinstance(geometry, dict) else geometry_descriptor(geometry)
    payload = json.dumps({"statistic": statistic, "n_2d": int(n_2d), "lambda": float(f"{lam:.4g}"),
                          "geometry": g, "seed": seed, "replicates": int(replicates),
                          "schema_version": SCHEMA_VERSION}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


def cache_path(cache_dir, statistic, n_2d, lam, geometry, seed, replicates) -> Path:
    return Path(cache_dir) / f"null-{statistic}-{n_2d}-{cache_key(statistic, n_2d, lam, geometry, seed, replicates)}.json"


def save_table(table: NullTable, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(table.to_json()))


def load_table(path) -> NullTable:
    return NullTable.from_json(json.loads(Path(path).read_text()))


def build_null_tables(statistics: Sequence[str], n_2d: int, lam: float, geometry: BoxGeometry,
                      replicates: int, seed: int, cache_dir=None, workers: int = 1) -> dict[str, NullTable]:
    """Tables for several statistics sharing one simulation; cached per statistic."""
    statistics = list(dict.fromkeys(statistics))
    for st in statistics:
        if st not in STATISTICS:
            raise NullDistError(f"unknown statistic {st!r}")
    out: dict[str, NullTable] = {}
    if cache_dir is not None:
        for st in statistics:
            p = cache_path(cache_dir, st, n_2d, lam, geometry, seed, replicates)
            if p.exists():
                out[st] = load_table(p)
    missing = [st for st in statistics if st not in out]
    if missing:
        want_tda = any(st in ("L0", "L1") for st in missing)
        cs = simulate_conditioned(n_2d, lam, geometry, replicates, seed, want_tda=want_tda, workers=workers)
        fresh = tables_from_sample(cs, missing)
        for st, tab in fresh.items():
            out[st] = tab
            if cache_dir is not None:
                save_table(tab, cache_path(cache_dir, st, n_2d, lam, geometry, seed, replicates))
    return {st: out[st] for st in statistics}


def build_null_table(statistic: str, n_2d: int, lam: float, geometry: BoxGeometry, replicates: int,
                     seed: int, cache_dir=None, workers: int = 1) -> NullTable:
    return build_null_tables([statistic], n_2d, lam, geometry, replicates, seed, cache_dir, workers)[statistic]


def mean_cdf_conditional(n_2d: int, lam: float, geometry: BoxGeometry, replicates: int,
                         seed: int) -> ConditionalMeanCDF:
    cs = simulate_conditioned(n_2d, lam, geometry, replicates, seed)
    return mean_cdf_from_samples([r.areas for r in cs.retained], cs.weights, n_2d, lam)


def mean_landscape_conditional(n_2d: int, lam: float, geometry: BoxGeometry, dimension: int,
                               replicates: int, seed: int) -> tda.Landscape:
    cs = simulate_conditioned(n_2d, lam, geometry, replicates, seed, want_tda=True)
    return tda.mean_landscape([r.landscapes[dimension] for r in cs.retained], cs.weights)


def joint_thresholds(table0: NullTable, table1: NullTable, alpha: float = 0.05) -> tuple[float, float, float]:
    """Common quantile level ``beta`` for L0 and L1 whose joint rule has size ``alpha``.

    Rejecting when either statistic exceeds its ``1 - alpha`` quantile has
    size above ``alpha``. We instead find the smallest ``beta`` such that
    both values fall at or below their ``beta`` quantiles with weighted
    probability at least ``1 - alpha``. Returns ``(q0, q1, beta)``.
    """
    if len(table0.values) != len(table1.values) or not np.array_equal(table0.n3d, table1.n3d):
        raise NullDistError("joint thresholds need tables from the same replicates")
    w = table0.sample_weights / table0.sample_weights.sum()

    def coverage(beta):
        q0, q1 = table0.quantile(beta), table1.quantile(beta)
        return float(w[(table0.values <= q0) & (table1.values <= q1)].sum()), q0, q1

    lo, hi = 1.0 - alpha, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if coverage(mid)[0] >= 1.0 - alpha:
            hi = mid
        else:
            lo = mid
    _, q0, q1 = coverage(hi)
    return q0, q1, hi


def joint_p_value(table0: NullTable, table1: NullTable, l0: float, l1: float) -> float:
    """Smallest size at which the joint landscape rule rejects ``(l0, l1)``."""
    lo, hi = 0.0, 1.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        q0, q1, _ = joint_thresholds(table0, table1, mid)
        if l0 < q0 and l1 < q1:
            lo = mid
        else:
            hi = mid
    return hi


# ---------------------------------------------------------------------------
# bootstrap confidence interval


@dataclass(frozen=True)
class BootstrapCI:
    lower: float
    upper: float
    level: float
    lambda_hat: float
    l_low: float
    l_high: float
    n_boot: int


def _estimate_area_method(tess: SectionTessellation) -> float:
    return lambda_from_mean_area(float(np.mean(tess.areas())))


def bootstrap_ci_lambda(lambda_hat: float, geometry: BoxGeometry, n_boot: int = 10_000, seed: int = 0,
                        estimator: Callable[[SectionTessellation], float] | None = None,
                        level: float = 0.90, eps: float = 1e-6) -> BootstrapCI:
    """Interval for the intensity from resimulation at ``lambda_hat``.

    Replicates are stratified over the generator count and weighted by its
    Poisson probability; each gives ``u = sqrt(est) - sqrt(lambda_hat)``.
    With ``l_a`` the weighted quantiles of ``u`` the interval is
    ``[(sqrt(lambda_hat) - l_high)^2, (sqrt(lambda_hat) - l_low)^2]``.
    """
    if not (lambda_hat > 0 and math.isfinite(lambda_hat)):
        raise NullDistError("lambda_hat must be positive")
    est = estimator or _estimate_area_method
    ks, pmf, _ = poisson_support(lambda_hat * geometry.volume, k_min=1, eps=eps)
    m = allocate(pmf, n_boot)
    u, w = [], []
    root = math.sqrt(lambda_hat)
    for k, mk, pk in zip(ks, m, pmf):
        for i in range(int(mk)):
            tess = simulate_section(geometry, k=int(k), seed=child_seed(seed, int(k), i))
            if tess.n_2d == 0:
                continue
            u.append(math.sqrt(est(tess)) - root)
            w.append(pk / mk)
    u, w = np.asarray(u), np.asarray(w)
    tail = (1.0 - level) / 2.0
    l_low = weighted_quantile(u, w, tail)
    l_high = weighted_quantile(u, w, 1.0 - tail)
    lower = max(root - l_high, 0.0) ** 2
    upper = (root - l_low) ** 2 if root - l_low > 0 else 0.0
    return BootstrapCI(lower, upper, level, lambda_hat, l_low, l_high, int(m.sum()))
