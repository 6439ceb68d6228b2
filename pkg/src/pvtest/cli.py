"""Command-line interface: ``pvtest <subcommand> ...``.

Every stochastic subcommand needs ``--seed``. Runs that write files also
write a manifest holding the effective configuration; ``pvtest replay``
re-executes a run from it.

Exit codes: 0 success, 2 invalid input, 3 infeasible conditioning.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, nulldist, stereology, tda, teststats
from .geometry import BoxGeometry, GeometryError, cell_metrics, simulate_section
from .io import read_tessellation, sidecar_path, write_metrics_csv, write_tessellation
from .seeding import child_seed, run_replicates

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3

STAT_NAMES = {"cv": ("C",), "ks": ("D",), "landscape": ("L0", "L1")}
MANIFEST_NAME = "manifest.json"


class CLIError(Exception):
    """Bad arguments or unusable paths."""


# ---------------------------------------------------------------------------
# helpers


def _alpha_grid(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals or any(not 0 < a < 1 for a in vals):
        raise argparse.ArgumentTypeError("alpha levels must lie in (0, 1)")
    return vals


def _positive(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text!r}")
    return v


def _prepare_dir(path) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise CLIError(f"cannot create output directory {p}: {err.strerror}") from None
    probe = p / ".pvtest-write-test"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as err:
        raise CLIError(f"output directory {p} is not writable: {err.strerror}") from None
    return p


def _prepare_file(path) -> Path:
    p = Path(path)
    _prepare_dir(p.parent if str(p.parent) else ".")
    return p


def _require_input(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CLIError(f"input file {p} does not exist")
    return p


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    for k, v in cfg.items():
        if isinstance(v, tuple):
            cfg[k] = list(v)
    return cfg


def _write_manifest(path: Path, args, outputs: list[str]) -> None:
    manifest = {"pvtest_version": __version__, "command": args.command, "config": _config(args),
                "outputs": sorted(outputs)}
    path.write_text(_dump(manifest))


def _geometry(args, window_area: float | None = None) -> BoxGeometry:
    side = args.box if args.box is not None else (math.sqrt(window_area) if window_area else 10.0)
    return BoxGeometry.cube(side, "periodic" if args.periodic else "bounded")


def _add_mode(p, default_periodic: bool = False) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--periodic", dest="periodic", action="store_true", default=default_periodic,
                   help="periodic (toroidal) simulation box")
    g.add_argument("--bounded", dest="periodic", action="store_false", help="bounded simulation box")


# ---------------------------------------------------------------------------
# simulate


def _simulate_job(job):
    box, lam, seed, i = job
    tess = simulate_section(box, lam=lam, seed=child_seed(seed, 0, i))
    return tess


def cmd_simulate(args) -> int:
    out = _prepare_dir(args.out)
    box = BoxGeometry.cube(args.box, "periodic" if args.periodic else "bounded")
    jobs = [(box, args.lam, args.seed, i) for i in range(args.replicates)]
    outputs = []
    rows = []
    suffix = ".csv" if args.format == "csv" else ".json"
    for i, tess in enumerate(run_replicates(_simulate_job, jobs, workers=args.workers)):
        name = f"section-{i:05d}{suffix}"
        write_tessellation(tess, out / name)
        outputs.append(name)
        if suffix == ".csv":
            outputs.append(sidecar_path(name).name)
        for j, c in enumerate(tess.cells):
            rows.append((i, j, c.generator_id, c.visibility, cell_metrics(c, tess.window_area)))
    if args.replicates:
        write_metrics_csv(rows, out / "metrics.csv")
        outputs.append("metrics.csv")
    _write_manifest(out / MANIFEST_NAME, args, outputs)
    print(f"wrote {args.replicates} sections and {len(rows)} cells to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate


def cmd_estimate(args) -> int:
    tess = read_tessellation(_require_input(args.input))
    if tess.n_2d == 0:
        raise CLIError(f"{args.input}: no cells")
    summary = stereology.summarize_section(tess)
    est = stereology.estimate_all(summary)
    report = {
        "n_2d": tess.n_2d,
        "window_area": tess.window_area,
        "summary": {"p_a": summary.p_a, "n_a": summary.n_a, "l_a": summary.l_a, "mean_area": summary.mean_area},
        "lambda_hat": {m: e.value for m, e in est.items()},
    }
    lam = args.lam if args.lam is not None else est["a"].value
    if args.replicates > 0:
        geom = _geometry(args, tess.window_area)
        ci = nulldist.bootstrap_ci_lambda(lam, geom, n_boot=args.replicates, seed=args.seed, level=args.level)
        report["ci"] = {"lower": ci.lower, "upper": ci.upper, "level": ci.level, "lambda_hat": ci.lambda_hat,
                        "l_low": ci.l_low, "l_high": ci.l_high, "n_boot": ci.n_boot,
                        "geometry": nulldist.geometry_descriptor(geom)}
    lines = [f"cells: {tess.n_2d}, window area: {tess.window_area:.6g}"]
    for m in stereology.METHODS:
        lines.append(f"lambda_{m}: {report['lambda_hat'][m]:.6g}" if m in est else f"lambda_{m}: undefined")
    if "ci" in report:
        c = report["ci"]
        lines.append(f"{c['level']:.0%} interval: [{c['lower']:.6g}, {c['upper']:.6g}] ({c['n_boot']} resimulations)")
    print("\n".join(lines))
    if args.out:
        out = _prepare_file(args.out)
        out.write_text(_dump(report))
        _write_manifest(out.with_name(out.stem + ".manifest.json"), args, [out.name])
    return EXIT_OK


# ---------------------------------------------------------------------------
# test


def _load_or_build(stats_needed, n_2d, lam, geom, args) -> dict:
    tables = {}
    missing = []
    if args.cache_dir is not None:
        for st in stats_needed:
            p = nulldist.cache_path(args.cache_dir, st, n_2d, lam, geom, args.seed, args.replicates)
            if p.exists():
                tables[st] = nulldist.load_table(p)
            else:
                missing.append(st)
    else:
        missing = list(stats_needed)
    if missing and not args.build_null:
        where = f"in {args.cache_dir}" if args.cache_dir is not None else "(no --cache-dir given)"
        raise CLIError(f"no cached null table for {', '.join(missing)} {where}; "
                       "run `pvtest null-table` first or pass --build-null")
    if missing:
        if args.cache_dir is not None:
            _prepare_dir(args.cache_dir)
        tables.update(nulldist.build_null_tables(missing, n_2d, lam, geom, args.replicates, args.seed,
                                                 cache_dir=args.cache_dir, workers=args.workers))
    return tables


def cmd_test(args) -> int:
    tess = read_tessellation(_require_input(args.input))
    if tess.n_2d < 2:
        raise CLIError(f"{args.input}: need at least two cells, found {tess.n_2d}")
    sample = teststats.AreaSample.from_tessellation(tess)
    lam_hat = stereology.lambda_from_mean_area(float(sample.areas.mean()))
    lam = args.lam if args.lam is not None else lam_hat
    geom = _geometry(args, tess.window_area)
    wanted = [st for name in dict.fromkeys(args.statistic) for st in STAT_NAMES[name]]
    tables = _load_or_build(wanted, tess.n_2d, lam, geom, args)
    grid = args.alpha_grid
    results = []

    def record(res, table, p, reject, threshold):
        results.append({"statistic": res.statistic, "value": res.value, "p_value": p, "n_2d": tess.n_2d,
                        "lambda_hat": lam, "reject": bool(reject), "threshold": threshold,
                        "resolution": table.resolution, "quantiles_used": {repr(a): q for a, q in table.quantiles(grid).items()}})

    if "C" in tables:
        t = tables["C"]
        res = teststats.cv_statistic(sample)
        p = t.p_value(res.value, two_sided=args.two_sided)
        if args.two_sided:
            lo, hi = t.quantile(args.alpha / 2), t.quantile(1 - args.alpha / 2)
            record(res, t, p, res.value < lo or res.value > hi, [lo, hi])
        else:
            q = t.quantile(1 - args.alpha)
            record(res, t, p, res.value > q, q)
    if "D" in tables:
        t = tables["D"]
        res = teststats.ks_statistic_conditional(sample, t.extras["mean_cdf"])
        q = t.quantile(1 - args.alpha)
        record(res, t, t.p_value(res.value), res.value > q, q)
    if "L0" in tables:
        t0, t1 = tables["L0"], tables["L1"]
        obs = teststats.centroid_landscapes(tess)
        l0, l1 = teststats.landscape_statistics(obs, (t0.extras["mean_h0"], t1.extras["mean_h1"]))
        q0, q1, beta = nulldist.joint_thresholds(t0, t1, args.alpha)
        reject = teststats.joint_landscape_reject(l0.value, l1.value, q0, q1)
        joint_p = nulldist.joint_p_value(t0, t1, l0.value, l1.value)
        record(l0, t0, t0.p_value(l0.value), l0.value >= q0, q0)
        record(l1, t1, t1.p_value(l1.value), l1.value >= q1, q1)
        for r in results[-2:]:
            r["joint"] = {"reject": bool(reject), "p_value": joint_p, "beta": beta}

    lines = [f"cells: {tess.n_2d}, lambda used: {lam:.6g} (lambda_a = {lam_hat:.6g}), alpha = {args.alpha}"]
    for r in results:
        lines.append(f"{r['statistic']:>2} = {r['value']:.6g}  p = {r['p_value']:.4g}  "
                     f"{'reject' if r['reject'] else 'accept'}")
    if "L0" in tables:
        j = results[-1]["joint"]
        lines.append(f"landscape rule (L0 and L1 jointly): {'reject' if j['reject'] else 'accept'}  p = {j['p_value']:.4g}")
    lines.append("quantiles used:")
    for r in results:
        qs = "  ".join(f"{a}:{q:.5g}" for a, q in r["quantiles_used"].items())
        lines.append(f"  {r['statistic']}: {qs}")
    print("\n".join(lines))
    if args.out:
        out = _prepare_file(args.out)
        out.write_text(_dump(results))
        _write_manifest(out.with_name(out.stem + ".manifest.json"), args, [out.name])
    return EXIT_OK


# ---------------------------------------------------------------------------
# tda


def _read_cloud(path: Path) -> np.ndarray:
    if path.suffix.lower() == ".json" or sidecar_path(path).exists():
        return read_tessellation(path).centroids()
    return tda.read_points_csv(path)


def cmd_tda(args) -> int:
    pts = _read_cloud(_require_input(args.input))
    if len(pts) == 0:
        raise CLIError(f"{args.input}: no points")
    diag = tda.diagram_from_points(pts)
    out = _prepare_dir(args.out)
    tda.write_diagram_csv(diag, out / "diagram.csv")
    names = ["diagram.csv"]
    for dim in (0, 1):
        name = f"landscape-h{dim}.csv"
        tda.write_landscape_csv(tda.landscape_from_diagram(diag, dim, args.T), out / name)
        names.append(name)
    _write_manifest(out / MANIFEST_NAME, args, names)
    for dim, b, d in diag.to_rows():
        print(f"{dim},{b!r},{d!r}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# null-table


def cmd_null_table(args) -> int:
    out = _prepare_dir(args.out)
    geom = _geometry(args)
    wanted = [st for name in dict.fromkeys(args.statistic) for st in STAT_NAMES[name]]
    if args.cache_dir is not None:
        _prepare_dir(args.cache_dir)
    tables = nulldist.build_null_tables(wanted, args.n2d, args.lam, geom, args.replicates, args.seed,
                                        cache_dir=args.cache_dir, workers=args.workers)
    names = []
    for st, t in tables.items():
        t.write_quantiles_csv(out / f"quantiles-{st}.csv", args.alpha_grid)
        nulldist.save_table(t, out / f"null-{st}.json")
        names += [f"quantiles-{st}.csv", f"null-{st}.json"]
    if "L0" in tables:
        q0, q1, beta = nulldist.joint_thresholds(tables["L0"], tables["L1"], 0.05)
        (out / "joint-landscape.json").write_text(_dump({"alpha": 0.05, "beta": beta, "q0": q0, "q1": q1}))
        names.append("joint-landscape.json")
    d = next(iter(tables.values())).diagnostics
    _write_manifest(out / MANIFEST_NAME, args, names)
    print(f"retained {d['retained']} of {d['simulated']} sections (ESS {d['ess']:.1f}); tables in {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# replay


def cmd_replay(args) -> int:
    path = _require_input(args.manifest)
    try:
        manifest = json.loads(path.read_text())
        cfg = dict(manifest["config"])
        command = manifest["command"]
    except (json.JSONDecodeError, KeyError, TypeError):
        raise CLIError(f"{path} is not a pvtest manifest") from None
    if command not in COMMANDS or command == "replay":
        raise CLIError(f"{path}: cannot replay command {command!r}")
    if args.out is not None:
        cfg["out"] = args.out
    for k in ("alpha_grid",):
        if k in cfg and isinstance(cfg[k], list):
            cfg[k] = tuple(cfg[k])
    ns = argparse.Namespace(**cfg)
    return COMMANDS[command](ns)


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "test": cmd_test,
    "tda": cmd_tda,
    "null-table": cmd_null_table,
    "replay": cmd_replay,
}


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pvtest",
        description="Test planar sections against the Poisson-Voronoi model. Lengths are in user "
                    "units and intensities in points per unit volume.")
    parser.add_argument("--version", action="version", version=f"pvtest {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate random planar sections")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="generator intensity")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--replicates", type=_nonneg_int, default=1, help="number of sections")
    p.add_argument("--box", type=_positive, default=10.0, help="cube side length")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    _add_mode(p, default_periodic=True)

    p = sub.add_parser("estimate", help="intensity estimates and a bootstrap interval")
    p.add_argument("input", help="tessellation (.json or .csv)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--replicates", type=_nonneg_int, default=1000, help="bootstrap resimulations (0 skips)")
    p.add_argument("--lambda", dest="lam", type=_positive, default=None, help="override lambda_a for resimulation")
    p.add_argument("--level", type=float, default=0.90)
    p.add_argument("--box", type=_positive, default=None, help="cube side (default: sqrt of window area)")
    p.add_argument("--out", default=None, help="JSON report path")
    _add_mode(p, default_periodic=True)

    p = sub.add_parser("test", help="test an observed section")
    p.add_argument("input", help="tessellation (.json or .csv)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--statistic", nargs="+", choices=tuple(STAT_NAMES), default=list(STAT_NAMES))
    p.add_argument("--lambda", dest="lam", type=_positive, default=None, help="override lambda_a")
    p.add_argument("--replicates", type=int, default=20000, help="sections simulated for the null")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--alpha-grid", type=_alpha_grid, default=nulldist.ALPHA_GRID)
    p.add_argument("--two-sided", action="store_true", help="two-sided CV test")
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--build-null", action="store_true", help="simulate null tables that are not cached")
    p.add_argument("--box", type=_positive, default=None, help="cube side (default: sqrt of window area)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="JSON results path")
    _add_mode(p)

    p = sub.add_parser("tda", help="persistence diagram and landscapes of cell centroids")
    p.add_argument("input", help="tessellation (.json/.csv with sidecar) or point CSV")
    p.add_argument("--T", type=_positive, default=None, help="landscape domain end")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("null-table", help="build conditional null tables")
    p.add_argument("--statistic", nargs="+", choices=tuple(STAT_NAMES), default=list(STAT_NAMES))
    p.add_argument("--n2d", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=_positive, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--replicates", type=int, default=20000)
    p.add_argument("--box", type=_positive, default=10.0, help="cube side length")
    p.add_argument("--alpha-grid", type=_alpha_grid, default=nulldist.ALPHA_GRID)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    _add_mode(p)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="write outputs here instead")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except nulldist.InfeasibleConditioningError as err:
        print(f"pvtest: infeasible conditioning: {err}", file=sys.stderr)
        print(f"pvtest: diagnostics: {json.dumps(err.diagnostics, sort_keys=True, default=str)}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (CLIError, GeometryError, stereology.EstimateError, teststats.StatisticError, tda.TDAError,
            nulldist.NullDistError, OSError, ValueError) as err:
        print(f"pvtest: error: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
