"""Command-line interface.

Every subcommand reads delimited text and writes delimited text with a
header, to ``--out`` or standard output. The fully resolved configuration is
written next to the main output as ``<out>.config.json`` (or to standard
error when writing to standard output).

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric degeneracy.
Errors are reported as a single line ``error code=<n> kind=<class> msg=<text>``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .agreement import (adjusted_rand, compare_partitions, contingency, skill_scores,
                        temporal_consistency)
from .catalog import ColumnMap, SelectionWindow, filter_catalog, load_catalog, parse_time, write_catalog
from .cluster import ClusterOptions, Partition, pdf_cluster
from .correlate import (build_masked_grid, cluster_slip_summary, cluster_spearman,
                        interpolate_slip, load_slip, read_polylines, scatter_table,
                        trench_distance, write_slip, SlipField)
from .diagnostics import dbs
from .errors import DataError, NPCError
from .kde import DensityModel, kde_evaluate, normal_reference_bandwidth, regular_grid
from .stats import bonferroni, format_p, kruskal_wallis, pairwise_wilcoxon_matrix
from .synth import MixtureSpec, synth_catalog, synth_slip, synth_trench

logger = logging.getLogger("npcquake")

_ALLOC = {"static": "static", "seq": "sequential", "batch": "batch"}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def _write_table(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = buf.getvalue()
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _echo_config(args, out):
    # strict JSON has no inf/nan; keep them as strings
    clean = lambda v: str(v) if isinstance(v, float) and not math.isfinite(v) else v
    cfg = {k: clean(v) for k, v in sorted(vars(args).items()) if k != "func"}
    cfg["version"] = __version__
    text = json.dumps(cfg, sort_keys=True, default=str, indent=1, allow_nan=False) + "\n"
    if out is None or str(out) == "-":
        sys.stderr.write(text)
    else:
        Path(str(out) + ".config.json").write_text(text)


def _pair(text, conv=int, n=2, what="value"):
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated {what}s")
    try:
        return tuple(conv(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad {what} in {text!r}") from None


def _grid(text):
    nx, ny = _pair(text, int, 2, "count")
    if nx < 2 or ny < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2 points per axis")
    return nx, ny


def _bbox(text):
    return _pair(text, float, 4, "coordinate")


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


# -- shared option groups -------------------------------------------------

def _catalog_opts(p, required=True):
    g = p.add_argument_group("catalog selection")
    g.add_argument("--catalog", required=required, help="event catalog (delimited text with header)")
    g.add_argument("--map", default="lon=lon,lat=lat,mag=mag,time=time",
                   help="column map lon=<col>,lat=<col>,mag=<col>,time=<col>[,id=<col>][,depth=<col>]")
    g.add_argument("--delimiter", default=",", help="field separator of the catalog")
    g.add_argument("--bbox", type=_bbox, help="study area lonmin,lonmax,latmin,latmax")
    g.add_argument("--min-mag", type=float, help="minimum magnitude (default: none)")
    g.add_argument("--from", dest="t_from", help="start time, ISO-8601 UTC")
    g.add_argument("--to", dest="t_to", help="end time, ISO-8601 UTC")
    g.add_argument("--on-error", choices=("fail", "skip"), default="fail",
                   help="unparseable catalog rows: fail or skip with a warning")


def _cluster_opts(p):
    g = p.add_argument_group("clustering")
    g.add_argument("--alpha-levels", type=int, default=99, help="number of density-quantile levels")
    g.add_argument("--alloc", choices=sorted(_ALLOC), default="batch",
                   help="allocation policy: static, seq (sequential update) or batch (by density decile)")
    g.add_argument("--min-core", type=int, default=3, help="minimum points for a mode to count")
    g.add_argument("--bandwidth-scale", type=_positive, default=1.0,
                   help="multiplier on normal-reference bandwidths")


def _load_selected(args):
    cat = load_catalog(args.catalog, ColumnMap.parse(args.map), on_error=args.on_error,
                       delimiter=args.delimiter)
    lo = hi = bo = to = None
    if args.bbox:
        lo, hi, bo, to = args.bbox
    win = SelectionWindow(lo, hi, bo, to,
                          mag_min=-math.inf if args.min_mag is None else args.min_mag,
                          t_start=parse_time(args.t_from) if args.t_from else None,
                          t_end=parse_time(args.t_to) if args.t_to else None)
    return filter_catalog(cat, win)


def _cluster_options(args):
    return ClusterOptions(bandwidth_scale=args.bandwidth_scale, alpha_levels=args.alpha_levels,
                          policy=_ALLOC[args.alloc], min_core=args.min_core, threads=args.threads)


# -- subcommands -----------------------------------------------------------

def cmd_synth(args):
    spec = MixtureSpec(blobs=args.blobs, n=args.n, sigma=args.sigma, separation=args.separation,
                       center=args.center, days=args.days)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cat, truth = synth_catalog(spec, args.seed)
    write_catalog(cat, out / "catalog.csv", extra={"true_label": truth})
    gx, gy, slip = synth_slip(spec, args.slip_patch, nx=args.slip_grid[0], ny=args.slip_grid[1])
    write_slip(SlipField(gx, gy, slip), out / "slip.csv")
    trench = synth_trench(spec)
    (out / "trench.txt").write_text("".join(f"{_fmt(x)},{_fmt(y)}\n" for x, y in trench))
    _echo_config(args, out / "catalog.csv")


def _patch(text):
    blob, peak = _pair(text.replace(":", ","), float, 2, "number")
    return int(blob), peak


def cmd_density(args):
    cat = _load_selected(args)
    model = DensityModel.fit(cat.coords, args.bandwidth_scale)
    if args.grid:
        box = args.bbox or (cat.lon.min(), cat.lon.max(), cat.lat.min(), cat.lat.max())
        q = regular_grid(box, *args.grid)
    else:
        q = cat.coords
    surf = kde_evaluate(model, q, threads=args.threads)
    _write_table(args.out, ["lon", "lat", "f", "log_f"],
                 zip(q[:, 0], q[:, 1], surf.values, surf.log_values))
    _echo_config(args, args.out)


def cmd_cluster(args):
    cat = _load_selected(args)
    if len(cat) < 3:
        raise DataError(f"need >= 3 events, got {len(cat)}")
    res = pdf_cluster(cat, _cluster_options(args))
    part = res.partition
    _write_table(args.out, ["id", "lon", "lat", "label", "core_flag", "f", "log_f"],
                 zip(cat.ids, cat.lon, cat.lat, part.labels, part.core_flag, res.densities,
                     res.log_densities))
    if args.tree_out:
        _write_table(args.tree_out, ["node", "parent", "level", "size"], res.tree.rows())
    if args.mode_out:
        mf = res.mode_function
        _write_table(args.mode_out, ["alpha", "p", "m"], zip(mf.alpha, mf.p, mf.m))
    logger.info("M=%d clusters from %d events", res.M, len(cat))
    _echo_config(args, args.out)


def _read_columns(path, needed):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path}: no rows")
    for c in needed:
        if c not in rows[0]:
            raise DataError(f"{path}: missing column {c!r}")
    return rows


def cmd_dbs(args):
    rows = _read_columns(args.partition, ["lon", "lat", "label"])
    x = np.array([[float(r["lon"]), float(r["lat"])] for r in rows])
    labels = np.array([int(r["label"]) for r in rows])
    ids = [r.get("id", str(k + 1)) for k, r in enumerate(rows)]
    M = int(labels.max())
    h = normal_reference_bandwidth(x) * args.bandwidth_scale
    if args.dbs_on_cores:
        if "core_flag" not in rows[0]:
            raise DataError("--dbs-on-cores needs a core_flag column")
        core = np.array([r["core_flag"] in ("1", "True", "true") for r in rows])
        models = [DensityModel(x[(labels == j) & core], h) for j in range(1, M + 1)]
    else:
        models = [DensityModel(x[labels == j], h) for j in range(1, M + 1)]
    rep = dbs(Partition(labels, np.zeros(len(labels), dtype=bool), M), models, x)
    _write_table(args.out, ["id", "label", "runner_up", "p_label", "p_runner_up", "dbs"],
                 zip(ids, rep.cluster, rep.runner_up, rep.p_cluster, rep.p_runner_up, rep.dbs))
    if args.summary_out:
        _write_table(args.summary_out, ["cluster", "rank", "id", "dbs"],
                     [(j, k, ids[i], v) for j, k, i, v in rep.summary_rows()])
    logger.info("mean dbs %.4f", rep.mean)
    _echo_config(args, args.out)


def cmd_anova(args):
    need = [args.by] + ([] if args.slip else [args.value])
    rows = _read_columns(args.input, need + (["lon", "lat"] if args.slip else []))
    groups_of = np.array([r[args.by] for r in rows])
    if args.slip:
        field = load_slip(args.slip)
        pts = np.array([[float(r["lon"]), float(r["lat"])] for r in rows])
        values, _ = interpolate_slip(field, pts)
    else:
        values = np.array([float(r[args.value]) for r in rows])
    keys = sorted(set(groups_of), key=lambda s: (len(s), s))
    groups = [values[groups_of == k] for k in keys]
    kw = kruskal_wallis(groups)
    mat = pairwise_wilcoxon_matrix(groups)
    pvals = [mat[i, j] for i in range(len(keys)) for j in range(i + 1, len(keys))]
    bon = bonferroni(pvals, args.alpha)
    out = [("kruskal_wallis", "H", kw.statistic), ("kruskal_wallis", "df", kw.df),
           ("kruskal_wallis", "p", format_p(kw.p_value)),
           ("bonferroni", "threshold", bon.threshold)]
    _write_table(args.out, ["test", "quantity", "value"], out)
    if args.matrix_out:
        table = []
        for i, k in enumerate(keys):
            table.append([k] + ["-" if i == j else format_p(mat[i, j]) for j in range(len(keys))])
        _write_table(args.matrix_out, [args.by] + keys, table)
    _echo_config(args, args.out)


def _labels(path, col):
    rows = _read_columns(path, [col])
    ids = [r.get("id") for r in rows]
    return ids, np.array([int(r[col]) for r in rows])


def cmd_agree(args):
    ids_a, a = _labels(args.a, args.col)
    ids_b, b = _labels(args.b, args.col)
    if len(a) != len(b):
        raise DataError(f"label files differ in length ({len(a)} vs {len(b)})")
    if all(i is not None for i in ids_a + ids_b) and ids_a != ids_b:
        raise DataError("label files list different events or orders")
    K = int(max(a.max(), b.max()))
    if args.no_match:
        table = contingency(a, b, K)
        s = skill_scores(table)
        ha = adjusted_rand(table, args.expectation)
        perm = np.arange(K)
    else:
        s, perm = compare_partitions(a, b, args.expectation, K=K)
        ha = s.ha
    _write_table(args.out, ["N", "K", "NSS", "HSS", "HK", "HA", "match"],
                 [(len(a), K, s.nss, s.hss, s.hk, ha, " ".join(str(p + 1) for p in perm))])
    _echo_config(args, args.out)


def cmd_temporal(args):
    cat = _load_selected(args)
    opts = _cluster_options(args)
    res = temporal_consistency(cat, lambda x: pdf_cluster(x, opts).partition.labels,
                               start_day=args.start_day, days=args.days,
                               expectation_mode=args.expectation)
    _write_table(args.out, ["day", "n_common", "K", "NSS", "HSS", "HK", "HA", "skipped"],
                 [(d.day, d.n_common, d.K, d.nss, d.hss, d.hk, d.ha, d.skipped) for d in res])
    _echo_config(args, args.out)


def cmd_correlate(args):
    cat = _load_selected(args)
    field = load_slip(args.slip)
    res = pdf_cluster(cat, _cluster_options(args))
    header = ["lon", "lat", "slip", "log_slip", "log_density", "cluster", "outside"]
    if args.mode == "events":
        pts, labels = cat.coords, res.partition.labels
    else:
        box = args.bbox or field.bbox
        masks = read_polylines(args.mask) if args.mask else None
        grid = build_masked_grid(box, *args.grid, masks)
        pts = grid.points
        # grid points go to the cluster whose estimate is highest there
        models = res.cluster_models()
        logf = np.vstack([m.log_density(pts) for m in models]) if len(pts) else np.zeros((1, 0))
        labels = np.argmax(logf, axis=0) + 1
        logger.info("masked grid keeps %d of %d points", grid.retained, args.grid[0] * args.grid[1])
    rows = scatter_table(pts, field, res.model, labels)
    _write_table(args.out, header, [(r.lon, r.lat, r.slip, r.log_slip, r.log_density,
                                     r.cluster, r.outside) for r in rows])
    if args.summary_out:
        rho = cluster_spearman(rows)
        if args.mode == "events":
            if not args.trench:
                raise DataError("--summary-out in events mode needs --trench")
            trench = read_polylines(args.trench)[0]
            dist = trench_distance(pts, trench)
            slip = np.array([r.slip for r in rows])
            summ = cluster_slip_summary(labels, slip, dist)
            _write_table(args.summary_out,
                         ["cluster", "mean", "min", "max", "sd", "N", "dist_min", "dist_max",
                          "dist_mean", "spearman"],
                         [(s.cluster, s.mean, s.min, s.max, s.sd, s.n, s.dist_min, s.dist_max,
                           s.dist_mean, rho.get(s.cluster)) for s in summ])
        else:
            counts = np.bincount(labels, minlength=res.M + 1)
            _write_table(args.summary_out, ["cluster", "N", "spearman"],
                         [(c, counts[c], rho.get(c)) for c in range(1, res.M + 1)])
    _echo_config(args, args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="npcquake", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="ceiling on worker threads (default: all cores); does not change results")
    common.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help):
        return sub.add_parser(name, parents=[common], help=help, description=help)

    s = add("synth", "write a planted synthetic catalog, slip model and trench")
    s.add_argument("--blobs", type=int, default=5, help="number of Gaussian blobs")
    s.add_argument("--n", type=int, default=1000, help="total number of events")
    s.add_argument("--seed", type=int, required=True, help="random seed")
    s.add_argument("--sigma", type=_positive, default=0.1, help="blob standard deviation (degrees)")
    s.add_argument("--separation", type=_positive, default=10.0,
                   help="distance between neighbouring blobs in sigmas")
    s.add_argument("--center", type=lambda t: _pair(t, float, 2, "coordinate"),
                   default=(-72.5, -36.0), help="lon,lat of the blob polygon centre")
    s.add_argument("--days", type=_positive, default=60.0, help="observation period in days")
    s.add_argument("--slip-patch", type=_patch, action="append",
                   help="BLOB:PEAK slip patch in metres; repeatable (default 1:16.6 and 4:11.9)")
    s.add_argument("--slip-grid", type=_grid, default=(81, 81), help="slip lattice NX,NY")
    s.add_argument("--out-dir", default=".", help="directory for catalog.csv, slip.csv, trench.txt")
    s.set_defaults(func=cmd_synth)

    s = add("density", "kernel density at events or on a grid")
    _catalog_opts(s)
    s.add_argument("--grid", type=_grid, help="evaluate on an NX,NY lattice over --bbox")
    s.add_argument("--bandwidth-scale", type=_positive, default=1.0,
                   help="multiplier on normal-reference bandwidths")
    s.add_argument("--out", help="output table (default stdout)")
    s.set_defaults(func=cmd_density)

    s = add("cluster", "density-based clustering of a catalog")
    _catalog_opts(s)
    _cluster_opts(s)
    s.add_argument("--out", help="per-event table (default stdout)")
    s.add_argument("--tree-out", help="cluster tree table: node, parent, level, size")
    s.add_argument("--mode-out", help="mode function table: alpha, p, m")
    s.set_defaults(func=cmd_cluster)

    s = add("dbs", "density-based silhouette of a partition")
    s.add_argument("--partition", required=True, help="table with lon, lat, label columns")
    s.add_argument("--bandwidth-scale", type=_positive, default=1.0,
                   help="multiplier on normal-reference bandwidths")
    s.add_argument("--dbs-on-cores", action="store_true",
                   help="estimate cluster densities from cores only")
    s.add_argument("--out", help="per-event table (default stdout)")
    s.add_argument("--summary-out", help="silhouette plot table sorted per cluster")
    s.set_defaults(func=cmd_dbs)

    s = add("anova", "Kruskal-Wallis and pairwise Wilcoxon tests by group")
    s.add_argument("--input", required=True, help="table holding the grouping and value columns")
    s.add_argument("--by", default="label", help="grouping column")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--value", default="slip", help="value column (default slip)")
    src.add_argument("--slip", help="slip lattice; values interpolated at lon, lat instead of --value")
    s.add_argument("--alpha", type=float, default=0.05, help="family-wise level for Bonferroni")
    s.add_argument("--out", help="test summary (default stdout)")
    s.add_argument("--matrix-out", help="pairwise p-value matrix")
    s.set_defaults(func=cmd_anova)

    s = add("agree", "agreement indexes between two labelings")
    s.add_argument("--a", required=True, help="forecast labels table")
    s.add_argument("--b", required=True, help="observed labels table")
    s.add_argument("--col", default="label", help="label column in both tables")
    s.add_argument("--expectation", choices=("standard", "paper"), default="standard",
                   help="adjusted Rand expectation")
    s.add_argument("--no-match", action="store_true", help="score labels as given, without matching")
    s.add_argument("--out", help="output table (default stdout)")
    s.set_defaults(func=cmd_agree)

    s = add("temporal", "day-over-day consistency of clustering")
    _catalog_opts(s)
    _cluster_opts(s)
    s.add_argument("--start-day", type=int, default=1, help="first day compared with its predecessor")
    s.add_argument("--days", type=int, help="number of days compared (default: all)")
    s.add_argument("--expectation", choices=("standard", "paper"), default="standard",
                   help="adjusted Rand expectation")
    s.add_argument("--out", help="output table (default stdout)")
    s.set_defaults(func=cmd_temporal)

    s = add("correlate", "log-slip versus log-density tables")
    _catalog_opts(s)
    _cluster_opts(s)
    s.add_argument("--slip", required=True, help="slip lattice (lon, lat, slip rows)")
    s.add_argument("--trench", help="trench polyline (lon, lat per line)")
    s.add_argument("--mode", choices=("grid", "events"), default="events",
                   help="evaluate at events or on a masked grid")
    s.add_argument("--grid", type=_grid, default=(192, 214), help="grid NX,NY for grid mode")
    s.add_argument("--mask", help="mask polygons (blank-line separated vertex lists)")
    s.add_argument("--out", help="scatter table (default stdout)")
    s.add_argument("--summary-out", help="per-cluster summary table")
    s.set_defaults(func=cmd_correlate)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "correlate" and args.mode == "events" and args.mask:
        try:
            parser.error("--mask applies only to --mode grid")
        except SystemExit as exc:
            return int(exc.code)
    if args.command == "synth" and not args.slip_patch:
        args.slip_patch = [(1, 16.6), (4, 11.9)] if args.blobs >= 4 else [(1, 16.6)]
    try:
        args.func(args)
    except NPCError as exc:
        msg = " ".join(str(exc).split())
        sys.stderr.write(f"error code={exc.exit_code} kind={type(exc).__name__} msg={msg}\n")
        return exc.exit_code
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
