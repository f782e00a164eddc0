"""Command-line entry point: ``v2xperf <command> [flags]``.

Every command writes its effective configuration to ``<out>/config.txt`` and its
artifacts under ``<out>`` with fixed file names. Exit status is 0 on success,
2 for configuration or input errors and 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import COMMANDS, ConfigError, RunConfig, build_config, load_file, parse_range
from .estimator import (
    CORRECTED_METRICS,
    EstimatorError,
    fit_correction,
    load_factors,
    save_factors,
)
from .lut import LutFormatError, generate_lut, load_lut, save_lut
from .mac import run_simulation
from .metrics import METRICS, MetricsError, aggregate, per_node
from .workflows import REFERENCE_CORRELATIONS, estimate_positions, hidden_sweep, validate

CONFIG_FILE = "config.txt"
SWEEP_FILE = "sweep.csv"
METRICS_FILE = "metrics.csv"
PACKETS_FILE = "packets.csv"
ESTIMATES_FILE = "estimates.csv"
VALIDATION_FILE = "validation.csv"
SUMMARY_FILE = "validation_summary.txt"
FACTORS_FILE = "factors.txt"


def lut_file(cluster: int) -> str:
    return f"lut_cluster{cluster}.txt"


class InputError(ValueError):
    """Malformed user-supplied data file."""


def fmt(v) -> str:
    """Stable text form for CSV cells."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return f"{v:.10g}"
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue())


def read_positions(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``id,x,y`` rows (header optional, ``#`` comments). Returns (ids, xy)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc}") from exc
    ids, xy = [], []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        cells = [c.strip() for c in line.replace(";", ",").split(",")]
        if len(cells) == 1:
            cells = line.split()
        if not ids and [c.lower() for c in cells[:3]] == ["id", "x", "y"]:
            continue
        if len(cells) != 3:
            raise InputError(f"{path}:{lineno}: expected 3 fields 'id,x,y', got {len(cells)}")
        try:
            node, x, y = int(cells[0]), float(cells[1]), float(cells[2])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from exc
        if not (math.isfinite(x) and math.isfinite(y)):
            raise InputError(f"{path}:{lineno}: non-finite coordinate")
        if node in seen:
            raise InputError(f"{path}:{lineno}: duplicate id {node}")
        seen.add(node)
        ids.append(node)
        xy.append((x, y))
    return np.array(ids, dtype=int), np.array(xy, dtype=float).reshape(-1, 2)


def read_table(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    try:
        rows = list(csv.reader(path.read_text().splitlines()))
    except OSError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: empty file")
    return rows[0], rows[1:]


# ---------------------------------------------------------------- commands


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    (out / CONFIG_FILE).write_text(cfg.dump())
    return out


def _traffic(cfg: RunConfig) -> dict:
    if cfg.run.cams_per_node > 0:
        return {"cams_per_node": cfg.run.cams_per_node}
    return {"duration": cfg.run.duration}


def cmd_simulate(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    scen = cfg.scenario.build(cfg.seed)
    recs = run_simulation(scen.nodes, cfg.params, cfg.radio, seed=cfg.seed,
                          loss_receivers=cfg.run.loss_receivers, **_traffic(cfg))
    stats = per_node(recs, delayed_only=cfg.run.delayed_only)
    by_id = {nd.id: nd for nd in scen.nodes}
    rows = []
    for node_id in sorted(stats):
        nd = by_id[node_id]
        m = stats[node_id]
        role = "transmitter" if node_id == scen.transmitter else "neighbor"
        rows.append([node_id, nd.x, nd.y, role, *m.as_tuple()])
    total = aggregate(recs, delayed_only=cfg.run.delayed_only)
    rows.append(["all", "", "", "all", *total.as_tuple()])
    write_csv(out / METRICS_FILE, ["node", "x", "y", "role", *METRICS], rows)
    if cfg.run.packet_log:
        prow = []
        for r in recs:
            lost = not all(r.received_ok.values()) if r.received_ok else False
            prow.append([r.tx_node, r.seq, r.requested_at,
                         "" if r.granted_at is None else r.granted_at,
                         r.delay, r.collided, r.dropped, lost])
        write_csv(out / PACKETS_FILE, ["tx_node", "seq", "requested_at_us", "granted_at_us", "delay_us",
                                       "collided", "dropped", "lost"], prow)
    print(f"simulated {len(recs)} CAMs from {len(stats)} stations -> {out / METRICS_FILE}")
    return 0


def cmd_hidden_sweep(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    seps = parse_range(cfg.run.separations)
    if not seps:
        raise ConfigError("no separations given")
    if cfg.run.cams_per_node <= 0:
        raise ConfigError("hidden-sweep needs run.cams_per_node > 0")
    rows = hidden_sweep(seps, cfg.scenario.total_neighbors, cfg.run.cams_per_node,
                        cfg.run.runs_per_point, cfg.params, cfg.radio, cfg.seed,
                        workers=cfg.workers)
    header = ["label", "separation_m", "total_neighbors"]
    header += [f"tx_{m}" for m in METRICS] + [f"nb_{m}" for m in METRICS]
    body = [[r.label, r.separation, r.total_neighbors,
             *r.transmitter.as_tuple(), *r.neighbors.as_tuple()] for r in rows]
    write_csv(out / SWEEP_FILE, header, body)
    print(f"{len(rows)} sweep rows -> {out / SWEEP_FILE}")
    return 0


def cmd_lut_gen(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    grid = [int(round(v)) for v in parse_range(cfg.run.grid)]
    try:
        clusters = [int(c) for c in cfg.run.clusters.split(",") if c.strip()]
    except ValueError as exc:
        raise ConfigError(f"run.clusters: {exc}") from exc
    for c in clusters:
        if c not in (1, 2):
            raise ConfigError(f"run.clusters: cluster must be 1 or 2, got {c}")
    for c in clusters:
        t0 = time.perf_counter()
        table = generate_lut(c, cfg.params, cfg.radio, grid, cfg.run.runs_per_point,
                             cfg.run.tx_per_node, cfg.seed, cfg.workers)
        save_lut(table, out / lut_file(c))
        print(f"cluster {c}: {len(grid)} points in {time.perf_counter() - t0:.1f} s "
              f"-> {out / lut_file(c)}")
    return 0


def _tables(cfg: RunConfig, args):
    paths = []
    for c, given in ((1, args.lut1), (2, args.lut2)):
        p = Path(given) if given else Path(cfg.out) / lut_file(c)
        if not p.exists():
            raise ConfigError(f"cluster-{c} lookup table not found: {p} (run lut-gen or pass --lut{c})")
        paths.append(p)
    return load_lut(paths[0], 1), load_lut(paths[1], 2)


def _factors(args):
    return load_factors(args.factors) if args.factors else None


def cmd_estimate(cfg: RunConfig, args) -> int:
    if not args.positions:
        raise ConfigError("estimate needs --positions")
    ids, xy = read_positions(args.positions)
    lut1, lut2 = _tables(cfg, args)
    factors = _factors(args)
    extent = None
    if args.extent:
        lo_hi = parse_range(args.extent)
        if len(lo_hi) != 2 or lo_hi[1] < lo_hi[0]:
            raise ConfigError("--extent expects 'x_min,x_max'")
        extent = (lo_hi[0], lo_hi[1])
    out = _out_dir(cfg)
    t0 = time.perf_counter()
    est = estimate_positions(ids, xy, lut1, lut2, factors, extent, cfg.radio)
    elapsed = time.perf_counter() - t0

    simulated = {}
    header = ["node", "x", "y", "n_t", "n_s", "zone", "saturated"]
    if args.metrics:
        simulated = _read_metrics(args.metrics)
        header += list(METRICS)
    header += [f"{m}_naive" for m in METRICS] + [f"{m}_est" for m in METRICS]
    rows = []
    for k, node in enumerate(ids):
        row = [node, xy[k, 0], xy[k, 1], est.n_t[k], est.n_s[k], est.zone[k], est.saturated[k]]
        if args.metrics:
            sim = simulated.get(int(node))
            row += list(sim) if sim else [""] * len(METRICS)
        row += [est.naive[m][k] for m in METRICS] + [est.corrected[m][k] for m in METRICS]
        rows.append(row)
    write_csv(out / ESTIMATES_FILE, header, rows)
    print(f"estimated {len(ids)} stations in {elapsed * 1e3:.2f} ms -> {out / ESTIMATES_FILE}")
    return 0


def _read_metrics(path) -> dict[int, tuple]:
    header, rows = read_table(path)
    try:
        cols = [header.index("node")] + [header.index(m) for m in METRICS]
    except ValueError as exc:
        raise InputError(f"{path}: missing column ({exc})") from exc
    out = {}
    for lineno, row in enumerate(rows, start=2):
        if row[cols[0]] == "all":
            continue
        try:
            out[int(row[cols[0]])] = tuple(float(row[c]) for c in cols[1:])
        except (ValueError, IndexError) as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from exc
    return out


def cmd_fit(cfg: RunConfig, args) -> int:
    src = Path(args.validation) if args.validation else Path(cfg.out) / VALIDATION_FILE
    header, rows = read_table(src)
    need = ["zone"] + [f"{m}_sim" for m in CORRECTED_METRICS] + [f"{m}_naive" for m in CORRECTED_METRICS]
    missing = [c for c in need if c not in header]
    if missing:
        raise InputError(f"{src}: missing columns {', '.join(missing)}")
    idx = {c: header.index(c) for c in need}
    zones, naive, sim = [], {m: [] for m in CORRECTED_METRICS}, {m: [] for m in CORRECTED_METRICS}
    for lineno, row in enumerate(rows, start=2):
        try:
            zones.append(row[idx["zone"]])
            for m in CORRECTED_METRICS:
                naive[m].append(float(row[idx[f"{m}_naive"]]))
                sim[m].append(float(row[idx[f"{m}_sim"]]))
        except (ValueError, IndexError) as exc:
            raise InputError(f"{src}:{lineno}: {exc}") from exc
    factors = fit_correction(naive, sim, zones)
    out = _out_dir(cfg)
    save_factors(factors, out / FACTORS_FILE)
    for m in CORRECTED_METRICS:
        print(f"{m:<11} center {factors[m, 'center']:.4f}  edge {factors[m, 'edge']:.4f}")
    print(f"-> {out / FACTORS_FILE}")
    return 0


def cmd_validate(cfg: RunConfig, args) -> int:
    lut1, lut2 = _tables(cfg, args)
    factors = _factors(args)
    out = _out_dir(cfg)
    scen = cfg.scenario.build(cfg.seed)
    res = validate(scen, lut1, lut2, cfg.run.duration, cfg.params, cfg.radio, cfg.seed, factors)
    est = res.estimates
    header = ["node", "x", "y", "n_t", "n_s", "zone"]
    for m in CORRECTED_METRICS:
        header += [f"{m}_sim", f"{m}_naive", f"{m}_est", f"{m}_ratio"]
    ratios = {m: res.ratio(m) for m in CORRECTED_METRICS}
    rows = []
    for k, node in enumerate(est.ids):
        row = [node, est.xy[k, 0], est.xy[k, 1], est.n_t[k], est.n_s[k], est.zone[k]]
        for m in CORRECTED_METRICS:
            row += [res.simulated[m][k], est.naive[m][k], est.corrected[m][k], ratios[m][k]]
        rows.append(row)
    write_csv(out / VALIDATION_FILE, header, rows)
    if res.fitted:
        save_factors(res.factors, out / FACTORS_FILE)

    lines = [f"stations {len(est.ids)}", "metric correlation reference J_naive J_corrected "
             "factor_center factor_edge"]
    for m in CORRECTED_METRICS:
        lines.append(" ".join([m, fmt(res.correlations[m]), fmt(REFERENCE_CORRELATIONS[m]),
                               fmt(res.loss_naive[m]), fmt(res.loss_corrected[m]),
                               fmt(res.factors[m, "center"]), fmt(res.factors[m, "edge"])]))
    lines.append(f"factors {'fitted on this run' if res.fitted else 'loaded from ' + str(args.factors)}")
    (out / SUMMARY_FILE).write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


HANDLERS = {
    "simulate": cmd_simulate,
    "hidden-sweep": cmd_hidden_sweep,
    "lut-gen": cmd_lut_gen,
    "estimate": cmd_estimate,
    "fit": cmd_fit,
    "validate": cmd_validate,
}

# flag dest -> configuration key
FLAG_KEYS = {
    "seed": "seed", "out": "out", "workers": "workers",
    "duration": "run.duration", "cams_per_node": "run.cams_per_node",
    "separations": "run.separations", "runs": "run.runs_per_point",
    "tx_per_node": "run.tx_per_node", "grid": "run.grid", "cluster": "run.clusters",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    common.add_argument("--seed", help="master random seed")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--workers", help="worker processes (default: number of processors)")

    p = argparse.ArgumentParser(prog="v2xperf", description="802.11p CAM performance simulator and estimator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run one scenario, write per-station metrics")
    s.add_argument("--duration", help="simulated seconds (used when cams-per-node is 0)")
    s.add_argument("--cams-per-node")

    s = sub.add_parser("hidden-sweep", parents=[common], help="two-group separation sweep")
    s.add_argument("--separations", help="'a:b:step' or comma list, metres")
    s.add_argument("--cams-per-node")
    s.add_argument("--runs", help="independent runs per point")

    s = sub.add_parser("lut-gen", parents=[common], help="generate cluster lookup tables")
    s.add_argument("--grid", help="neighbor counts, 'a:b:step' or comma list")
    s.add_argument("--runs", help="independent runs per point")
    s.add_argument("--tx-per-node")
    s.add_argument("--cluster", help="'1', '2' or '1,2'")

    s = sub.add_parser("estimate", parents=[common], help="analytical estimate from positions")
    s.add_argument("--positions", help="CSV of id,x,y")
    s.add_argument("--lut1")
    s.add_argument("--lut2")
    s.add_argument("--factors", help="correction factors file")
    s.add_argument("--extent", help="road x extent 'x_min,x_max' for zone classification")
    s.add_argument("--metrics", help="simulated metrics.csv to join")

    s = sub.add_parser("fit", parents=[common], help="fit correction factors from a validation CSV")
    s.add_argument("--validation", help="validation.csv (default: <out>/validation.csv)")

    s = sub.add_parser("validate", parents=[common], help="simulate a highway and compare with estimates")
    s.add_argument("--duration", help="simulated seconds")
    s.add_argument("--lut1")
    s.add_argument("--lut2")
    s.add_argument("--factors", help="apply these factors instead of fitting")
    return p


def config_from_args(args) -> RunConfig:
    assert args.command in COMMANDS
    file_layer = load_file(args.config) if args.config else {}
    flags = {}
    for dest, key in FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            flags[key] = str(v)
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    return build_config(args.command, file_layer, flags, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return HANDLERS[args.command](cfg, args)
    except (ConfigError, InputError, LutFormatError, EstimatorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, MetricsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
