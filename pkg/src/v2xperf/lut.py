"""Per-cluster lookup tables: generation, text persistence, interpolation."""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mac import MacPhyParams, run_simulation
from .metrics import METRICS, MetricsError, PerfMetrics, aggregate
from .radio import Radio
from .scenarios import PROBE_DISTANCE_M, build_collocated

FORMAT_TAG = "v2xperf-lut 1"
CLUSTER_DISTANCE_M = {1: 60.0, 2: 140.0}
DEFAULT_GRID = tuple(range(5, 205, 5))
_COLUMNS = ("n",) + METRICS


class LutFormatError(ValueError):
    pass


def _sig6(v: float) -> float:
    return float(f"{v:.6g}")


def params_hash(params: MacPhyParams, radio: Radio) -> str:
    return hashlib.sha256(repr((params, radio)).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class LookupTable:
    cluster: int
    rows: tuple  # ((n, PerfMetrics), ...), n strictly increasing, n > 0
    provenance: dict = field(default_factory=dict, compare=True)

    def __post_init__(self):
        if self.cluster not in (1, 2):
            raise LutFormatError(f"cluster must be 1 or 2, got {self.cluster}")
        rows = tuple(
            (int(n), PerfMetrics(*(_sig6(v) for v in m.as_tuple()))) for n, m in self.rows
        )
        counts = [n for n, _ in rows]
        if not counts:
            raise LutFormatError("table has no rows")
        if counts[0] <= 0 or any(b <= a for a, b in zip(counts, counts[1:])):
            raise LutFormatError(f"neighbor counts must be positive and strictly increasing: {counts}")
        object.__setattr__(self, "rows", rows)

    @property
    def counts(self) -> np.ndarray:
        return np.array([0] + [n for n, _ in self.rows], dtype=float)

    def column(self, metric: str) -> np.ndarray:
        """Metric values including the zero anchor row."""
        return np.array([0.0] + [getattr(m, metric) for _, m in self.rows])

    @property
    def max_count(self) -> int:
        return self.rows[-1][0]


def lookup(table: LookupTable, n: float) -> PerfMetrics:
    """Piecewise-linear interpolation; counts above the grid clamp to the last row."""
    if n < 0:
        raise ValueError("neighbor count must be non-negative")
    xs = table.counts
    return PerfMetrics(*(float(np.interp(n, xs, table.column(m))) for m in METRICS))


def is_saturated(table: LookupTable, n: float) -> bool:
    return n > table.max_count


def lookup_many(table: LookupTable, ns) -> dict[str, np.ndarray]:
    ns = np.asarray(ns, dtype=float)
    xs = table.counts
    return {m: np.interp(ns, xs, table.column(m)) for m in METRICS}


def _point_seed(seed: int, cluster: int, n: int, run: int) -> int:
    return int(np.random.SeedSequence([seed, cluster, n, run]).generate_state(1)[0])


def exchangeable(cluster: int, radio: Radio) -> bool:
    """True when every station of the cluster geometry sees the same channel.

    That holds when all stations decode each other and the probe decodes every
    frame; the transmitter's metrics can then be estimated from all stations.
    """
    d = CLUSTER_DISTANCE_M[cluster]
    return radio.decodable(radio.rx_power(d)) and radio.decodable(radio.rx_power(math.hypot(d, PROBE_DISTANCE_M)))


def _run_point(job):
    cluster, n, run, params, radio, tx_per_node, seed, pooled = job
    scen = build_collocated(n, CLUSTER_DISTANCE_M[cluster])
    recs = run_simulation(scen.nodes, params, radio, cams_per_node=tx_per_node,
                          seed=_point_seed(seed, cluster, n, run))
    return aggregate(recs, None if pooled else scen.transmitter)


def run_jobs(fn, jobs, workers: int | None = None):
    """Map ``fn`` over ``jobs`` preserving order; in-process when one worker."""
    workers = workers or os.cpu_count() or 1
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def generate_lut(
    cluster: int,
    params: MacPhyParams | None = None,
    radio: Radio | None = None,
    grid=DEFAULT_GRID,
    runs_per_point: int = 5,
    tx_per_node: int = 1000,
    seed: int = 0,
    workers: int | None = 1,
    pool: bool = True,
) -> LookupTable:
    """Simulate the collocated cluster geometry at every grid count and tabulate
    the transmitter's metrics, averaged over independent runs.

    With ``pool`` and an exchangeable geometry (see :func:`exchangeable`) the
    packets of every station are pooled, which estimates the same quantity with
    n + 1 times the samples.
    """
    params = params or MacPhyParams()
    radio = radio or Radio()
    grid = [int(n) for n in grid]
    if cluster not in CLUSTER_DISTANCE_M:
        raise ValueError(f"cluster must be 1 or 2, got {cluster}")
    if not grid:
        raise ValueError("grid must be non-empty")
    if 0 in grid:
        raise ValueError("grid must not contain 0; the zero row is implicit")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly ascending")
    if runs_per_point < 1 or tx_per_node < 1:
        raise ValueError("runs_per_point and tx_per_node must be positive")

    pooled = pool and exchangeable(cluster, radio)
    jobs = [(cluster, n, run, params, radio, tx_per_node, seed, pooled)
            for n in grid for run in range(runs_per_point)]
    results = run_jobs(_run_point, jobs, workers)
    rows = []
    for k, n in enumerate(grid):
        chunk = results[k * runs_per_point:(k + 1) * runs_per_point]
        rows.append((n, PerfMetrics.mean_of(chunk)))
    provenance = {
        "params_hash": params_hash(params, radio),
        "seed": str(seed),
        "runs_per_point": str(runs_per_point),
        "tx_per_node": str(tx_per_node),
        "stations": "all" if pooled else "transmitter",
    }
    return LookupTable(cluster, tuple(rows), provenance)


def monotonicity_violations(table: LookupTable, metrics=("p_delay", "p_collision", "mean_delay"),
                            rel_slack: float = 0.02) -> dict[str, list[tuple[int, int, bool]]]:
    """Adjacent-row decreases per metric as ``(n_prev, n_next, within_slack)``."""
    out = {}
    for m in metrics:
        vals = [getattr(r, m) for _, r in table.rows]
        ns = [n for n, _ in table.rows]
        bad = []
        for k in range(1, len(vals)):
            if vals[k] < vals[k - 1]:
                small = vals[k - 1] - vals[k] <= rel_slack * vals[k - 1]
                bad.append((ns[k - 1], ns[k], small))
        out[m] = bad
    return out


def save_lut(table: LookupTable, path) -> None:
    lines = [f"# {FORMAT_TAG}", f"# cluster {table.cluster}"]
    prov = dict(table.provenance)
    lines.append(f"# params_hash {prov.pop('params_hash', '-')}")
    for key in sorted(prov):
        lines.append(f"# {key} {prov[key]}")
    lines.append(" ".join(_COLUMNS))
    for n, m in table.rows:
        lines.append(" ".join([str(n)] + [f"{v:.6g}" for v in m.as_tuple()]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_lut(path, cluster: int | None = None) -> LookupTable:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise LutFormatError(f"{path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0] != f"# {FORMAT_TAG}":
        raise LutFormatError(f"{path}: missing '# {FORMAT_TAG}' header")
    header = {}
    body = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(" ")
            header[key] = value.strip()
        else:
            body.append((lineno, line.split()))
    if "cluster" not in header:
        raise LutFormatError(f"{path}: missing '# cluster' line")
    try:
        file_cluster = int(header.pop("cluster"))
    except ValueError as exc:
        raise LutFormatError(f"{path}: bad cluster value") from exc
    if cluster is not None and file_cluster != cluster:
        raise LutFormatError(f"{path}: expected cluster {cluster}, file has {file_cluster}")
    if not body or tuple(body[0][1]) != _COLUMNS:
        raise LutFormatError(f"{path}: expected column header {' '.join(_COLUMNS)}")
    rows = []
    for lineno, cells in body[1:]:
        if len(cells) != len(_COLUMNS):
            raise LutFormatError(f"{path}:{lineno}: expected {len(_COLUMNS)} columns")
        try:
            n = int(cells[0])
            values = [float(c) for c in cells[1:]]
            rows.append((n, PerfMetrics(*values)))
        except (ValueError, MetricsError) as exc:
            raise LutFormatError(f"{path}:{lineno}: {exc}") from exc
    header.setdefault("params_hash", "-")
    return LookupTable(file_cluster, tuple(rows), header)
