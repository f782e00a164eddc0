"""Real-time performance estimate from neighbor counts and the two cluster tables.

The naive estimate adds the cluster-1 table at the count inside transmission
range to the cluster-2 table at the count in the sensing annulus; probability
sums are capped at 1. A per-metric, per-zone multiplier calibrates it against
simulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lut import LookupTable, lookup_many
from .metrics import METRICS, PerfMetrics
from .radio import Radio

CORRECTED_METRICS = ("mean_delay", "p_delay", "p_loss")
ZONES = ("center", "edge")
PROBABILITIES = ("p_collision", "p_delay", "p_loss")
FACTORS_TAG = "v2xperf-factors 1"

_REL_EPS = 1e-9


class EstimatorError(ValueError):
    pass


@dataclass(frozen=True)
class NeighborCounts:
    n_t: int = 0
    n_s: int = 0

    def __post_init__(self):
        if self.n_t < 0 or self.n_s < 0:
            raise ValueError("neighbor counts must be non-negative")


@dataclass(frozen=True)
class CorrectionFactors:
    values: dict = field(default_factory=lambda: {(m, z): 1.0 for m in CORRECTED_METRICS for z in ZONES})

    def __post_init__(self):
        missing = {(m, z) for m in CORRECTED_METRICS for z in ZONES} - set(self.values)
        if missing:
            raise EstimatorError(f"missing correction factors: {sorted(missing)}")
        for key, v in self.values.items():
            if not (np.isfinite(v) and v >= 0):
                raise EstimatorError(f"correction factor {key} must be finite and non-negative, got {v}")

    def __getitem__(self, key) -> float:
        return self.values[key]

    def factor(self, metric: str, zone: str) -> float:
        if metric not in CORRECTED_METRICS:
            return 1.0
        return self.values[metric, zone]


REFERENCE_FACTORS = CorrectionFactors({
    ("mean_delay", "center"): 1.0857, ("mean_delay", "edge"): 1.3048,
    ("p_delay", "center"): 0.7516, ("p_delay", "edge"): 0.9671,
    ("p_loss", "center"): 2.2617, ("p_loss", "edge"): 2.9121,
})


@dataclass(frozen=True)
class Estimate:
    naive: PerfMetrics
    corrected: PerfMetrics
    zone: str
    saturated: bool = False


def _distances(position, positions) -> np.ndarray:
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    return np.hypot(p[:, 0] - position[0], p[:, 1] - position[1])


def count_neighbors(position, positions, radio: Radio | None = None, *,
                    exclude_self: bool = True, full_disc: bool = False) -> NeighborCounts:
    """Neighbors within transmission range and in the sensing annulus beyond it.

    ``positions`` may include ``position`` itself; zero-distance entries are
    dropped when ``exclude_self``. ``full_disc`` counts the whole sensing disc
    for ``n_s`` instead of the annulus.
    """
    radio = radio or Radio()
    d = _distances(position, positions)
    if exclude_self:
        d = d[d > 0]
    tr = radio.transmission_range * (1 + _REL_EPS)
    sr = radio.sensing_range * (1 + _REL_EPS)
    n_t = int((d <= tr).sum())
    n_s = int((d <= sr).sum()) if full_disc else int(((d > tr) & (d <= sr)).sum())
    return NeighborCounts(n_t, n_s)


def count_all(positions, radio: Radio | None = None, *, full_disc: bool = False):
    """Vectorised counts for every station against all others: (n_t, n_s) arrays."""
    radio = radio or Radio()
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    d2 = ((p[:, None, :] - p[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    tr2 = (radio.transmission_range * (1 + _REL_EPS)) ** 2
    sr2 = (radio.sensing_range * (1 + _REL_EPS)) ** 2
    inner = (d2 <= tr2).sum(1)
    disc = (d2 <= sr2).sum(1)
    return inner, (disc if full_disc else disc - inner)


def _check_tables(lut1, lut2):
    if not isinstance(lut1, LookupTable) or not isinstance(lut2, LookupTable):
        raise EstimatorError("both cluster lookup tables must be loaded")
    if lut1.cluster != 1 or lut2.cluster != 2:
        raise EstimatorError("expected the cluster-1 table first and the cluster-2 table second")


def naive_arrays(n_t, n_s, lut1: LookupTable, lut2: LookupTable) -> dict[str, np.ndarray]:
    _check_tables(lut1, lut2)
    a = lookup_many(lut1, n_t)
    b = lookup_many(lut2, n_s)
    out = {m: a[m] + b[m] for m in METRICS}
    for m in PROBABILITIES:
        out[m] = np.minimum(1.0, out[m])
    return out


def estimate_naive(counts: NeighborCounts, lut1: LookupTable, lut2: LookupTable) -> PerfMetrics:
    arr = naive_arrays([counts.n_t], [counts.n_s], lut1, lut2)
    return PerfMetrics(*(float(arr[m][0]) for m in METRICS))


def apply_correction(naive: PerfMetrics, zone: str, factors: CorrectionFactors) -> PerfMetrics:
    if zone not in ZONES:
        raise EstimatorError(f"unknown zone {zone!r}")
    vals = {}
    for m in METRICS:
        v = factors.factor(m, zone) * getattr(naive, m)
        vals[m] = min(1.0, v) if m in PROBABILITIES else v
    return PerfMetrics(**vals)


def classify_zone(x: float, length: float, radio: Radio | None = None) -> str:
    """``edge`` when the sensing disc reaches past either end of the road."""
    radio = radio or Radio()
    r = radio.sensing_range * (1 - _REL_EPS)
    return "edge" if (x < r or x > length - r) else "center"


def estimate(position, positions, lut1, lut2, factors: CorrectionFactors | None = None,
             length: float | None = None, radio: Radio | None = None) -> Estimate:
    radio = radio or Radio()
    counts = count_neighbors(position, positions, radio)
    naive = estimate_naive(counts, lut1, lut2)
    zone = "center" if length is None else classify_zone(position[0], length, radio)
    corrected = apply_correction(naive, zone, factors or CorrectionFactors())
    saturated = counts.n_t > lut1.max_count or counts.n_s > lut2.max_count
    return Estimate(naive, corrected, zone, saturated)


def fit_correction(naive, simulated, zones) -> CorrectionFactors:
    """Least-squares multiplier per (metric, zone).

    ``naive`` and ``simulated`` map metric name -> per-node values; ``zones``
    gives each node's zone. Minimises sum((f * naive - simulated)^2), whose
    closed form is sum(naive * simulated) / sum(naive^2).
    """
    zones = np.asarray(zones)
    out = {}
    for m in CORRECTED_METRICS:
        a_all = np.asarray(naive[m], dtype=float)
        s_all = np.asarray(simulated[m], dtype=float)
        if a_all.shape != s_all.shape or a_all.shape != zones.shape:
            raise EstimatorError(f"{m}: naive, simulated and zones must have equal length")
        for z in ZONES:
            sel = zones == z
            a, s = a_all[sel], s_all[sel]
            if a.size < 2:
                raise EstimatorError(f"{m}/{z}: need at least 2 samples, got {a.size}")
            denom = float((a * a).sum())
            if denom == 0:
                raise EstimatorError(f"{m}/{z}: all naive estimates are zero, fit is degenerate")
            out[m, z] = float((a * s).sum()) / denom
    return CorrectionFactors(out)


def fit_loss(factor: float, naive, simulated) -> float:
    a = np.asarray(naive, dtype=float)
    s = np.asarray(simulated, dtype=float)
    return float(((factor * a - s) ** 2).sum())


def save_factors(factors: CorrectionFactors, path) -> None:
    lines = [f"# {FACTORS_TAG}", "metric zone factor"]
    for m in CORRECTED_METRICS:
        for z in ZONES:
            lines.append(f"{m} {z} {factors[m, z]:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_factors(path) -> CorrectionFactors:
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != f"# {FACTORS_TAG}":
        raise EstimatorError(f"{path}: missing '# {FACTORS_TAG}' header")
    if len(lines) < 2 or lines[1].split() != ["metric", "zone", "factor"]:
        raise EstimatorError(f"{path}: expected 'metric zone factor' column header")
    values = {}
    for lineno, line in enumerate(lines[2:], start=3):
        cells = line.split()
        if len(cells) != 3 or cells[0] not in CORRECTED_METRICS or cells[1] not in ZONES:
            raise EstimatorError(f"{path}:{lineno}: malformed row {line!r}")
        try:
            values[cells[0], cells[1]] = float(cells[2])
        except ValueError as exc:
            raise EstimatorError(f"{path}:{lineno}: {exc}") from exc
    return CorrectionFactors(values)
