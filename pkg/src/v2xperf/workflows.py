"""Batch experiments built from the core modules: hidden sweep, validation, fast estimation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimator import (
    CORRECTED_METRICS,
    CorrectionFactors,
    classify_zone,
    count_all,
    fit_correction,
    fit_loss,
    naive_arrays,
)
from .lut import LookupTable, run_jobs
from .mac import MacPhyParams, run_simulation
from .metrics import METRICS, PerfMetrics, aggregate, correlation, per_node
from .radio import Radio
from .scenarios import Scenario, build_hidden_sweep

SWEEP_SEPARATIONS = tuple(range(0, 240, 20))
# Correlations reported for the full-size highway (mean delay, delay prob., loss prob.).
REFERENCE_CORRELATIONS = {"mean_delay": 0.9417, "p_delay": 0.9277, "p_loss": 0.9167}


def derive_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


@dataclass
class SweepRow:
    label: str
    separation: float
    total_neighbors: int
    transmitter: PerfMetrics
    neighbors: PerfMetrics
    runs: list = field(default_factory=list)  # per-run (tx, neighbor) metrics


def _sweep_job(job):
    total, separation, run, params, radio, cams, seed = job
    scen = build_hidden_sweep(total, separation)
    recs = run_simulation(scen.nodes, params, radio, cams_per_node=cams,
                          seed=derive_seed(seed, total, round(separation * 1000), run))
    nb = aggregate(recs, scen.neighbors) if scen.neighbors else PerfMetrics()
    return aggregate(recs, scen.transmitter), nb


def hidden_sweep(
    separations=SWEEP_SEPARATIONS,
    total_neighbors: int = 80,
    cams_per_node: int = 300,
    runs: int = 5,
    params: MacPhyParams | None = None,
    radio: Radio | None = None,
    seed: int = 0,
    references=(40, 80),
    workers: int | None = 1,
) -> list[SweepRow]:
    """Two-group separation sweep plus collocated reference populations.

    Metrics of each point are the mean over ``runs`` independent runs.
    """
    params = params or MacPhyParams()
    radio = radio or Radio()
    points = [("sweep", float(s), total_neighbors) for s in separations]
    points += [(f"ref{n}", 0.0, n) for n in references]
    jobs = [(total, sep, run, params, radio, cams_per_node, seed)
            for _, sep, total in points for run in range(runs)]
    results = run_jobs(_sweep_job, jobs, workers)
    rows = []
    for k, (label, sep, total) in enumerate(points):
        chunk = results[k * runs:(k + 1) * runs]
        rows.append(SweepRow(
            label, sep, total,
            PerfMetrics.mean_of(tx for tx, _ in chunk),
            PerfMetrics.mean_of(nb for _, nb in chunk),
            chunk,
        ))
    return rows


@dataclass
class NodeEstimates:
    """Column-wise estimates for a set of stations."""

    ids: np.ndarray
    xy: np.ndarray
    n_t: np.ndarray
    n_s: np.ndarray
    zone: np.ndarray
    saturated: np.ndarray
    naive: dict
    corrected: dict


def estimate_positions(ids, xy, lut1: LookupTable, lut2: LookupTable,
                       factors: CorrectionFactors | None = None,
                       extent: tuple[float, float] | None = None,
                       radio: Radio | None = None) -> NodeEstimates:
    """Vectorised naive + corrected estimates for every station in ``xy``.

    ``extent`` is the road's (x_min, x_max); defaults to the span of ``xy``.
    """
    radio = radio or Radio()
    factors = factors or CorrectionFactors()
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    ids = np.asarray(ids)
    n_t, n_s = count_all(xy, radio)
    naive = naive_arrays(n_t, n_s, lut1, lut2)
    if len(xy):
        lo, hi = extent if extent is not None else (xy[:, 0].min(), xy[:, 0].max())
    else:
        lo, hi = 0.0, 0.0
    zone = np.array([classify_zone(x - lo, hi - lo, radio) for x in xy[:, 0]], dtype=object)
    corrected = {}
    for m in METRICS:
        f = np.array([factors.factor(m, z) for z in zone], dtype=float)
        v = f * naive[m]
        corrected[m] = v if m == "mean_delay" else np.minimum(1.0, v)
    saturated = (n_t > lut1.max_count) | (n_s > lut2.max_count)
    return NodeEstimates(ids, xy, n_t, n_s, zone, saturated, naive, corrected)


@dataclass
class ValidationResult:
    estimates: NodeEstimates
    simulated: dict  # metric -> per-node array
    correlations: dict  # metric -> Pearson r against the naive estimate
    factors: CorrectionFactors
    fitted: bool
    loss_naive: dict  # metric -> J with factor 1
    loss_corrected: dict  # metric -> J with the applied factors

    def ratio(self, metric: str) -> np.ndarray:
        naive = self.estimates.naive[metric]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(naive > 0, self.simulated[metric] / naive, np.nan)


def validate(
    scenario: Scenario,
    lut1: LookupTable,
    lut2: LookupTable,
    duration: float,
    params: MacPhyParams | None = None,
    radio: Radio | None = None,
    seed: int = 0,
    factors: CorrectionFactors | None = None,
) -> ValidationResult:
    """Simulate the scenario, estimate every OBU analytically and compare.

    Without ``factors`` the correction factors are fitted on this run.
    """
    params = params or MacPhyParams()
    radio = radio or Radio()
    if scenario.length is None:
        raise ValueError("validation needs a scenario with a road length")
    recs = run_simulation(scenario.nodes, params, radio, duration, seed)
    sim = per_node(recs)
    obus = [nd for nd in scenario.nodes if nd.transmits]
    ids = np.array([nd.id for nd in obus])
    xy = np.array([(nd.x, nd.y) for nd in obus], dtype=float)

    simulated = {m: np.array([getattr(sim[i], m) for i in ids]) for m in METRICS}
    extent = (0.0, scenario.length)
    fitted = factors is None
    if fitted:
        est = estimate_positions(ids, xy, lut1, lut2, None, extent, radio)
        factors = fit_correction(est.naive, simulated, est.zone)
    est = estimate_positions(ids, xy, lut1, lut2, factors, extent, radio)

    correlations = {}
    for m in CORRECTED_METRICS:
        try:
            correlations[m] = correlation(simulated[m], est.naive[m])
        except ValueError:
            correlations[m] = float("nan")
    loss_naive = {m: fit_loss(1.0, est.naive[m], simulated[m]) for m in CORRECTED_METRICS}
    loss_corrected = {m: float(((est.corrected[m] - simulated[m]) ** 2).sum())
                      for m in CORRECTED_METRICS}
    return ValidationResult(est, simulated, correlations, factors, fitted, loss_naive, loss_corrected)

