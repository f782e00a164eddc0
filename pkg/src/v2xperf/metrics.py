"""Reduction of packet records to the four contention metrics."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import astuple, dataclass
from typing import Iterable

import numpy as np

from .mac import PacketRecord

METRICS = ("p_collision", "p_delay", "p_loss", "mean_delay")


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class PerfMetrics:
    p_collision: float = 0.0
    p_delay: float = 0.0
    p_loss: float = 0.0
    mean_delay: float = 0.0  # us, over delayed packets

    def __post_init__(self):
        for name in ("p_collision", "p_delay", "p_loss"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise MetricsError(f"{name}={v} outside [0, 1]")
        if self.mean_delay < 0:
            raise MetricsError(f"mean_delay={self.mean_delay} is negative")

    def as_tuple(self) -> tuple:
        return astuple(self)

    @classmethod
    def mean_of(cls, items: Iterable["PerfMetrics"]) -> "PerfMetrics":
        rows = np.array([m.as_tuple() for m in items], dtype=float)
        if rows.size == 0:
            raise MetricsError("nothing to average")
        return cls(*(float(v) for v in rows.mean(axis=0)))


def _reduce(records: list[PacketRecord], delayed_only: bool) -> PerfMetrics:
    n = len(records)
    delays = [r.delay for r in records if r.delay > 0]
    outcomes = [ok for r in records for ok in r.received_ok.values()]
    if delayed_only:
        mean_delay = sum(delays) / len(delays) if delays else 0.0
    else:
        mean_delay = sum(delays) / n
    return PerfMetrics(
        p_collision=sum(r.collided for r in records) / n,
        p_delay=len(delays) / n,
        p_loss=(outcomes.count(False) / len(outcomes)) if outcomes else 0.0,
        mean_delay=mean_delay,
    )


def aggregate(records: Iterable[PacketRecord], node=None, *, delayed_only: bool = True) -> PerfMetrics:
    """Metrics for one node (or a set of node ids, pooled; ``None`` pools everything).

    ``delayed_only=False`` averages the delay over every packet instead.
    """
    if node is None:
        picked = list(records)
    elif isinstance(node, (set, frozenset, list, tuple)):
        wanted = set(node)
        picked = [r for r in records if r.tx_node in wanted]
    else:
        picked = [r for r in records if r.tx_node == node]
    if not picked:
        raise MetricsError(f"no packet records for node {node!r}")
    return _reduce(picked, delayed_only)


def per_node(records: Iterable[PacketRecord], *, delayed_only: bool = True) -> dict[int, PerfMetrics]:
    by_node: dict[int, list[PacketRecord]] = defaultdict(list)
    for r in records:
        by_node[r.tx_node].append(r)
    return {nid: _reduce(recs, delayed_only) for nid, recs in sorted(by_node.items())}


def correlation(simulated, analytical) -> float:
    """Pearson correlation coefficient."""
    a = np.asarray(simulated, dtype=float)
    b = np.asarray(analytical, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise MetricsError("need two equal-length vectors with at least 2 samples")
    da, db = a - a.mean(), b - b.mean()
    denom = np.sqrt((da * da).sum() * (db * db).sum())
    if denom == 0:
        raise MetricsError("correlation undefined for a constant vector")
    return float(np.clip((da * db).sum() / denom, -1.0, 1.0))


def two_sample_close(a, b, tolerance: float, eps: float = 1e-12) -> bool:
    """Relative closeness of two sample means."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise MetricsError("both samples must be non-empty")
    ma, mb = a.mean(), b.mean()
    return bool(abs(ma - mb) <= tolerance * max(ma, mb, eps))
