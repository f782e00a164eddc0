"""Broadcast CAM performance on 802.11p: event-driven CSMA/CA simulation,
cluster lookup tables and a neighbor-count estimator."""

__version__ = "0.1.0"

from .estimator import CorrectionFactors, NeighborCounts, estimate, fit_correction
from .lut import LookupTable, generate_lut, load_lut, save_lut
from .mac import MacPhyParams, Node, PacketRecord, run_simulation
from .metrics import PerfMetrics, aggregate, correlation
from .radio import LinkBudget, PathLossModel, Radio, invert_range
from .scenarios import Scenario, ScenarioSpec

__all__ = [
    "CorrectionFactors", "LinkBudget", "LookupTable", "MacPhyParams", "NeighborCounts",
    "Node", "PacketRecord", "PathLossModel", "PerfMetrics", "Radio", "Scenario",
    "ScenarioSpec", "aggregate", "correlation", "estimate", "fit_correction",
    "generate_lut", "invert_range", "load_lut", "run_simulation", "save_lut",
]
