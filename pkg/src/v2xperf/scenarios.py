"""Experiment geometries: collocated clusters, two-group hidden sweep, highway."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mac import Node

PROBE_DISTANCE_M = 15.0
PAIR_SPACING_M = 5.0
LANE_WIDTH_M = 3.5

KINDS = ("collocated", "hidden_sweep", "highway")


@dataclass
class Scenario:
    """Stations plus the role each one plays in the experiment."""

    nodes: list[Node]
    transmitter: int | None = None
    neighbors: list[int] = field(default_factory=list)
    receivers: list[int] = field(default_factory=list)
    length: float | None = None  # road extent along x, highway only

    @property
    def transmitting(self) -> list[Node]:
        return [nd for nd in self.nodes if nd.transmits]


def build_collocated(n_neighbors: int, neighbor_distance: float, seed: int = 0) -> Scenario:
    """Transmitter at the origin, probe receiver 15 m away, all neighbors stacked at one point.

    The geometry is fixed; ``seed`` is accepted for a uniform builder signature.
    """
    if n_neighbors < 0 or neighbor_distance < 0:
        raise ValueError("n_neighbors and neighbor_distance must be non-negative")
    rx = 1
    nodes = [Node(0, 0.0, 0.0, receiver=rx), Node(rx, 0.0, PROBE_DISTANCE_M, transmits=False)]
    neighbors = list(range(2, 2 + n_neighbors))
    nodes += [Node(k, float(neighbor_distance), 0.0, receiver=rx) for k in neighbors]
    return Scenario(nodes, transmitter=0, neighbors=neighbors, receivers=[rx])


def build_hidden_sweep(total_neighbors: int = 80, separation: float = 0.0, seed: int = 0) -> Scenario:
    """Tx/Rx pair centred on the origin, two equal neighbor groups at +-separation/2.

    Every station's loss is judged at the central receiver.
    """
    if total_neighbors < 0 or total_neighbors % 2:
        raise ValueError("total_neighbors must be a non-negative even number")
    if separation < 0:
        raise ValueError("separation must be non-negative")
    rx = 1
    half = PAIR_SPACING_M / 2
    nodes = [Node(0, -half, 0.0, receiver=rx), Node(rx, half, 0.0, transmits=False)]
    neighbors = []
    for k in range(total_neighbors):
        nid = 2 + k
        x = -separation / 2 if k < total_neighbors // 2 else separation / 2
        nodes.append(Node(nid, float(x), 0.0, receiver=rx))
        neighbors.append(nid)
    return Scenario(nodes, transmitter=0, neighbors=neighbors, receivers=[rx])


def build_highway(
    length: float = 1500.0,
    lanes_per_direction: int = 3,
    n_obu: int = 500,
    seed: int = 0,
    lane_width: float = LANE_WIDTH_M,
) -> Scenario:
    """Static OBUs uniformly spread over a multi-lane road, each with a nearby probe receiver.

    OBU ids are ``0..n_obu-1``; the probe of OBU ``k`` has id ``n_obu + k``.
    """
    if not length > 0 or lanes_per_direction < 1 or n_obu < 1 or not lane_width > 0:
        raise ValueError("length, lanes, n_obu and lane_width must be positive")
    rng = np.random.default_rng(seed)
    n_lanes = 2 * lanes_per_direction
    width = n_lanes * lane_width
    x = rng.uniform(0.0, length, n_obu)
    lane = rng.integers(0, n_lanes, n_obu)
    y = (lane + 0.5) * lane_width
    # uniform(0, 15] via 15 * (1 - U), U in [0, 1)
    r = PROBE_DISTANCE_M * (1.0 - rng.random(n_obu))
    bearing = rng.uniform(0.0, 2 * math.pi, n_obu)
    rx_x = np.clip(x + r * np.cos(bearing), 0.0, length)
    rx_y = np.clip(y + r * np.sin(bearing), 0.0, width)

    nodes = [Node(k, float(x[k]), float(y[k]), receiver=n_obu + k) for k in range(n_obu)]
    nodes += [Node(n_obu + k, float(rx_x[k]), float(rx_y[k]), transmits=False) for k in range(n_obu)]
    return Scenario(nodes, neighbors=list(range(n_obu)),
                    receivers=list(range(n_obu, 2 * n_obu)), length=float(length))


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str = "collocated"
    n_neighbors: int = 40
    neighbor_distance: float = 60.0
    total_neighbors: int = 80
    separation: float = 0.0
    length: float = 1500.0
    lanes_per_direction: int = 3
    n_obu: int = 500
    lane_width: float = LANE_WIDTH_M
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")

    def build(self, seed: int | None = None) -> Scenario:
        seed = self.seed if seed is None else seed
        if self.kind == "collocated":
            return build_collocated(self.n_neighbors, self.neighbor_distance, seed)
        if self.kind == "hidden_sweep":
            return build_hidden_sweep(self.total_neighbors, self.separation, seed)
        return build_highway(self.length, self.lanes_per_direction, self.n_obu, seed, self.lane_width)
