"""Event-driven CSMA/CA + EDCA simulator for periodic broadcast CAMs.

Time is kept in integer microseconds. The channel is modelled per station:
every station keeps its own busy counter driven by the transmissions it can
sense (received power at or above the carrier-sense floor), so hidden
stations are a natural consequence of geometry.

CAM ``k`` of a node is generated at ``phase + k * period + u`` where the phase
is drawn once per node and ``u`` is a fresh offset in ``[0, cam_jitter *
period)``; the jitter keeps strictly periodic sources from phase-locking.

Access rule for a new CAM at time ``t`` on station ``j``:

* medium idle at ``j`` for at least the current interframe gap -> transmit
  at ``t`` (delay 0);
* otherwise the packet is deferred: a back-off is drawn uniformly from
  ``0..cw_min`` slots, frozen while the medium is busy, resumed one gap
  after the medium goes idle, and the frame goes out when it reaches 0.

The gap is AIFS, or the EIFS-extended gap if the last busy period contained
a frame the station sensed but failed to decode. A transmission that starts
at ``t`` is not yet visible to anyone at ``t`` (carrier-sense latency), so
two stations whose back-off ends in the same slot both transmit.

A frame is received by a station iff the station was not transmitting during
the frame, the frame is above the decode floor, no other frame the station
can sense overlaps it in time, and the SINR against the linear sum of every
overlapping interferer stays above threshold.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .radio import Radio, db_to_mw, reception_ok

_END, _EXPIRE, _GEN = 0, 1, 2
_NEVER = -(10**15)


@dataclass(frozen=True)
class MacPhyParams:
    tx_power: float = 17.0  # dBm
    packet_length: int = 450  # bytes
    cam_rate: float = 10.0  # Hz
    channel_width: float = 10.0  # MHz
    header_rate: float = 3.0  # Mbps, BPSK
    payload_rate: float = 6.0  # Mbps, QPSK
    cw_min: int = 15
    aifsn: int = 7
    slot: int = 13  # us
    sifs: int = 32  # us
    eifs: int = 120  # us
    plcp_overhead: int = 40  # us, preamble + SIGNAL at 10 MHz
    eifs_mode: str = "replace"  # "replace": eifs + aifsn*slot; "append": aifs + eifs
    cam_jitter: float = 0.5  # per-CAM generation offset window, fraction of the period

    def __post_init__(self):
        for name in ("packet_length", "cam_rate", "channel_width", "header_rate",
                     "payload_rate", "slot", "sifs", "eifs"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.cw_min < 0 or self.aifsn < 0:
            raise ValueError("cw_min and aifsn must be non-negative")
        for name in ("slot", "sifs", "eifs", "plcp_overhead", "cw_min", "aifsn"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ValueError(f"{name} must be integral")
        if not 0.0 <= self.cam_jitter < 1.0:
            raise ValueError("cam_jitter must lie in [0, 1)")
        if self.eifs_mode not in ("replace", "append"):
            raise ValueError(f"unknown eifs_mode {self.eifs_mode!r}")

    @property
    def aifs(self) -> int:
        return self.sifs + self.aifsn * self.slot

    @property
    def eifs_gap(self) -> int:
        if self.eifs_mode == "append":
            return self.aifs + self.eifs
        return self.eifs + self.aifsn * self.slot

    @property
    def airtime(self) -> int:
        return self.plcp_overhead + math.ceil(self.packet_length * 8 / self.payload_rate)

    @property
    def cam_period(self) -> int:
        return round(1e6 / self.cam_rate)

    @property
    def jitter_window(self) -> int:
        return int(self.cam_jitter * self.cam_period)


@dataclass(frozen=True)
class Node:
    """A station. Passive stations (``transmits=False``) only listen."""

    id: int
    x: float
    y: float = 0.0
    transmits: bool = True
    receiver: Optional[int] = None  # id of the paired receiver used for loss
    first_request: Optional[int] = None  # us; random phase when None


@dataclass(slots=True)
class PacketRecord:
    tx_node: int
    seq: int
    requested_at: int
    granted_at: Optional[int] = None
    delay: int = 0
    collided: bool = False
    received_ok: dict = field(default_factory=dict)
    dropped: bool = False


def sense_busy(position, active_positions: Iterable, radio: Radio) -> bool:
    """True iff any active transmitter is heard at or above the carrier-sense floor."""
    x, y = position
    for ax, ay in active_positions:
        d = math.hypot(ax - x, ay - y)
        if radio.senses(radio.rx_power(max(d, radio.model.d0))):
            return True
    return False


def adjudicate_reception(tx_position, rx_position, interferer_positions: Iterable,
                         radio: Radio) -> bool:
    """Scalar reception rule for one frame against time-overlapping interferers."""

    def power(a, b):
        return radio.rx_power(max(math.dist(a, b), radio.model.d0))

    signal = power(tx_position, rx_position)
    if not radio.decodable(signal):
        return False
    interference = 0.0
    for pos in interferer_positions:
        p = power(pos, rx_position)
        if radio.senses(p):
            return False
        interference += db_to_mw(p)
    return reception_ok(radio.budget, signal, interference, radio.budget.noise_floor)


def contention_gap(params: MacPhyParams, sensed_undecodable: bool) -> int:
    """Idle gap required before access or back-off countdown."""
    return params.eifs_gap if sensed_undecodable else params.aifs


class _Frame:
    __slots__ = ("tx", "start", "overlaps", "record")

    def __init__(self, tx, start, record):
        self.tx = tx
        self.start = start
        self.overlaps = []
        self.record = record


def run_simulation(
    nodes: Sequence[Node],
    params: MacPhyParams | None = None,
    radio: Radio | None = None,
    duration: float | None = None,
    seed: int = 0,
    *,
    cams_per_node: int | None = None,
    backoff: Callable[[int], int] | None = None,
    loss_receivers: str = "paired",
) -> list[PacketRecord]:
    """Simulate broadcast CAM traffic and return one record per generated CAM.

    Either ``duration`` (seconds) or ``cams_per_node`` fixes the traffic volume;
    each transmitting node generates ``floor(duration * cam_rate)`` CAMs. The
    run continues after the last generation until every CAM is resolved.
    ``backoff`` overrides the random back-off draw (called with the node id).
    ``loss_receivers`` is ``"paired"`` (the node's receiver only) or ``"all"``
    (every station inside transmission range).
    """
    params = params or MacPhyParams()
    radio = radio or Radio()
    if not nodes:
        raise ValueError("at least one node is required")
    ids = [nd.id for nd in nodes]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate node ids")
    if loss_receivers not in ("paired", "all"):
        raise ValueError(f"unknown loss_receivers {loss_receivers!r}")
    if cams_per_node is None:
        if duration is None or not duration > 0:
            raise ValueError("duration must be positive")
        cams_per_node = int(math.floor(duration * params.cam_rate + 1e-9))
    if cams_per_node < 0:
        raise ValueError("cams_per_node must be non-negative")

    nodes = sorted(nodes, key=lambda nd: nd.id)
    ids = [nd.id for nd in nodes]
    index = {nid: k for k, nid in enumerate(ids)}
    xy = np.array([(nd.x, nd.y) for nd in nodes], dtype=float)
    if not np.isfinite(xy).all():
        raise ValueError("node positions must be finite")
    n = len(nodes)

    p_dbm = radio.rx_power_matrix(xy)
    sense = radio.senses(p_dbm)
    np.fill_diagonal(sense, True)
    decod = radio.decodable(p_dbm)
    np.fill_diagonal(decod, False)
    p_mw = 10.0 ** (p_dbm / 10.0)
    np.fill_diagonal(p_mw, 0.0)
    noise_mw = db_to_mw(radio.budget.noise_floor)
    thr = 10.0 ** ((radio.budget.sinr_threshold - 1e-9) / 10.0)
    clean_ok = decod & (p_mw >= thr * noise_mw)
    sense_idx = [np.flatnonzero(sense[i]) for i in range(n)]

    recv: list[list[int]] = []
    for i, nd in enumerate(nodes):
        if loss_receivers == "all":
            recv.append([int(r) for r in np.flatnonzero(decod[i])])
        elif nd.receiver is None:
            recv.append([])
        else:
            if nd.receiver not in index:
                raise ValueError(f"node {nd.id}: unknown receiver {nd.receiver}")
            recv.append([index[nd.receiver]])

    rng = np.random.default_rng(seed)
    period = params.cam_period
    jitter = params.jitter_window
    airtime = params.airtime
    slot = params.slot
    aifs, eifs_gap = params.aifs, params.eifs_gap
    cw = params.cw_min

    if backoff is None:
        def draw(i):
            return int(rng.integers(0, cw + 1))
    else:
        def draw(i):
            b = int(backoff(ids[i]))
            if not 0 <= b <= cw:
                raise ValueError(f"back-off {b} outside [0, {cw}]")
            return b

    busy = np.zeros(n, dtype=np.int64)
    busy_since = np.full(n, _NEVER, dtype=np.int64)
    idle_since = np.full(n, _NEVER, dtype=np.int64)
    gap = np.full(n, aifs, dtype=np.int64)
    eifs_flag = np.zeros(n, dtype=bool)
    transmitting = np.zeros(n, dtype=bool)

    pending: list[Optional[PacketRecord]] = [None] * n
    deferring = np.zeros(n, dtype=bool)
    scheduled = np.zeros(n, dtype=bool)
    counter = np.zeros(n, dtype=np.int64)
    resume = np.zeros(n, dtype=np.int64)
    expiry = np.zeros(n, dtype=np.int64)
    version = [0] * n

    records: list[PacketRecord] = []
    active: dict[int, _Frame] = {}
    heap: list[tuple] = []
    next_fid = 0
    seqs = [0] * n

    base = [0] * n

    def offset():
        return int(rng.integers(0, jitter)) if jitter > 0 else 0

    for i, nd in enumerate(nodes):
        if not nd.transmits or cams_per_node == 0:
            continue
        phase = nd.first_request if nd.first_request is not None else int(rng.integers(0, period))
        base[i] = phase
        heapq.heappush(heap, (phase + offset(), _GEN, i, 0))

    def schedule(j, now):
        resume[j] = idle_since[j] + gap[j]
        expiry[j] = resume[j] + counter[j] * slot
        scheduled[j] = True
        version[j] += 1
        heapq.heappush(heap, (int(expiry[j]), _EXPIRE, j, version[j]))

    def start_frame(i, now, rec):
        nonlocal next_fid
        rec.granted_at = now
        rec.delay = now - rec.requested_at
        frame = _Frame(i, now, rec)
        for g in active.values():
            g.overlaps.append(i)
            frame.overlaps.append(g.tx)
        fid = next_fid
        next_fid += 1
        active[fid] = frame
        transmitting[i] = True
        s = sense_idx[i]
        newly = s[busy[s] == 0]
        busy_since[newly] = now
        busy[s] += 1
        hit = newly[scheduled[newly]]
        for j in hit:
            if expiry[j] == now:
                continue  # same-slot expiry: transmits anyway
            if now > resume[j]:
                counter[j] -= (now - resume[j]) // slot
            scheduled[j] = False
            version[j] += 1
        heapq.heappush(heap, (now + airtime, _END, i, fid))

    def end_frame(now, fid):
        frame = active.pop(fid)
        i = frame.tx
        ov = frame.overlaps
        if ov:
            interference = p_mw[ov].sum(axis=0)
            clash = sense[ov].any(axis=0)
            clash[ov] = True
            ok = decod[i] & ~clash & (p_mw[i] >= thr * (noise_mw + interference))
            missed = sense[i] & ~ok
            missed[ov] = False
        else:
            ok = clean_ok[i]
            missed = sense[i] & ~ok
        missed[i] = False
        eifs_flag[missed] = True
        frame.record.received_ok = {ids[r]: bool(ok[r]) for r in recv[i]}
        transmitting[i] = False

        s = sense_idx[i]
        busy[s] -= 1
        newly = s[busy[s] == 0]
        idle_since[newly] = now
        gap[newly] = np.where(eifs_flag[newly], eifs_gap, aifs)
        eifs_flag[newly] = False
        for j in newly[deferring[newly]]:
            schedule(j, now)

    def request(j, now, k):
        old = pending[j]
        if old is not None:
            old.delay = now - old.requested_at
            old.dropped = True
            old.received_ok = {ids[r]: False for r in recv[j]}
            pending[j] = None
            deferring[j] = False
            scheduled[j] = False
            version[j] += 1
        rec = PacketRecord(tx_node=ids[j], seq=seqs[j], requested_at=now)
        seqs[j] += 1
        records.append(rec)
        other_busy = False
        for g in active.values():
            if g.tx != j and g.start < now and sense[g.tx, j]:
                other_busy = True
                break
        if not other_busy and not transmitting[j] and now - idle_since[j] >= gap[j]:
            start_frame(j, now, rec)
        else:
            rec.collided = other_busy
            counter[j] = draw(j)
            pending[j] = rec
            deferring[j] = True
            if busy[j] == 0:
                schedule(j, now)
        if k + 1 < cams_per_node:
            heapq.heappush(heap, (base[j] + (k + 1) * period + offset(), _GEN, j, k + 1))

    while heap:
        now, kind, i, tag = heapq.heappop(heap)
        if kind == _END:
            end_frame(now, tag)
        elif kind == _EXPIRE:
            if tag != version[i] or not scheduled[i]:
                continue
            rec = pending[i]
            pending[i] = None
            deferring[i] = False
            scheduled[i] = False
            start_frame(i, now, rec)
        else:
            request(i, now, tag)

    return records
