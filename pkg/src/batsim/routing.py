"""Per-node B.A.T.M.A.N. V routing: ELP neighbor sensing, OGM flooding, next hops.

A :class:`BatmanNode` talks to the rest of the simulation only through a host
object (see :class:`Host`), which keeps the state machine testable on its own.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional, Protocol

from .metrics import (
    UINT32_MAX, Distance, LinkObservation, MetricFamily, Predictive, Throughput,
    denormalize, link_sample, normalize, theta,
)

Vec3 = tuple[float, float, float]
SEQ_MOD = 2**32


def seq_diff(a: int, b: int) -> int:
    """Serial-number difference ``a - b`` on 32-bit sequence numbers."""
    return ((a - b + 2**31) % SEQ_MOD) - 2**31


class OgmOutcome(Enum):
    UPDATED = "updated"
    REBROADCAST = "rebroadcast"
    DROPPED_DUPLICATE = "duplicate"
    DROPPED_TTL = "ttl"
    DROPPED_SELF = "self"
    IGNORED_UNKNOWN_FORWARDER = "unknown-forwarder"


class DropReason(Enum):
    NOROUTE = "noroute"
    LOOP = "loop"
    COLLISION = "collision"
    SENSITIVITY = "sensitivity"
    QUEUE = "queue"


class NoRoute(LookupError):
    pass


@dataclass
class RoutingParams:
    elp_interval: float = 0.2
    ogm_interval: float = 0.33
    jitter: float = 0.02            # timers fire at interval +- jitter
    ogm_forward_jitter: float = 0.02
    ewma_weight: float = 0.3
    ttl: int = 32
    elp_size: int = 40
    ogm_size: int = 24
    probing: bool = False
    probe_size: int = 200
    probes_per_neighbor: int = 2
    elp_window: int = 10
    seq_window: int = 64
    max_origdiff: int = 5
    route_timeout: float = 3.3
    hop_cap: int = 64
    data_header: int = 32

    @property
    def purge_timeout(self) -> float:
        return 3 * self.elp_interval + self.jitter

    def __post_init__(self):
        if self.elp_interval <= 0 or self.ogm_interval <= 0:
            raise ValueError("intervals must be positive")
        if not 0 < self.ewma_weight <= 1:
            raise ValueError("ewma_weight must be in (0, 1]")
        if self.ttl < 1 or self.hop_cap < 1:
            raise ValueError("ttl and hop_cap must be >= 1")
        if self.jitter < 0 or self.jitter >= min(self.elp_interval, self.ogm_interval):
            raise ValueError("jitter must be in [0, interval)")


@dataclass(frozen=True)
class ElpMessage:
    sender: int
    seq: int
    interval: float
    position: Optional[Vec3] = None
    predicted_position: Optional[Vec3] = None


@dataclass(frozen=True)
class OgmMessage:
    originator: int
    seq: int
    reverse_path_metric: int     # raw uint32
    ttl: int


@dataclass
class DataPacket:
    pid: int
    src: int
    dst: int
    size: int
    send_time: float
    hops: int = 0


@dataclass
class NeighborRecord:
    neighbor: int
    phi: float
    last_seen: float
    last_seq: int
    first_seq: int
    seq_mask: int = 1
    last_position: Optional[Vec3] = None
    last_predicted_position: Optional[Vec3] = None
    probe_history: deque = field(default_factory=deque)

    def delivery_ratio(self, window: int) -> float:
        span = min(window, seq_diff(self.last_seq, self.first_seq) + 1)
        return bin(self.seq_mask & ((1 << window) - 1)).count("1") / span

    def record_seq(self, seq: int, window: int) -> None:
        d = seq_diff(seq, self.last_seq)
        if d > 0:
            self.seq_mask = ((self.seq_mask << d) | 1) & ((1 << window) - 1)
            self.last_seq = seq
        elif -window < d <= 0:
            self.seq_mask |= 1 << (-d)


@dataclass
class Candidate:
    metric: float
    seq: int
    updated: float


@dataclass
class OriginatorRecord:
    originator: int
    last_seq: Optional[int] = None
    seq_mask: int = 0
    candidates: dict[int, Candidate] = field(default_factory=dict)
    best_next_hop: Optional[int] = None
    last_forwarded_seq: Optional[int] = None

    def seen(self, seq: int, width: int) -> bool:
        if self.last_seq is None:
            return False
        d = seq_diff(self.last_seq, seq)
        return 0 <= d < width and bool(self.seq_mask >> d & 1)

    def mark(self, seq: int, width: int) -> None:
        if self.last_seq is None:
            self.last_seq, self.seq_mask = seq, 1
            return
        d = seq_diff(seq, self.last_seq)
        if d > 0:
            self.seq_mask = ((self.seq_mask << d) | 1) & ((1 << width) - 1)
            self.last_seq = seq
        elif -width < d <= 0:
            self.seq_mask |= 1 << (-d)


class Host(Protocol):
    """What a node needs from the surrounding simulation."""

    def now(self) -> float: ...
    def timer(self, node: int, delay: float, action: Callable[[], None]) -> Any: ...
    def broadcast(self, node: int, kind: str, size: int, payload: Any) -> None: ...
    def unicast(self, node: int, kind: str, size: int, payload: Any, dst: int) -> bool: ...
    def position(self, node: int) -> Vec3: ...
    def predicted_position(self, node: int, tau: float) -> Vec3: ...
    def deliver_local(self, node: int, packet: DataPacket) -> None: ...
    def drop(self, node: int, packet: DataPacket, reason: DropReason) -> None: ...


class BatmanNode:
    def __init__(self, node_id: int, params: RoutingParams, family: MetricFamily, host: Host,
                 rng: random.Random, phy_rate: float = 54e6):
        self.id = node_id
        self.params = params
        self.family = family
        self.host = host
        self.rng = rng
        self.phy_rate = phy_rate
        self.neighbors: dict[int, NeighborRecord] = {}
        self.originators: dict[int, OriginatorRecord] = {}
        self.elp_seq = 0
        self.ogm_seq = 0
        self.forwarded: dict[tuple[int, int], int] = {}
        self.stats = {"elp_sent": 0, "probes_sent": 0, "ogm_sent": 0, "ogm_forwarded": 0,
                      "ogm_unknown_forwarder": 0, "purged": 0}
        self._geo = isinstance(family, (Distance, Predictive))
        self._predictive = isinstance(family, Predictive)

    # -- timers ----------------------------------------------------------

    def start(self) -> None:
        p = self.params
        self.host.timer(self.id, self.rng.uniform(0, p.elp_interval), self.emit_elp)
        self.host.timer(self.id, self.rng.uniform(0, p.ogm_interval), self.emit_ogm)

    def _jittered(self, interval: float) -> float:
        j = self.params.jitter
        return interval - j + self.rng.uniform(0, 2 * j)

    # -- ELP -------------------------------------------------------------

    def emit_elp(self) -> ElpMessage:
        p = self.params
        self.purge()
        self.elp_seq = (self.elp_seq + 1) % SEQ_MOD
        pos = pred = None
        if self._geo:
            pos = self.host.position(self.id)
            if self._predictive:
                pred = self.host.predicted_position(self.id, self.family.tau)
        msg = ElpMessage(self.id, self.elp_seq, p.elp_interval, pos, pred)
        self.host.broadcast(self.id, "elp", p.elp_size, msg)
        self.stats["elp_sent"] += 1
        if p.probing:
            for nb in list(self.neighbors):
                for _ in range(p.probes_per_neighbor):
                    self.host.unicast(self.id, "probe", p.probe_size, None, nb)
                    self.stats["probes_sent"] += 1
        self.host.timer(self.id, self._jittered(p.elp_interval), self.emit_elp)
        return msg

    def observation(self, rec: NeighborRecord) -> LinkObservation:
        p = self.params
        ratio = rec.delivery_ratio(p.elp_window)
        if p.probing and rec.probe_history:
            span = min(p.elp_window, seq_diff(rec.last_seq, rec.first_seq) + 1)
            received = ratio * span
            ratio = (received + sum(rec.probe_history)) / (span + len(rec.probe_history))
        obs = LinkObservation(elp_delivery_ratio=ratio, phy_rate=self.phy_rate,
                              phy_rate_max=self.phy_rate)
        if self._geo and rec.last_position is not None:
            here = self.host.position(self.id)
            obs.neighbor_distance = math.dist(here, rec.last_position)
            if self._predictive and rec.last_predicted_position is not None:
                there = self.host.predicted_position(self.id, self.family.tau)
                obs.neighbor_predicted_distance = math.dist(there, rec.last_predicted_position)
        return obs

    def on_elp(self, msg: ElpMessage) -> NeighborRecord:
        p = self.params
        now = self.host.now()
        rec = self.neighbors.get(msg.sender)
        fresh = rec is None
        if fresh:
            rec = NeighborRecord(msg.sender, 0.0, now, msg.seq, msg.seq)
            rec.probe_history = deque(maxlen=2 * p.probes_per_neighbor * p.elp_window)
            self.neighbors[msg.sender] = rec
        else:
            rec.record_seq(msg.seq, p.elp_window)
        rec.last_seen = now
        rec.last_position = msg.position
        rec.last_predicted_position = msg.predicted_position
        sample = link_sample(self.family, self.observation(rec))
        if fresh:
            rec.phi = sample
        else:
            w = p.ewma_weight
            rec.phi = (1 - w) * rec.phi + w * sample
        return rec

    def on_probe_attempt(self, neighbor: int, success: bool) -> None:
        rec = self.neighbors.get(neighbor)
        if rec is not None:
            rec.probe_history.append(1 if success else 0)

    def purge(self) -> list[int]:
        """Evict neighbors not heard within the purge timeout."""
        now = self.host.now()
        timeout = self.params.purge_timeout
        dead = [n for n, r in self.neighbors.items() if now - r.last_seen > timeout]
        for n in dead:
            del self.neighbors[n]
            self.stats["purged"] += 1
            for orig in self.originators.values():
                if orig.candidates.pop(n, None) is not None and orig.best_next_hop == n:
                    self._select_best(orig)
        return dead

    # -- OGM -------------------------------------------------------------

    def emit_ogm(self) -> OgmMessage:
        p = self.params
        self.ogm_seq = (self.ogm_seq + 1) % SEQ_MOD
        msg = OgmMessage(self.id, self.ogm_seq, UINT32_MAX, p.ttl)
        self.host.broadcast(self.id, "ogm", p.ogm_size, msg)
        self.stats["ogm_sent"] += 1
        self.host.timer(self.id, self._jittered(p.ogm_interval), self.emit_ogm)
        return msg

    def on_ogm(self, msg: OgmMessage, forwarder: int) -> OgmOutcome:
        p = self.params
        nb = self.neighbors.get(forwarder)
        if nb is not None:
            nb.last_seen = self.host.now()     # any frame heard proves the neighbor is in range
        if msg.originator == self.id:
            return OgmOutcome.DROPPED_SELF
        if nb is None:
            self.stats["ogm_unknown_forwarder"] += 1
            return OgmOutcome.IGNORED_UNKNOWN_FORWARDER
        orig = self.originators.get(msg.originator)
        if orig is None:
            orig = self.originators[msg.originator] = OriginatorRecord(msg.originator)
        elif seq_diff(msg.seq, orig.last_seq) < 0:
            return OgmOutcome.DROPPED_DUPLICATE

        duplicate = orig.seen(msg.seq, p.seq_window)
        psi_hat = normalize(msg.reverse_path_metric)
        psi = theta(self.family, psi_hat, nb.phi, self.observation(nb))
        orig.candidates[forwarder] = Candidate(psi, msg.seq, self.host.now())
        orig.mark(msg.seq, p.seq_window)
        self._select_best(orig)

        if orig.best_next_hop != forwarder or orig.last_forwarded_seq == msg.seq:
            return OgmOutcome.DROPPED_DUPLICATE if duplicate else OgmOutcome.UPDATED
        if msg.ttl <= 1:
            return OgmOutcome.DROPPED_TTL
        orig.last_forwarded_seq = msg.seq
        key = (msg.originator, msg.seq)
        self.forwarded[key] = self.forwarded.get(key, 0) + 1
        out = OgmMessage(msg.originator, msg.seq, denormalize(psi), msg.ttl - 1)
        delay = self.rng.uniform(0, p.ogm_forward_jitter)
        self.host.timer(self.id, delay, lambda: self.host.broadcast(self.id, "ogm", p.ogm_size, out))
        self.stats["ogm_forwarded"] += 1
        return OgmOutcome.REBROADCAST

    def _usable(self, orig: OriginatorRecord, nb: int, cand: Candidate, now: float) -> bool:
        return (nb in self.neighbors
                and seq_diff(orig.last_seq, cand.seq) < self.params.max_origdiff
                and now - cand.updated <= self.params.route_timeout)

    def _select_best(self, orig: OriginatorRecord) -> Optional[int]:
        """Argmax of the metric; ties go to the fresher OGM, then the current choice."""
        now = self.host.now()
        cur = orig.best_next_hop
        best, best_key = None, None
        for nb in sorted(orig.candidates):
            cand = orig.candidates[nb]
            if not self._usable(orig, nb, cand, now):
                continue
            key = (cand.metric, seq_diff(cand.seq, orig.last_seq), nb == cur)
            if best_key is None or key > best_key:
                best, best_key = nb, key
        orig.best_next_hop = best
        return best

    # -- data plane ------------------------------------------------------

    def next_hop(self, destination: int) -> int:
        if destination == self.id:
            return self.id
        orig = self.originators.get(destination)
        if orig is None:
            raise NoRoute(destination)
        cur = orig.best_next_hop
        cand = orig.candidates.get(cur) if cur is not None else None
        if cand is None or not self._usable(orig, cur, cand, self.host.now()):
            cur = self._select_best(orig)
        if cur is None:
            raise NoRoute(destination)
        return cur

    def path_metric(self, destination: int) -> Optional[float]:
        orig = self.originators.get(destination)
        if orig is None or orig.best_next_hop is None:
            return None
        return orig.candidates[orig.best_next_hop].metric

    def forward_data(self, packet: DataPacket) -> Optional[int]:
        """Deliver locally or hand the packet to the MAC toward its next hop."""
        if packet.dst == self.id:
            self.host.deliver_local(self.id, packet)
            return self.id
        if packet.hops >= self.params.hop_cap:
            self.host.drop(self.id, packet, DropReason.LOOP)
            return None
        try:
            nh = self.next_hop(packet.dst)
        except NoRoute:
            self.host.drop(self.id, packet, DropReason.NOROUTE)
            return None
        packet.hops += 1
        if not self.host.unicast(self.id, "data", packet.size + self.params.data_header,
                                 packet, nh):
            self.host.drop(self.id, packet, DropReason.QUEUE)
            return None
        return nh

    def routing_table(self) -> list[tuple[int, int, float]]:
        rows = []
        now = self.host.now()
        for dest in sorted(self.originators):
            orig = self.originators[dest]
            cur = orig.best_next_hop
            cand = orig.candidates.get(cur) if cur is not None else None
            if cand is not None and self._usable(orig, cur, cand, now):
                rows.append((dest, cur, cand.metric))
        return rows
