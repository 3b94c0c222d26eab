"""Assemble a scenario into a runnable network and execute one seeded run."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .channel import (
    EmpiricalTable, FriisGeneralized, Nakagami, RadioConfig, load_empirical_table, max_range,
)
from .config import ScenarioConfig
from .engine import EventKind, RngStreams, RunReport, Simulator, to_us
from .mac import Frame, MacConfig, Medium, Outcome
from .metrics import make_family
from .mobility import (
    MobilityModel, Playground, RandomWaypoint, StaticMobility, grid_layout, line_layout,
    load_trace, ring_layout,
)
from .routing import BatmanNode, DataPacket, DropReason, RoutingParams
from .traffic import KpiAccumulator, KpiRow, StreamSpec, finalize

NEG_INF = -math.inf


def build_channel(cfg: ScenarioConfig):
    model = cfg["channel.model"]
    d0 = cfg["channel.reference_distance"]
    f = cfg["radio.frequency"]
    if model == "friis":
        return FriisGeneralized(cfg["channel.eta"], f, d0)
    if model == "nakagami":
        return Nakagami(cfg["channel.nakagami_m"], cfg["channel.eta"], f, d0)
    table = load_empirical_table(cfg["channel.table"])
    return EmpiricalTable(table.points, d0)


def build_radio(cfg: ScenarioConfig) -> RadioConfig:
    return RadioConfig(cfg["radio.tx_power"], cfg["radio.frequency"], cfg["radio.sensitivity"],
                       cfg["radio.tx_gain"], cfg["radio.rx_gain"])


def build_mac(cfg: ScenarioConfig) -> MacConfig:
    return MacConfig(cfg["mac.phy_rate"], cfg["mac.overhead"], cfg["mac.max_backoff"],
                     cfg["mac.retries"], cfg["mac.queue_cap"], cfg["mac.sense_delay"])


def build_routing(cfg: ScenarioConfig) -> RoutingParams:
    return RoutingParams(
        elp_interval=cfg["routing.elp_interval"], ogm_interval=cfg["routing.ogm_interval"],
        jitter=cfg["routing.jitter"], ogm_forward_jitter=cfg["routing.ogm_forward_jitter"],
        ewma_weight=cfg["routing.ewma_weight"], ttl=cfg["routing.ttl"],
        elp_size=cfg["routing.elp_size"], ogm_size=cfg["routing.ogm_size"],
        probing=cfg["routing.probing"], probe_size=cfg["routing.probe_size"],
        route_timeout=cfg["routing.route_timeout"], max_origdiff=cfg["routing.max_origdiff"],
    )


def build_mobility(cfg: ScenarioConfig, rngs: RngStreams, d_max: float) -> MobilityModel:
    n = cfg["scenario.nodes"]
    pg = Playground(cfg["playground.x"], cfg["playground.y"], cfg["playground.z"])
    kind = cfg["mobility.model"]
    if kind == "trace":
        model = load_trace(cfg["mobility.trace"])
        if model.n_nodes != n:
            raise ValueError(f"trace has {model.n_nodes} nodes, scenario.nodes is {n}")
        return model
    if kind == "static" and cfg["mobility.layout"] != "random":
        spacing = cfg["mobility.spacing"] or cfg["mobility.spacing_dmax"] * d_max
        if spacing <= 0:
            raise ValueError("static layouts need mobility.spacing or mobility.spacing_dmax")
        layout = {"line": line_layout, "ring": ring_layout, "grid": grid_layout}
        return StaticMobility(layout[cfg["mobility.layout"]](n, spacing))
    if kind == "static":
        rng = rngs.stream("mobility", -1)
        return StaticMobility([(rng.uniform(0, pg.x), rng.uniform(0, pg.y), rng.uniform(0, pg.z))
                               for _ in range(n)])
    return RandomWaypoint(n, pg, cfg["mobility.speed_min"], cfg["mobility.speed_max"],
                          lambda i: rngs.stream("mobility", i), cfg["mobility.pause"])


@dataclass
class RunResult:
    row: KpiRow
    trace_hash: str
    report: RunReport
    routes: list[tuple] = field(default_factory=list)
    diagnostics: dict[str, Any] = field(default_factory=dict)


class Network:
    """One seeded instance of a scenario; also acts as the routing host."""

    def __init__(self, cfg: ScenarioConfig, seed: int, *, record_routes: bool = False,
                 label: Optional[str] = None):
        self.cfg = cfg
        self.seed = seed
        self.label = label or cfg.label()
        self.sim = Simulator()
        self.rngs = RngStreams(seed)
        self.radio = build_radio(cfg)
        self.channel = build_channel(cfg)
        self.d_max = cfg["metric.dmax"] or max_range(self.channel, self.radio)
        self.family = make_family(cfg["metric.family"], alpha=cfg["metric.alpha"],
                                  tau=cfg["metric.tau"], d_max=self.d_max,
                                  hop_penalty=cfg["metric.hop_penalty"],
                                  use_link_quality=cfg["metric.link_quality"])
        self.mobility = build_mobility(cfg, self.rngs, self.d_max)
        self.n = cfg["scenario.nodes"]
        self.mac_cfg = build_mac(cfg)
        self._fading_rng = self.rngs.stream("channel-fading")
        self._setup_power()
        self.mac = Medium(self.sim, self.mac_cfg, self.n, self.radio.rx_sensitivity,
                          self._powers, self.rngs.stream("mac-backoff"), self._on_receive,
                          self._on_attempt, self._on_unicast_done)
        params = build_routing(cfg)
        self.nodes = [BatmanNode(i, params, self.family, self, self.rngs.stream("routing-jitter", i),
                                 self.mac_cfg.phy_rate) for i in range(self.n)]
        self.kpi = KpiAccumulator()
        self.streams = self._build_streams()
        self._pid = 0
        self.record_routes = record_routes
        self.routes: list[tuple] = []

    # -- channel ---------------------------------------------------------

    def _setup_power(self) -> None:
        ch, radio = self.channel, self.radio
        self._d0 = ch.reference_distance
        self._budget = radio.tx_power + radio.tx_gain + radio.rx_gain
        if isinstance(ch, (FriisGeneralized, Nakagami)):
            curve = ch if isinstance(ch, FriisGeneralized) else ch.mean_curve
            self._k = self._budget - curve.reference_loss
            self._ten_eta = 10.0 * curve.eta
        self._fading = isinstance(ch, Nakagami)
        self._static = self.mobility.max_speed == 0.0
        self._power_cache: dict[int, list[float]] = {}
        self._pos_time = -1
        self._pos: list = []

    def positions(self) -> list:
        if self._pos_time != self.sim.now:
            self._pos = self.mobility.positions_at(self.sim.now / 1e6)
            self._pos_time = self.sim.now
        return self._pos

    def _powers(self, sender: int) -> list[float]:
        if self._static and not self._fading:
            cached = self._power_cache.get(sender)
            if cached is not None:
                return cached
        pos = self.positions()
        ps = pos[sender]
        d0 = self._d0
        out = []
        log10 = math.log10
        ch = self.channel
        if isinstance(ch, EmpiricalTable):
            budget = self._budget
            for r, pr in enumerate(pos):
                if r == sender:
                    out.append(NEG_INF)
                else:
                    out.append(budget - ch.mean_loss(max(math.dist(ps, pr), d0)))
        elif self._fading:
            k, te = self._k, self._ten_eta
            draw = self.channel.fading_gain
            rng = self._fading_rng
            for r, pr in enumerate(pos):
                if r == sender:
                    out.append(NEG_INF)
                else:
                    d = max(math.dist(ps, pr), d0) / d0
                    out.append(k - te * log10(d) + 10.0 * log10(draw(rng)))
        else:
            k, te = self._k, self._ten_eta
            for r, pr in enumerate(pos):
                if r == sender:
                    out.append(NEG_INF)
                else:
                    out.append(k - te * log10(max(math.dist(ps, pr), d0) / d0))
        if self._static and not self._fading:
            self._power_cache[sender] = out
        return out

    # -- host interface for routing nodes --------------------------------

    def now(self) -> float:
        return self.sim.now / 1e6

    def timer(self, node, delay, action):
        return self.sim.schedule(self.sim.now + to_us(delay), EventKind.TIMER_ELAPSED, node, action)

    def broadcast(self, node, kind, size, payload):
        return self.mac.try_send(node, Frame(kind, size, payload))

    def unicast(self, node, kind, size, payload, dst):
        return self.mac.try_send(node, Frame(kind, size, payload, dst))

    def position(self, node):
        return self.positions()[node]

    def predicted_position(self, node, tau):
        return self.mobility.predict_position(node, self.sim.now / 1e6, tau)

    def deliver_local(self, node, packet: DataPacket):
        if self.kpi.record_delivery(packet.pid, self.now(), packet.size):
            self.sim.mix(packet.pid, packet.hops)

    def drop(self, node, packet: DataPacket, reason: DropReason):
        self.kpi.record_drop(packet.pid, reason.value)

    # -- MAC callbacks ---------------------------------------------------

    def _on_receive(self, receiver: int, frame: Frame, sender: int) -> None:
        kind = frame.kind
        node = self.nodes[receiver]
        if kind == "data":
            node.forward_data(frame.payload)
        elif kind == "ogm":
            node.on_ogm(frame.payload, sender)
        elif kind == "elp":
            node.on_elp(frame.payload)

    def _on_attempt(self, sender: int, frame: Frame, outcome: Outcome) -> None:
        if frame.kind == "probe":
            self.nodes[sender].on_probe_attempt(frame.dst, outcome is Outcome.RECEIVED)

    def _on_unicast_done(self, sender: int, frame: Frame, ok: bool, outcome: Outcome) -> None:
        if frame.kind == "data" and not ok:
            reason = (DropReason.COLLISION if outcome is Outcome.COLLIDED
                      else DropReason.SENSITIVITY)
            self.drop(sender, frame.payload, reason)

    # -- traffic ---------------------------------------------------------

    def _build_streams(self) -> list[StreamSpec]:
        cfg = self.cfg
        rng = self.rngs.stream("traffic-jitter")
        streams = []
        for _ in range(cfg["traffic.streams"]):
            src, dst = cfg["traffic.source"], cfg["traffic.destination"]
            if src < 0:
                src = rng.randrange(self.n)
                while dst >= 0 and src == dst:
                    src = rng.randrange(self.n)
            if dst < 0:
                dst = rng.randrange(self.n - 1)
                if dst >= src:
                    dst += 1
            streams.append(StreamSpec(src, dst, cfg["traffic.rate"], cfg["traffic.packet_size"],
                                      cfg["traffic.start"], cfg["traffic.stop"]))
        return streams

    def _emit(self, stream: StreamSpec, k: int) -> None:
        pid = self._pid
        self._pid += 1
        now = self.now()
        packet = DataPacket(pid, stream.source, stream.destination, stream.packet_size, now)
        self.kpi.record_send(pid, now)
        self.nodes[stream.source].forward_data(packet)
        nxt = stream.start + (k + 1) * stream.interval
        if nxt < stream.stop:
            self.sim.schedule(to_us(nxt), EventKind.TRAFFIC_EMIT, stream.source,
                              self._emit, stream, k + 1)

    def _sample_routes(self) -> None:
        t = self.now()
        for node in self.nodes:
            for dest, nh, metric in node.routing_table():
                self.routes.append((t, node.id, dest, nh, metric))
        self.sim.schedule_in(self.cfg["output.route_dump_interval"], EventKind.STATS_SAMPLE,
                             -1, self._sample_routes)

    # -- run -------------------------------------------------------------

    def run(self, duration: Optional[float] = None) -> RunResult:
        duration = self.cfg["scenario.duration"] if duration is None else duration
        for node in self.nodes:
            node.start()
        for s in self.streams:
            if s.stop > s.start:
                self.sim.schedule(to_us(s.start), EventKind.TRAFFIC_EMIT, s.source,
                                  self._emit, s, 0)
        if self.record_routes:
            self.sim.schedule_in(self.cfg["output.route_dump_interval"], EventKind.STATS_SAMPLE,
                                 -1, self._sample_routes)
        self.sim.schedule(to_us(duration), EventKind.RUN_END)
        report = self.sim.run_until(duration)
        active = [s for s in self.streams if s.stop > s.start]
        if active:
            interval = min(max(s.stop for s in active), duration) - min(s.start for s in active)
        else:
            interval = 0.0
        row = finalize(self.kpi, interval, seed=self.seed, scenario=self.label,
                       metric_family=self.family.name)
        report.kpi = {"pdr": row.pdr, "mean_delay_s": row.mean_delay_s,
                      "data_rate_bps": row.data_rate_bps, "sent": row.sent,
                      "delivered": row.delivered, "in_flight": row.in_flight}
        diag = {"tx": self.mac.tx_count, "collided_tx": self.mac.collisions,
                "queue_drops": self.mac.queue_drops, "loop_drops": self.kpi.drops["loop"],
                "duplicates": self.kpi.duplicates, "d_max": self.d_max,
                "streams": [(s.source, s.destination) for s in self.streams]}
        for node in self.nodes:
            for k, v in node.stats.items():
                diag[k] = diag.get(k, 0) + v
        return RunResult(row, report.trace_hash, report, self.routes, diag)


def run_scenario(cfg: ScenarioConfig, seed: int, *, label: Optional[str] = None,
                 record_routes: bool = False) -> RunResult:
    return Network(cfg, seed, record_routes=record_routes, label=label).run()
