"""CBR streams, per-run KPI accounting, and cross-seed aggregation."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from scipy import stats

DROP_REASONS = ("noroute", "loop", "collision", "sensitivity", "queue")
KPI_FIELDS = ("pdr", "mean_delay_s", "data_rate_bps")


class UnknownPacket(KeyError):
    pass


class InsufficientRuns(ValueError):
    pass


@dataclass
class StreamSpec:
    source: Optional[int]           # None draws a random pair at t=0
    destination: Optional[int]
    rate: float = 10e6              # bit/s
    packet_size: int = 1250         # bytes
    start: float = 30.0
    stop: float = 300.0

    def __post_init__(self):
        if self.rate <= 0 or self.packet_size <= 0:
            raise ValueError("rate and packet_size must be positive")

    @property
    def interval(self) -> float:
        return 8.0 * self.packet_size / self.rate


def cbr_send_times(stream: StreamSpec) -> list[float]:
    """Emission instants ``start + k * interval`` for ``t < stop``."""
    if stream.stop <= stream.start:
        return []
    n = int(math.ceil((stream.stop - stream.start) / stream.interval - 1e-9))
    return [stream.start + k * stream.interval for k in range(n)]


@dataclass
class KpiAccumulator:
    sent: dict[int, float] = field(default_factory=dict)
    delivered: set[int] = field(default_factory=set)
    dropped: dict[int, str] = field(default_factory=dict)
    drops: Counter = field(default_factory=Counter)
    delay_samples: list[float] = field(default_factory=list)
    bytes_delivered: int = 0
    duplicates: int = 0

    def record_send(self, pid: int, t: float) -> None:
        self.sent[pid] = t

    def record_delivery(self, pid: int, t_rx: float, size: int = 0) -> bool:
        """Count a delivery; returns False (and counts a duplicate) for repeats."""
        t_tx = self.sent.get(pid)
        if t_tx is None:
            raise UnknownPacket(pid)
        if pid in self.delivered:
            self.duplicates += 1
            return False
        self.delivered.add(pid)
        self.delay_samples.append(t_rx - t_tx)
        self.bytes_delivered += size
        return True

    def record_drop(self, pid: int, reason: str) -> None:
        if pid not in self.sent:
            raise UnknownPacket(pid)
        if reason not in DROP_REASONS:
            raise ValueError(f"unknown drop reason {reason!r}")
        if pid in self.delivered or pid in self.dropped:
            return
        self.dropped[pid] = reason
        self.drops[reason] += 1

    @property
    def in_flight(self) -> int:
        return len(self.sent) - len(self.delivered) - len(self.dropped)


@dataclass
class KpiRow:
    seed: int
    scenario: str
    metric_family: str
    pdr: float
    mean_delay_s: float
    data_rate_bps: float
    drops_noroute: int = 0
    drops_collision: int = 0
    drops_sensitivity: int = 0
    drops_queue: int = 0
    sent: int = 0
    delivered: int = 0
    in_flight: int = 0

    CSV_FIELDS = ("seed", "scenario", "metric_family", "pdr", "mean_delay_s", "data_rate_bps",
                  "drops_noroute", "drops_collision", "drops_sensitivity", "drops_queue")

    def csv_values(self) -> list[str]:
        return [str(self.seed), self.scenario, self.metric_family, _fmt(self.pdr),
                _fmt(self.mean_delay_s), _fmt(self.data_rate_bps), str(self.drops_noroute),
                str(self.drops_collision), str(self.drops_sensitivity), str(self.drops_queue)]


def _fmt(x: float) -> str:
    return "NA" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def finalize(acc: KpiAccumulator, interval: float, *, seed: int = 0, scenario: str = "",
             metric_family: str = "") -> KpiRow:
    """Per-run KPIs. Loop-guard drops are reported as routing (noroute) losses."""
    n = len(acc.sent)
    pdr = len(acc.delivered) / n if n else math.nan
    delay = sum(acc.delay_samples) / len(acc.delay_samples) if acc.delay_samples else math.nan
    rate = acc.bytes_delivered * 8.0 / interval if interval > 0 else math.nan
    return KpiRow(seed, scenario, metric_family, pdr, delay, rate,
                  drops_noroute=acc.drops["noroute"] + acc.drops["loop"],
                  drops_collision=acc.drops["collision"],
                  drops_sensitivity=acc.drops["sensitivity"],
                  drops_queue=acc.drops["queue"],
                  sent=n, delivered=len(acc.delivered), in_flight=acc.in_flight)


@dataclass
class Estimate:
    mean: float
    ci95: float
    n: int


@dataclass
class AggregateResult:
    scenario: str
    metric_family: str
    runs: int
    kpis: dict[str, Estimate]

    def __getitem__(self, kpi: str) -> Estimate:
        return self.kpis[kpi]


def mean_ci95(values: Sequence[float]) -> Estimate:
    """Mean and Student-t 95% half-width; NaNs are ignored."""
    xs = [v for v in values if v is not None and not math.isnan(v)]
    n = len(xs)
    if n == 0:
        return Estimate(math.nan, math.nan, 0)
    mean = math.fsum(xs) / n
    if n < 2:
        return Estimate(mean, math.nan, n)
    var = math.fsum((x - mean) ** 2 for x in xs) / (n - 1)
    half = stats.t.ppf(0.975, n - 1) * math.sqrt(var) / math.sqrt(n)
    return Estimate(mean, float(half), n)


def aggregate(rows: Iterable[KpiRow],
              kpis: Sequence[str] = KPI_FIELDS + ("drops_noroute", "drops_collision",
                                                  "drops_sensitivity", "drops_queue"),
              ) -> AggregateResult:
    rows = sorted(rows, key=lambda r: r.seed)
    if len(rows) < 2:
        raise InsufficientRuns(f"need at least 2 runs, got {len(rows)}")
    est = {k: mean_ci95([float(getattr(r, k)) for r in rows]) for k in kpis}
    return AggregateResult(rows[0].scenario, rows[0].metric_family, len(rows), est)
