"""Discrete-event core: integer-microsecond clock, event queue and seeded RNG streams."""

from __future__ import annotations

import hashlib
import heapq
import random
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Callable

US_PER_S = 1_000_000
GLOBAL = -1


class PastEvent(ValueError):
    """Raised when an event is scheduled before the current clock."""


class EventKind(IntEnum):
    TIMER_ELAPSED = 0
    FRAME_ARRIVAL = 1
    FRAME_TX_END = 2
    MOBILITY_UPDATE = 3
    TRAFFIC_EMIT = 4
    STATS_SAMPLE = 5
    RUN_END = 6


def to_us(seconds: float) -> int:
    """Convert seconds to the engine's integer microsecond clock."""
    if seconds < 0:
        raise ValueError(f"negative time: {seconds}")
    return int(round(seconds * US_PER_S))


def to_s(us: int) -> float:
    return us / US_PER_S


class SimEvent:
    """A queued event. The object itself serves as the cancellation handle."""

    __slots__ = ("fire_at", "seq", "kind", "target", "action", "args", "state")

    PENDING, FIRED, CANCELLED = 0, 1, 2

    def __init__(self, fire_at: int, seq: int, kind: EventKind, target: int,
                 action: Callable[..., Any] | None, args: tuple):
        self.fire_at = fire_at
        self.seq = seq
        self.kind = kind
        self.target = target
        self.action = action
        self.args = args
        self.state = SimEvent.PENDING

    @property
    def pending(self) -> bool:
        return self.state == SimEvent.PENDING

    def __repr__(self) -> str:
        return (f"SimEvent(t={self.fire_at}us, seq={self.seq}, "
                f"kind={EventKind(self.kind).name}, target={self.target})")


EventHandle = SimEvent


class RngStreams:
    """Independent ``random.Random`` substreams derived from one run seed.

    Each (seed, stream_id) pair maps to its own Mersenne Twister seeded from a
    SHA-256 digest, so adding draws to one concern never shifts another.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._streams: dict[tuple, random.Random] = {}

    def stream(self, stream_id: str, *sub: int) -> random.Random:
        key = (stream_id, *sub)
        rng = self._streams.get(key)
        if rng is None:
            label = ":".join([str(self.seed), stream_id, *map(str, sub)])
            digest = hashlib.sha256(label.encode()).digest()
            rng = random.Random(int.from_bytes(digest[:16], "little"))
            self._streams[key] = rng
        return rng


@dataclass
class RunReport:
    end_time: float
    events_fired: int
    events_cancelled: int
    events_pending: int
    per_kind: dict[str, int]
    trace_hash: str
    kpi: dict[str, Any] = field(default_factory=dict)


class Simulator:
    """Single-threaded event loop over integer microseconds.

    Events with equal ``fire_at`` fire in scheduling order. Every fired event
    is folded into a running BLAKE2 digest, which serves as the trace hash.
    """

    def __init__(self):
        self.now = 0
        self._queue: list[tuple[int, int, SimEvent]] = []
        self._seq = 0
        self.scheduled = 0
        self.cancelled = 0
        self.fired = 0
        self._per_kind = [0] * len(EventKind)
        self._hash = hashlib.blake2b(digest_size=16)
        self._pack = struct.Struct("<qBi").pack

    @property
    def time(self) -> float:
        """Current clock in seconds."""
        return self.now / US_PER_S

    @property
    def pending(self) -> int:
        return self.scheduled - self.cancelled - self.fired

    def schedule(self, fire_at: int, kind: EventKind, target: int = GLOBAL,
                 action: Callable[..., Any] | None = None, *args: Any) -> SimEvent:
        if fire_at < self.now:
            raise PastEvent(f"fire_at={fire_at}us is before clock {self.now}us")
        seq = self._seq
        self._seq = seq + 1
        ev = SimEvent(fire_at, seq, kind, target, action, args)
        heapq.heappush(self._queue, (fire_at, seq, ev))
        self.scheduled += 1
        return ev

    def schedule_in(self, delay: float, kind: EventKind, target: int = GLOBAL,
                    action: Callable[..., Any] | None = None, *args: Any) -> SimEvent:
        return self.schedule(self.now + to_us(delay), kind, target, action, *args)

    def cancel(self, handle: SimEvent) -> bool:
        if handle.state != SimEvent.PENDING:
            return False
        handle.state = SimEvent.CANCELLED
        self.cancelled += 1
        return True

    def mix(self, *values: int) -> None:
        """Fold extra integers (e.g. delivered packet ids) into the trace hash."""
        self._hash.update(struct.pack(f"<{len(values)}q", *values))

    def run_until(self, end: float) -> RunReport:
        end_us = to_us(end)
        if end_us < self.now:
            raise PastEvent(f"end={end_us}us is before clock {self.now}us")
        queue = self._queue
        pop = heapq.heappop
        update = self._hash.update
        pack = self._pack
        per_kind = self._per_kind
        while queue and queue[0][0] <= end_us:
            fire_at, _, ev = pop(queue)
            if ev.state != SimEvent.PENDING:
                continue
            self.now = fire_at
            ev.state = SimEvent.FIRED
            self.fired += 1
            per_kind[ev.kind] += 1
            update(pack(fire_at, ev.kind, ev.target))
            if ev.action is not None:
                ev.action(*ev.args)
        self.now = end_us
        return self.report()

    def report(self) -> RunReport:
        return RunReport(
            end_time=self.time,
            events_fired=self.fired,
            events_cancelled=self.cancelled,
            events_pending=self.pending,
            per_kind={k.name: self._per_kind[k] for k in EventKind},
            trace_hash=self._hash.hexdigest(),
        )

    def trace_hash(self) -> str:
        return self._hash.hexdigest()
