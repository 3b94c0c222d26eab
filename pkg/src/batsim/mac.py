"""A simplified 802.11g-like shared broadcast medium.

Carrier sensing uses the receiver sensitivity as the busy threshold. Any two
transmissions that overlap in time and are both heard at a receiver destroy
each other there (no capture). Unicast frames are retried with a fresh
backoff; broadcasts are sent once.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Optional

from .engine import EventKind, Simulator, to_us


class Outcome(Enum):
    RECEIVED = "received"
    BELOW_SENSITIVITY = "sensitivity"
    COLLIDED = "collision"


@dataclass(frozen=True)
class MacConfig:
    phy_rate: float = 54e6              # bit/s
    per_frame_overhead: float = 50e-6   # preamble + IFS lump, seconds
    max_backoff: float = 0.5e-3         # seconds
    unicast_retries: int = 3
    queue_cap: int = 100
    sense_delay: float = 5e-6           # time before a new transmission is sensed

    def __post_init__(self):
        if self.phy_rate <= 0:
            raise ValueError("phy_rate must be positive")
        if self.per_frame_overhead < 0 or self.sense_delay < 0:
            raise ValueError("overhead and sense_delay must be >= 0")
        if self.max_backoff <= 0:
            raise ValueError("max_backoff must be positive")
        if self.unicast_retries < 0 or self.queue_cap < 1:
            raise ValueError("retries must be >= 0 and queue_cap >= 1")


def airtime(cfg: MacConfig, frame_bytes: int) -> float:
    """Seconds on air for a frame of ``frame_bytes``."""
    if frame_bytes <= 0:
        raise ValueError("frame_bytes must be positive")
    return cfg.per_frame_overhead + 8.0 * frame_bytes / cfg.phy_rate


class Frame:
    __slots__ = ("kind", "size", "payload", "dst", "attempts")

    def __init__(self, kind: str, size: int, payload: Any = None, dst: Optional[int] = None):
        self.kind = kind
        self.size = size
        self.payload = payload
        self.dst = dst          # None for broadcast
        self.attempts = 0

    def __repr__(self):
        return f"Frame({self.kind}, {self.size}B, dst={self.dst})"


class Transmission:
    __slots__ = ("sender", "frame", "start", "end", "powers", "heard", "collided")

    def __init__(self, sender, frame, start, end, powers, heard):
        self.sender = sender
        self.frame = frame
        self.start = start
        self.end = end
        self.powers = powers        # dBm per node index; -inf for the sender
        self.heard = heard          # set of nodes with power >= sensitivity
        self.collided: set[int] = set()


class Medium:
    """Shared channel state and per-node transmit queues.

    ``power_fn(sender)`` returns received powers (dBm) at every node for a
    transmission starting now. Callbacks:

    * ``on_receive(receiver, frame, sender)``
    * ``on_attempt(sender, frame, outcome)`` after every unicast attempt
    * ``on_unicast_done(sender, frame, delivered, outcome)``
    * ``on_queue_drop(sender, frame)``
    """

    def __init__(self, sim: Simulator, cfg: MacConfig, n_nodes: int, sensitivity: float,
                 power_fn: Callable[[int], list[float]], rng: random.Random,
                 on_receive: Callable[[int, Frame, int], None],
                 on_attempt: Callable[[int, Frame, Outcome], None] | None = None,
                 on_unicast_done: Callable[[int, Frame, bool, Outcome], None] | None = None,
                 on_queue_drop: Callable[[int, Frame], None] | None = None):
        self.sim = sim
        self.cfg = cfg
        self.n = n_nodes
        self.sensitivity = sensitivity
        self.power_fn = power_fn
        self.rng = rng
        self.on_receive = on_receive
        self.on_attempt = on_attempt
        self.on_unicast_done = on_unicast_done
        self.on_queue_drop = on_queue_drop
        self.queues: list[deque[Frame]] = [deque() for _ in range(n_nodes)]
        self.active: list[Transmission] = []
        self._engaged = [False] * n_nodes
        self._transmitting = [False] * n_nodes
        self._overhead_us = cfg.per_frame_overhead * 1e6
        self._us_per_byte = 8e6 / cfg.phy_rate
        self._backoff_us = max(1, to_us(cfg.max_backoff))
        self._sense_us = to_us(cfg.sense_delay)
        self.tx_count = 0
        self.queue_drops = 0
        self.collisions = 0

    # -- public ----------------------------------------------------------

    def airtime_us(self, size: int) -> int:
        return int(round(self._overhead_us + size * self._us_per_byte))

    def try_send(self, node: int, frame: Frame) -> bool:
        """Queue ``frame`` at ``node``; False if the queue was full (frame dropped)."""
        q = self.queues[node]
        if len(q) >= self.cfg.queue_cap:
            self.queue_drops += 1
            if self.on_queue_drop is not None:
                self.on_queue_drop(node, frame)
            return False
        q.append(frame)
        if not self._engaged[node]:
            self._engaged[node] = True
            self._access(node)
        return True

    def busy_until(self, node: int) -> int:
        """End of the latest ongoing transmission sensed at ``node`` (0 if idle)."""
        now = self.sim.now
        until = 0
        for tx in self.active:
            if tx.end > now and node in tx.heard and tx.start + self._sense_us <= now:
                if tx.end > until:
                    until = tx.end
        return until

    def deliver(self, tx: Transmission, receiver: int) -> Outcome:
        if tx.powers[receiver] < self.sensitivity:
            return Outcome.BELOW_SENSITIVITY
        if receiver in tx.collided:
            return Outcome.COLLIDED
        return Outcome.RECEIVED

    # -- internals -------------------------------------------------------

    def _backoff(self) -> int:
        return 1 + self.rng.randrange(self._backoff_us)

    def _access(self, node: int) -> None:
        if not self.queues[node]:
            self._engaged[node] = False
            return
        until = self.busy_until(node)
        if until:
            self.sim.schedule(until + self._backoff(), EventKind.TIMER_ELAPSED, node,
                              self._access, node)
        else:
            self._start(node, self.queues[node][0])

    def _start(self, node: int, frame: Frame) -> None:
        now = self.sim.now
        powers = self.power_fn(node)
        sens = self.sensitivity
        heard = {r for r, p in enumerate(powers) if p >= sens}
        tx = Transmission(node, frame, now, now + self.airtime_us(frame.size), powers, heard)
        for other in self.active:
            if other.end <= now:
                continue
            common = heard & other.heard
            if common:
                tx.collided |= common
                other.collided |= common
            if node in other.heard:
                other.collided.add(node)
            if other.sender in heard:
                tx.collided.add(other.sender)
        self.active.append(tx)
        self._transmitting[node] = True
        self.tx_count += 1
        self.sim.schedule(tx.end, EventKind.FRAME_TX_END, node, self._end, tx)

    def _end(self, tx: Transmission) -> None:
        self.active.remove(tx)
        node = tx.sender
        self._transmitting[node] = False
        frame = tx.frame
        q = self.queues[node]
        if tx.collided:
            self.collisions += 1
        if frame.dst is None:
            q.popleft()
            for r in sorted(tx.heard - tx.collided):
                self.on_receive(r, frame, node)
        else:
            outcome = self.deliver(tx, frame.dst)
            if self.on_attempt is not None:
                self.on_attempt(node, frame, outcome)
            if outcome is Outcome.RECEIVED:
                q.popleft()
                self.on_receive(frame.dst, frame, node)
                if self.on_unicast_done is not None:
                    self.on_unicast_done(node, frame, True, outcome)
            elif frame.attempts < self.cfg.unicast_retries:
                frame.attempts += 1
            else:
                q.popleft()
                if self.on_unicast_done is not None:
                    self.on_unicast_done(node, frame, False, outcome)
        if q:
            self.sim.schedule(self.sim.now + self._backoff(), EventKind.TIMER_ELAPSED, node,
                              self._access, node)
        else:
            self._engaged[node] = False

    def is_transmitting(self, node: int) -> bool:
        return self._transmitting[node]
