import random

import pytest

from batsim.engine import EventKind, Simulator, to_us
from batsim.mac import Frame, MacConfig, Medium, Outcome, airtime

SENS = -83.0


def matrix_power(table):
    """power_fn from a fixed sender -> receiver dBm table."""
    def fn(sender):
        return [float("-inf") if r == sender else table[sender][r] for r in range(len(table))]
    return fn


IN, OUT = -60.0, -100.0


class Harness:
    def __init__(self, table, cfg=MacConfig(), seed=0):
        self.sim = Simulator()
        self.received = []
        self.done = []
        self.attempts = []
        self.medium = Medium(self.sim, cfg, len(table), SENS, matrix_power(table),
                             random.Random(seed), self.on_rx,
                             lambda s, f, o: self.attempts.append((s, f.dst, o)),
                             lambda s, f, ok, o: self.done.append((s, f.dst, ok, o)))

    def on_rx(self, r, frame, sender):
        self.received.append((self.sim.now, r, sender, frame.kind))

    def send_at(self, t, node, frame):
        self.sim.schedule(to_us(t), EventKind.TRAFFIC_EMIT, node, self.medium.try_send, node, frame)


def test_airtime_oracle():
    cfg = MacConfig(phy_rate=54e6, per_frame_overhead=100e-6)
    assert airtime(cfg, 1350) == pytest.approx(100e-6 + 8 * 1350 / 54e6)
    assert airtime(cfg, 1350) == pytest.approx(300e-6)
    zero = MacConfig(per_frame_overhead=0.0)
    assert airtime(zero, 675) == pytest.approx(100e-6)
    assert airtime(zero, 1350) == pytest.approx(2 * airtime(zero, 675))
    with pytest.raises(ValueError):
        airtime(cfg, 0)


def test_idle_medium_starts_immediately_and_delivers():
    h = Harness([[0, IN], [IN, 0]])
    h.send_at(1.0, 0, Frame("x", 100))
    h.sim.run_until(2.0)
    assert len(h.received) == 1
    t, r, s, _ = h.received[0]
    assert (r, s) == (1, 0)
    assert t == to_us(1.0) + h.medium.airtime_us(100)


def test_busy_medium_defers_past_current_transmission():
    h = Harness([[0, IN, IN], [IN, 0, IN], [IN, IN, 0]])
    h.send_at(1.0, 0, Frame("long", 2000))
    h.send_at(1.0001, 1, Frame("short", 50))
    starts = []
    orig = h.medium._start
    h.medium._start = lambda n, f: (starts.append((n, h.sim.now)), orig(n, f))
    h.sim.run_until(2.0)
    first_end = to_us(1.0) + h.medium.airtime_us(2000)
    assert starts[0] == (0, to_us(1.0))
    assert starts[1][0] == 1 and starts[1][1] > first_end
    assert all(o is not Outcome.COLLIDED for *_, o in h.attempts)


def test_queue_cap_drops_tail():
    h = Harness([[0, IN], [IN, 0]], MacConfig(queue_cap=2))
    ok = [h.medium.try_send(0, Frame("x", 500)) for _ in range(3)]
    assert ok == [True, True, False]
    assert h.medium.queue_drops == 1


def test_hidden_terminals_collide_at_common_receiver():
    # 0 and 2 cannot hear each other; both reach 1
    table = [[0, IN, OUT], [IN, 0, IN], [OUT, IN, 0]]
    h = Harness(table, MacConfig(unicast_retries=0))
    h.send_at(1.0, 0, Frame("a", 500, dst=1))
    h.send_at(1.00005, 2, Frame("b", 500, dst=1))
    h.sim.run_until(2.0)
    assert h.received == []
    assert sorted(h.attempts) == [(0, 1, Outcome.COLLIDED), (2, 1, Outcome.COLLIDED)]


def test_collision_outcome_independent_of_insertion_order():
    table = [[0, IN, OUT], [IN, 0, IN], [OUT, IN, 0]]
    outcomes = []
    for order in ((0, 2), (2, 0)):
        h = Harness(table, MacConfig(unicast_retries=0))
        for node in order:
            h.send_at(1.0, node, Frame("b", 300))
        h.sim.run_until(2.0)
        outcomes.append(sorted(h.received))
    assert outcomes[0] == outcomes[1] == []


def test_below_sensitivity_and_retries():
    h = Harness([[0, OUT], [OUT, 0]], MacConfig(unicast_retries=3))
    h.send_at(1.0, 0, Frame("x", 100, dst=1))
    h.sim.run_until(2.0)
    assert [o for *_, o in h.attempts] == [Outcome.BELOW_SENSITIVITY] * 4
    assert h.done == [(0, 1, False, Outcome.BELOW_SENSITIVITY)]


def test_node_never_transmits_twice_at_once():
    h = Harness([[0, IN, IN], [IN, 0, IN], [IN, IN, 0]])
    for k in range(30):
        h.send_at(1.0 + k * 1e-5, k % 3, Frame("x", 800))
    max_own = []

    def probe():
        senders = [tx.sender for tx in h.medium.active if tx.end > h.sim.now]
        max_own.append(max((senders.count(s) for s in set(senders)), default=0))
        if h.sim.now < to_us(1.5):
            h.sim.schedule(h.sim.now + 7, EventKind.STATS_SAMPLE, -1, probe)

    h.sim.schedule(to_us(1.0), EventKind.STATS_SAMPLE, -1, probe)
    h.sim.run_until(2.0)
    assert max(max_own) <= 1
    assert h.medium.tx_count == 30


def test_single_sender_deterministic_channel_certain_delivery():
    h = Harness([[0, IN, OUT], [IN, 0, OUT], [OUT, OUT, 0]])
    for k in range(50):
        h.send_at(1.0 + k * 0.01, 0, Frame("x", 200))
    h.sim.run_until(3.0)
    assert [r for _, r, _, _ in h.received] == [1] * 50
