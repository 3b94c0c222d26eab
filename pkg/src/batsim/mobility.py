"""Node trajectories: static layouts, random waypoint, trace playback, and prediction."""

from __future__ import annotations

import csv
import math
import random
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

Vec3 = tuple[float, float, float]


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class Playground:
    x: float = 600.0
    y: float = 600.0
    z: float = 10.0

    def contains(self, p: Sequence[float], eps: float = 1e-9) -> bool:
        return (-eps <= p[0] <= self.x + eps and -eps <= p[1] <= self.y + eps
                and -eps <= p[2] <= self.z + eps)

    @property
    def center(self) -> Vec3:
        return (self.x / 2, self.y / 2, self.z / 2)


def _lerp(a: Vec3, b: Vec3, f: float) -> Vec3:
    return (a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f, a[2] + (b[2] - a[2]) * f)


class MobilityModel:
    """Base interface; subclasses implement ``position_at`` and ``predict_position``."""

    n_nodes: int

    def position_at(self, node: int, t: float) -> Vec3:
        raise NotImplementedError

    def predict_position(self, node: int, t: float, tau: float) -> Vec3:
        raise NotImplementedError

    def positions_at(self, t: float) -> list[Vec3]:
        return [self.position_at(n, t) for n in range(self.n_nodes)]

    @property
    def max_speed(self) -> float:
        return math.inf


class StaticMobility(MobilityModel):
    def __init__(self, positions: Sequence[Sequence[float]]):
        self._pos = [tuple(float(c) for c in p) for p in positions]
        self.n_nodes = len(self._pos)

    def position_at(self, node, t):
        return self._pos[node]

    def predict_position(self, node, t, tau):
        return self._pos[node]

    def positions_at(self, t):
        return self._pos

    @property
    def max_speed(self):
        return 0.0


def line_layout(n: int, spacing: float, z: float = 0.0) -> list[Vec3]:
    return [(i * spacing, 0.0, z) for i in range(n)]


def ring_layout(n: int, spacing: float, z: float = 0.0) -> list[Vec3]:
    """``n`` nodes on a circle with neighboring nodes ``spacing`` apart."""
    radius = spacing / (2.0 * math.sin(math.pi / n))
    return [(radius + radius * math.cos(2 * math.pi * i / n),
             radius + radius * math.sin(2 * math.pi * i / n), z) for i in range(n)]


def grid_layout(n: int, spacing: float, z: float = 0.0) -> list[Vec3]:
    side = int(math.ceil(math.sqrt(n)))
    return [((i % side) * spacing, (i // side) * spacing, z) for i in range(n)]


class _Leg:
    __slots__ = ("t0", "t1", "t2", "p0", "p1", "speed")

    def __init__(self, t0, t1, t2, p0, p1, speed):
        self.t0 = t0        # departure
        self.t1 = t1        # arrival at p1
        self.t2 = t2        # end of pause at p1
        self.p0 = p0
        self.p1 = p1
        self.speed = speed

    def at(self, t: float) -> Vec3:
        if t >= self.t1:
            return self.p1
        if t <= self.t0:
            return self.p0
        return _lerp(self.p0, self.p1, (t - self.t0) / (self.t1 - self.t0))


class RandomWaypoint(MobilityModel):
    """Random waypoint with zero pause by default.

    Every node keeps one leg drawn ahead of the one it is on, so a node knows
    its trajectory up to the end of the following leg.
    """

    def __init__(self, n_nodes: int, playground: Playground, speed_min: float, speed_max: float,
                 rng_for: Callable[[int], random.Random], pause: float = 0.0):
        if speed_min < 0 or speed_max < speed_min:
            raise ValueError("need 0 <= speed_min <= speed_max")
        if pause < 0:
            raise ValueError("pause must be >= 0")
        self.n_nodes = n_nodes
        self.playground = playground
        self.speed_min = speed_min
        self.speed_max = speed_max
        self.pause = pause
        self._rngs = [rng_for(i) for i in range(n_nodes)]
        self._legs: list[list[_Leg]] = []
        self._starts: list[list[float]] = []
        self._cursor = [0] * n_nodes
        for i in range(n_nodes):
            start = self.draw_point(self._rngs[i])
            self._legs.append([])
            self._starts.append([])
            self._append_leg(i, 0.0, start)
            self._append_leg(i)

    @property
    def max_speed(self):
        return self.speed_max

    def draw_point(self, rng: random.Random) -> Vec3:
        pg = self.playground
        return (rng.uniform(0, pg.x), rng.uniform(0, pg.y), rng.uniform(0, pg.z))

    def draw_speed(self, rng: random.Random) -> float:
        if self.speed_min == self.speed_max:
            return self.speed_max
        return rng.uniform(self.speed_min, self.speed_max)

    def step_random_waypoint(self, node: int) -> tuple[Vec3, float]:
        """Draw the next waypoint and speed for ``node`` and append the leg."""
        leg = self._append_leg(node)
        return leg.p1, leg.speed

    def _append_leg(self, node: int, t0: float | None = None, p0: Vec3 | None = None) -> _Leg:
        legs = self._legs[node]
        rng = self._rngs[node]
        if legs:
            t0, p0 = legs[-1].t2, legs[-1].p1
        target = self.draw_point(rng)
        speed = self.draw_speed(rng)
        dist = math.dist(p0, target)
        if speed <= 0:
            t1 = t2 = math.inf
        else:
            t1 = t0 + dist / speed
            t2 = t1 + self.pause
        leg = _Leg(t0, t1, t2, p0, target, speed)
        legs.append(leg)
        self._starts[node].append(t0)
        return leg

    def _leg_index(self, node: int, t: float) -> int:
        legs = self._legs[node]
        c = self._cursor[node]
        if legs[c].t0 <= t < legs[c].t2:
            idx = c
        else:
            while legs[-1].t2 <= t:
                self._append_leg(node)
            idx = max(bisect_right(self._starts[node], t) - 1, 0)
            self._cursor[node] = idx
        # keep one leg drawn beyond the current one
        if idx + 1 >= len(legs):
            self._append_leg(node)
        return idx

    def position_at(self, node, t):
        legs = self._legs[node]
        return legs[self._leg_index(node, t)].at(t)

    def predict_position(self, node, t, tau):
        """Position after moving ``tau`` seconds along the known legs.

        Only the current and the pre-drawn next leg are known, so the
        prediction stops at the end of the next leg.
        """
        if tau < 0:
            raise ValueError("tau must be >= 0")
        idx = self._leg_index(node, t)
        legs = self._legs[node]
        horizon = legs[idx + 1].t2
        return self._walk(node, min(t + tau, horizon))

    def _walk(self, node: int, t: float) -> Vec3:
        legs = self._legs[node]
        idx = max(bisect_right(self._starts[node], t) - 1, 0)
        return legs[idx].at(t)


class TracePlayback(MobilityModel):
    """Piecewise-linear playback of recorded fixes; clamps outside the trace."""

    def __init__(self, traces: dict[int, tuple[np.ndarray, np.ndarray]]):
        ids = sorted(traces)
        if ids != list(range(len(ids))):
            raise TraceError(f"trace node ids must be 0..N-1, got {ids}")
        self.n_nodes = len(ids)
        self._times = [traces[i][0].tolist() for i in ids]
        self._pos = [[tuple(row) for row in traces[i][1].tolist()] for i in ids]
        self._max_speed = 0.0
        for ts, ps in zip(self._times, self._pos):
            for k in range(1, len(ts)):
                v = math.dist(ps[k - 1], ps[k]) / (ts[k] - ts[k - 1])
                self._max_speed = max(self._max_speed, v)

    @property
    def max_speed(self):
        return self._max_speed

    def position_at(self, node, t):
        ts = self._times[node]
        ps = self._pos[node]
        if t <= ts[0]:
            return ps[0]
        if t >= ts[-1]:
            return ps[-1]
        k = bisect_right(ts, t)
        return _lerp(ps[k - 1], ps[k], (t - ts[k - 1]) / (ts[k] - ts[k - 1]))

    def predict_position(self, node, t, tau):
        if tau < 0:
            raise ValueError("tau must be >= 0")
        return self.position_at(node, t + tau)


def load_trace(path: str | Path) -> TracePlayback:
    """Read a ``node_id,time_s,x_m,y_m,z_m`` CSV trace."""
    path = Path(path)
    rows: dict[int, list[tuple[float, float, float, float]]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["node_id", "time_s", "x_m", "y_m", "z_m"]:
            raise TraceError(f"{path}: expected header 'node_id,time_s,x_m,y_m,z_m'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise TraceError(f"{path}:{lineno}: expected 5 columns")
            try:
                node = int(row[0])
                t, x, y, z = (float(c) for c in row[1:])
            except ValueError as exc:
                raise TraceError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in (t, x, y, z)):
                raise TraceError(f"{path}:{lineno}: non-finite value")
            rows.setdefault(node, []).append((t, x, y, z))
    if not rows:
        raise TraceError(f"{path}: no fixes")
    traces = {}
    for node, fixes in rows.items():
        arr = np.asarray(fixes, dtype=float)
        if np.any(np.diff(arr[:, 0]) <= 0):
            raise TraceError(f"{path}: times for node {node} are not strictly increasing")
        traces[node] = (arr[:, 0], arr[:, 1:4])
    return TracePlayback(traces)


def write_trace(path: str | Path, traces: dict[int, tuple[np.ndarray, np.ndarray]]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "time_s", "x_m", "y_m", "z_m"])
        for node in sorted(traces):
            ts, ps = traces[node]
            for t, p in zip(ts, ps):
                w.writerow([node, f"{t:.3f}", f"{p[0]:.3f}", f"{p[1]:.3f}", f"{p[2]:.3f}"])


def grid_road_trace(n_nodes: int, duration: float, playground: Playground, block: float,
                    speed: float, rng: random.Random, z: float = 1.5,
                    ) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Synthetic vehicles on a Manhattan road grid, turning randomly at crossings.

    A stand-in for road-constrained traces when no exported traces are at hand.
    """
    nx = int(playground.x // block)
    ny = int(playground.y // block)
    if nx < 1 or ny < 1:
        raise ValueError("block larger than the playground")
    traces = {}
    for node in range(n_nodes):
        i, j = rng.randint(0, nx), rng.randint(0, ny)
        t = 0.0
        ts, ps = [t], [(i * block, j * block, z)]
        prev = None
        while t < duration:
            moves = [(di, dj) for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))
                     if 0 <= i + di <= nx and 0 <= j + dj <= ny]
            if prev is not None and len(moves) > 1:
                back = (-prev[0], -prev[1])
                moves = [m for m in moves if m != back] or moves
            di, dj = moves[rng.randrange(len(moves))]
            i, j = i + di, j + dj
            t += block / speed
            ts.append(t)
            ps.append((i * block, j * block, z))
            prev = (di, dj)
        traces[node] = (np.asarray(ts), np.asarray(ps))
    return traces
