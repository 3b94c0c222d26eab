"""Propagation models, reception power and transmission range estimation."""

from __future__ import annotations

import csv
import math
import random
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Union

SPEED_OF_LIGHT = 299_792_458.0


class ZeroDistance(ValueError):
    pass


class NoSolution(ValueError):
    pass


class ParseError(ValueError):
    pass


class OrderError(ValueError):
    pass


@dataclass(frozen=True)
class RadioConfig:
    tx_power: float = 20.0          # dBm
    carrier_freq: float = 2.4e9     # Hz
    rx_sensitivity: float = -83.0   # dBm
    tx_gain: float = 0.0            # dBi
    rx_gain: float = 0.0            # dBi

    def __post_init__(self):
        if not self.rx_sensitivity < self.tx_power:
            raise ValueError("rx_sensitivity must be below tx_power")
        if not self.carrier_freq > 0:
            raise ValueError("carrier_freq must be positive")


def free_space_loss(distance: float, frequency: float) -> float:
    """Free-space path loss in dB, ``20 log10(4 pi d f / c)``."""
    return 20.0 * math.log10(4.0 * math.pi * distance * frequency / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class FriisGeneralized:
    """Log-distance loss anchored at the free-space loss at ``reference_distance``."""

    eta: float = 2.65
    frequency: float = 2.4e9
    reference_distance: float = 1.0

    def __post_init__(self):
        if self.eta < 2:
            raise ValueError("eta must be >= 2")
        if self.reference_distance <= 0:
            raise ValueError("reference_distance must be positive")

    @property
    def reference_loss(self) -> float:
        return free_space_loss(self.reference_distance, self.frequency)

    def mean_loss(self, distance: float) -> float:
        return self.reference_loss + 10.0 * self.eta * math.log10(distance / self.reference_distance)


@dataclass(frozen=True)
class Nakagami:
    """Nakagami-m power fading (unit-mean gamma) over a log-distance mean curve."""

    m: float = 2.0
    eta: float = 2.65
    frequency: float = 2.4e9
    reference_distance: float = 1.0

    def __post_init__(self):
        if self.m < 0.5:
            raise ValueError("Nakagami m must be >= 0.5")
        if self.eta < 2:
            raise ValueError("eta must be >= 2")

    @property
    def mean_curve(self) -> FriisGeneralized:
        return FriisGeneralized(self.eta, self.frequency, self.reference_distance)

    def mean_loss(self, distance: float) -> float:
        return self.mean_curve.mean_loss(distance)

    def fading_gain(self, rng: random.Random) -> float:
        """One draw of the linear power multiplier, Gamma(shape=m, scale=1/m)."""
        m = self.m
        if m == int(m) and m <= 8:
            # Erlang shortcut: product of uniforms; 1 - random() is in (0, 1]
            prod = 1.0
            for _ in range(int(m)):
                prod *= 1.0 - rng.random()
            return -math.log(prod) / m
        return rng.gammavariate(m, 1.0 / m)


@dataclass(frozen=True)
class EmpiricalTable:
    """Measured mean attenuation, interpolated linearly in dB over log-distance.

    Queries outside the table extrapolate with the slope of the nearest segment.
    """

    points: tuple[tuple[float, float], ...]
    reference_distance: float = 1.0

    def __post_init__(self):
        pts = tuple((float(d), float(a)) for d, a in self.points)
        if len(pts) < 2:
            raise ParseError("empirical table needs at least 2 points")
        for d, a in pts:
            if not (d > 0 and math.isfinite(d) and math.isfinite(a)):
                raise ParseError(f"invalid table point ({d}, {a})")
        for (d0, a0), (d1, a1) in zip(pts, pts[1:]):
            if not d1 > d0:
                raise OrderError(f"distances not strictly ascending at {d1} m")
            if a1 < a0:
                raise OrderError(f"attenuation decreases between {d0} m and {d1} m")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_logd", tuple(math.log10(d) for d, _ in pts))

    def mean_loss(self, distance: float) -> float:
        logd = self._logd
        pts = self.points
        x = math.log10(distance)
        i = bisect_right(logd, x) - 1
        i = min(max(i, 0), len(pts) - 2)
        x0, x1 = logd[i], logd[i + 1]
        a0, a1 = pts[i][1], pts[i + 1][1]
        return a0 + (a1 - a0) * (x - x0) / (x1 - x0)


ChannelModel = Union[FriisGeneralized, Nakagami, EmpiricalTable]


def path_loss(model: ChannelModel, distance: float) -> float:
    """Deterministic mean path loss in dB."""
    if distance == 0:
        raise ZeroDistance("distance is zero; clamp co-located nodes to the reference distance")
    if distance < 0:
        raise ValueError("distance must be positive")
    return model.mean_loss(distance)


def mean_received_power(model: ChannelModel, cfg: RadioConfig, distance: float) -> float:
    return cfg.tx_power + cfg.tx_gain + cfg.rx_gain - path_loss(model, distance)


def received_power(model: ChannelModel, cfg: RadioConfig, distance: float,
                   rng: random.Random | None = None) -> float:
    """Received power in dBm; Nakagami draws one fading sample from ``rng``."""
    p = mean_received_power(model, cfg, distance)
    if isinstance(model, Nakagami):
        if rng is None:
            raise ValueError("Nakagami fading needs an rng")
        p += 10.0 * math.log10(model.fading_gain(rng))
    return p


def max_range(model: ChannelModel, cfg: RadioConfig, tol: float = 0.01) -> float:
    """Largest distance whose mean received power still meets the sensitivity."""
    budget = cfg.tx_power + cfg.tx_gain + cfg.rx_gain - cfg.rx_sensitivity
    if isinstance(model, Nakagami):
        model = model.mean_curve
    d0 = model.reference_distance
    if model.mean_loss(d0) > budget:
        raise NoSolution("sensitivity not met even at the reference distance")
    if isinstance(model, FriisGeneralized):
        return d0 * 10.0 ** ((budget - model.reference_loss) / (10.0 * model.eta))

    lo, hi = d0, 2.0 * d0
    while model.mean_loss(hi) <= budget:
        lo, hi = hi, hi * 2.0
        if hi > 1e7:
            raise NoSolution("mean loss never exceeds the link budget")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if model.mean_loss(mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


def load_empirical_table(path: str | Path) -> EmpiricalTable:
    """Read a ``distance_m,attenuation_db`` CSV into a validated table."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["distance_m", "attenuation_db"]:
            raise ParseError(f"{path}: expected header 'distance_m,attenuation_db'")
        points = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                points.append((float(row[0]), float(row[1])))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    return EmpiricalTable(tuple(points))
