"""Scenario configuration in flat ``section.key = value`` text.

Absent keys take the defaults below. ``scenario.preset`` (``rural`` or
``urban``) fills in the channel model, weighting exponent and prediction
lookahead unless they are given explicitly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping

_NONE = None


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# key -> (type, default); a default of None is resolved from the preset or elsewhere
SCHEMA: dict[str, tuple[type, Any]] = {
    "scenario.name": (str, "generic"),
    "scenario.preset": (str, "rural"),
    "scenario.nodes": (int, 10),
    "scenario.duration": (float, 300.0),
    "scenario.seeds": (int, 25),
    "scenario.base_seed": (int, 1),
    "playground.x": (float, 600.0),
    "playground.y": (float, 600.0),
    "playground.z": (float, 10.0),
    "channel.model": (str, None),
    "channel.eta": (float, 2.65),
    "channel.nakagami_m": (float, 2.0),
    "channel.table": (str, ""),
    "channel.reference_distance": (float, 1.0),
    "radio.tx_power": (float, 20.0),
    "radio.sensitivity": (float, -83.0),
    "radio.frequency": (float, 2.4e9),
    "radio.tx_gain": (float, 0.0),
    "radio.rx_gain": (float, 0.0),
    "mac.phy_rate": (float, 54e6),
    "mac.overhead": (float, 50e-6),
    "mac.max_backoff": (float, 0.5e-3),
    "mac.retries": (int, 3),
    "mac.queue_cap": (int, 100),
    "mac.sense_delay": (float, 5e-6),
    "routing.ogm_interval": (float, 0.33),
    "routing.elp_interval": (float, 0.2),
    "routing.jitter": (float, 0.02),
    "routing.ogm_forward_jitter": (float, 0.02),
    "routing.ewma_weight": (float, 0.3),
    "routing.ttl": (int, 32),
    "routing.elp_size": (int, 40),
    "routing.ogm_size": (int, 24),
    "routing.probing": (bool, False),
    "routing.probe_size": (int, 200),
    "routing.route_timeout": (float, 3.3),
    "routing.max_origdiff": (int, 5),
    "metric.family": (str, "throughput"),
    "metric.alpha": (float, None),
    "metric.tau": (float, None),
    "metric.dmax": (float, None),
    "metric.hop_penalty": (float, 1.0 / 255.0),
    "metric.link_quality": (bool, False),
    "mobility.model": (str, "random_waypoint"),
    "mobility.speed_min": (float, 10.0),
    "mobility.speed_max": (float, 15.0),
    "mobility.speed": (float, None),     # when set, pins speed_min = speed_max
    "mobility.pause": (float, 0.0),
    "mobility.layout": (str, "random"),
    "mobility.spacing": (float, 0.0),
    "mobility.spacing_dmax": (float, 0.0),
    "mobility.trace": (str, ""),
    "traffic.streams": (int, 1),
    "traffic.rate": (float, 10e6),
    "traffic.packet_size": (int, 1250),
    "traffic.start": (float, 30.0),
    "traffic.stop": (float, None),
    "traffic.source": (int, -1),
    "traffic.destination": (int, -1),
    "output.route_dump_interval": (float, 1.0),
    "campaign.max_runs": (int, 10000),
}

PRESETS: dict[str, dict[str, Any]] = {
    "rural": {"channel.model": "friis", "metric.alpha": 1.0, "metric.tau": 3.0},
    "urban": {"channel.model": "nakagami", "metric.alpha": 2.0, "metric.tau": 4.0},
}

CHOICES = {
    "scenario.preset": ("rural", "urban"),
    "channel.model": ("friis", "nakagami", "empirical"),
    "metric.family": ("throughput", "hopcount", "distance", "predictive"),
    "mobility.model": ("random_waypoint", "static", "trace"),
    "mobility.layout": ("line", "ring", "grid", "random"),
}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def parse_value(key: str, text: str) -> Any:
    if key not in SCHEMA:
        raise ValidationError(key, "unknown configuration key")
    typ = SCHEMA[key][0]
    text = text.strip()
    if text.lower() in ("none", "auto", ""):
        if typ is str:
            return "" if SCHEMA[key][1] == "" else None
        return None
    try:
        if typ is bool:
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if typ is int:
            return int(text)
        if typ is float:
            if "/" in text:
                num, den = text.split("/", 1)
                return float(num) / float(den)
            return float(text)
        return text
    except ValueError as exc:
        raise ValidationError(key, str(exc)) from None


def _format(value: Any) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated, fully resolved configuration (read with ``cfg["section.key"]``)."""

    values: Mapping[str, Any]

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    def replace(self, overrides: Mapping[str, Any]) -> "ScenarioConfig":
        raw = dict(self.values)
        for k, v in overrides.items():
            if k not in SCHEMA:
                raise ValidationError(k, "unknown configuration key")
            raw[k] = parse_value(k, v) if isinstance(v, str) else v
        return build_config(raw, explicit=set(overrides) | _explicit_keys(self))

    def dump(self) -> str:
        return "".join(f"{k} = {_format(self.values[k])}\n" for k in SCHEMA)

    def label(self, keys: Mapping[str, Any] | None = None) -> str:
        parts = [self["scenario.name"]]
        for k, v in (keys or {}).items():
            parts.append(f"{k}={_format(v)}")
        return ";".join(parts)


def _explicit_keys(cfg: ScenarioConfig) -> set[str]:
    return set(cfg.values.get("_explicit", ()))


@dataclass
class SweepSpec:
    axes: dict[str, list[Any]] = field(default_factory=dict)

    def points(self) -> list[dict[str, Any]]:
        if not self.axes:
            return [{}]
        keys = list(self.axes)
        return [dict(zip(keys, combo)) for combo in itertools.product(*self.axes.values())]

    def __len__(self) -> int:
        return math.prod(len(v) for v in self.axes.values()) if self.axes else 1


def build_config(raw: Mapping[str, Any], explicit: set[str] | None = None) -> ScenarioConfig:
    """Fill defaults, apply the preset, validate."""
    values = {k: d for k, (_, d) in SCHEMA.items()}
    if explicit is None:
        explicit = {k for k in raw if k in SCHEMA}
    for k, v in raw.items():
        if k == "_explicit":
            continue
        if k not in SCHEMA:
            raise ValidationError(k, "unknown configuration key")
        values[k] = v
    preset = values["scenario.preset"]
    if preset not in PRESETS:
        raise ValidationError("scenario.preset", f"must be one of {sorted(PRESETS)}")
    for k, v in PRESETS[preset].items():
        if values[k] is None or k not in explicit:
            values[k] = v
    if values["mobility.speed"] is not None:
        values["mobility.speed_min"] = values["mobility.speed_max"] = values["mobility.speed"]
    if values["traffic.stop"] is None or "traffic.stop" not in explicit:
        values["traffic.stop"] = values["scenario.duration"]
    _validate(values)
    values["_explicit"] = tuple(sorted(explicit))
    return ScenarioConfig(values)


def _validate(v: dict[str, Any]) -> None:
    for key, choices in CHOICES.items():
        if v[key] not in choices:
            raise ValidationError(key, f"{v[key]!r} not in {choices}")
    positive = ["scenario.duration", "playground.x", "playground.y", "radio.frequency",
                "mac.phy_rate", "mac.max_backoff", "routing.ogm_interval",
                "routing.elp_interval", "routing.ewma_weight", "traffic.rate",
                "output.route_dump_interval", "channel.reference_distance"]
    for key in positive:
        if not v[key] > 0:
            raise ValidationError(key, "must be positive")
    for key in ("scenario.nodes", "scenario.seeds", "routing.ttl", "routing.elp_size",
                "routing.ogm_size", "routing.probe_size", "traffic.packet_size",
                "mac.queue_cap", "campaign.max_runs", "routing.max_origdiff"):
        if v[key] < 1:
            raise ValidationError(key, "must be >= 1")
    for key in ("playground.z", "mac.overhead", "mac.retries", "mac.sense_delay",
                "mobility.speed_min", "mobility.pause", "mobility.spacing",
                "mobility.spacing_dmax", "traffic.streams", "traffic.start",
                "routing.jitter", "routing.ogm_forward_jitter", "metric.hop_penalty"):
        if v[key] < 0:
            raise ValidationError(key, "must be >= 0")
    if v["mobility.speed_max"] < v["mobility.speed_min"]:
        raise ValidationError("mobility.speed_max", "must be >= mobility.speed_min")
    if not v["radio.sensitivity"] < v["radio.tx_power"]:
        raise ValidationError("radio.sensitivity", "must be below radio.tx_power")
    if v["channel.eta"] < 2:
        raise ValidationError("channel.eta", "must be >= 2")
    if v["channel.nakagami_m"] < 0.5:
        raise ValidationError("channel.nakagami_m", "must be >= 0.5")
    if v["routing.ewma_weight"] > 1:
        raise ValidationError("routing.ewma_weight", "must be <= 1")
    for key in ("metric.alpha", "metric.tau"):
        if not v[key] > 0:
            raise ValidationError(key, "must be positive")
    if v["metric.dmax"] is not None and not v["metric.dmax"] > 0:
        raise ValidationError("metric.dmax", "must be positive or auto")
    if v["routing.jitter"] >= min(v["routing.elp_interval"], v["routing.ogm_interval"]):
        raise ValidationError("routing.jitter", "must be smaller than the ELP/OGM intervals")
    if v["traffic.stop"] > v["scenario.duration"]:
        raise ValidationError("traffic.stop", "must not exceed scenario.duration")
    n = v["scenario.nodes"]
    for key in ("traffic.source", "traffic.destination"):
        if not -1 <= v[key] < n:
            raise ValidationError(key, f"must be -1 (random) or a node id below {n}")
    if (v["traffic.source"] >= 0 and v["traffic.source"] == v["traffic.destination"]):
        raise ValidationError("traffic.destination", "must differ from traffic.source")
    if n < 2 and v["traffic.streams"] > 0:
        raise ValidationError("scenario.nodes", "streams need at least 2 nodes")
    if v["channel.model"] == "empirical":
        if not v["channel.table"] or not Path(v["channel.table"]).is_file():
            raise ValidationError("channel.table", f"file not found: {v['channel.table']!r}")
    if v["mobility.model"] == "trace":
        if not v["mobility.trace"] or not Path(v["mobility.trace"]).is_file():
            raise ValidationError("mobility.trace", f"file not found: {v['mobility.trace']!r}")


def _lines(text: str) -> Iterator[tuple[int, str, str]]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected 'section.key = value'")
        key, value = line.split("=", 1)
        yield lineno, key.strip(), value.strip()


def parse_config(text: str, overrides: Mapping[str, str] | None = None,
                 ) -> tuple[ScenarioConfig, SweepSpec]:
    raw: dict[str, Any] = {}
    sweep = SweepSpec()
    for lineno, key, value in _lines(text):
        if key.startswith("sweep."):
            target = key[len("sweep."):]
            items = [s for s in (x.strip() for x in value.split(",")) if s]
            if not items:
                raise ParseError(f"line {lineno}: empty sweep list for {target}")
            sweep.axes[target] = [parse_value(target, s) for s in items]
        else:
            if key in raw:
                raise ParseError(f"line {lineno}: duplicate key {key}")
            raw[key] = parse_value(key, value)
    for key, value in (overrides or {}).items():
        raw[key] = parse_value(key, value)
    cfg = build_config(raw)
    for point in sweep.points():
        cfg.replace(point)
    return cfg, sweep


def load_config(path: str | Path | None = None, overrides: Mapping[str, str] | None = None,
                ) -> ScenarioConfig:
    return load_campaign(path, overrides)[0]


def load_campaign(path: str | Path | None = None, overrides: Mapping[str, str] | None = None,
                  ) -> tuple[ScenarioConfig, SweepSpec]:
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(f"cannot read {path}: {exc}") from None
    return parse_config(text, overrides)
