"""Discrete-event simulator for B.A.T.M.A.N. V with distance-aware routing metrics."""

from .campaign import emit_summary, read_aggregate, run_campaign
from .channel import FriisGeneralized, Nakagami, RadioConfig, max_range
from .config import (
    ParseError, ScenarioConfig, SweepSpec, ValidationError, build_config, load_campaign,
    load_config,
)
from .metrics import Distance, HopCount, Predictive, Throughput, normalize, denormalize, theta
from .simulation import Network, RunResult, run_scenario
from .traffic import KpiRow, mean_ci95

__all__ = [
    "Distance", "FriisGeneralized", "HopCount", "KpiRow", "Nakagami", "Network", "ParseError",
    "Predictive", "RadioConfig", "RunResult", "ScenarioConfig", "SweepSpec", "Throughput",
    "ValidationError", "build_config", "denormalize", "emit_summary", "load_campaign",
    "load_config", "max_range", "mean_ci95", "normalize", "read_aggregate", "run_campaign",
    "run_scenario", "theta",
]
