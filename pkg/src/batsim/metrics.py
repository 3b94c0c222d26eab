"""Link samples and path-metric composition for the four metric families.

All decisions work on normalized values in [0, 1]; the uint32 form only
exists on the wire (see :func:`normalize` / :func:`denormalize`).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

from .channel import ChannelModel, RadioConfig, max_range

UINT32_MAX = 2**32 - 1
DEFAULT_HOP_PENALTY = 1.0 / 255.0


class MissingPosition(ValueError):
    pass


def normalize(raw: int) -> float:
    return raw / UINT32_MAX


def denormalize(value: float) -> int:
    raw = round(value * UINT32_MAX)
    return 0 if raw < 0 else (UINT32_MAX if raw > UINT32_MAX else raw)


def _clamp(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


@dataclass(frozen=True)
class Throughput:
    hop_penalty: float = DEFAULT_HOP_PENALTY
    name = "throughput"


@dataclass(frozen=True)
class HopCount:
    hop_penalty: float = DEFAULT_HOP_PENALTY
    name = "hopcount"


@dataclass(frozen=True)
class Distance:
    alpha: float = 1.0
    d_max: float = 237.4
    # compose the geometric penalty with the EWMA link metric (min) when set
    use_link_quality: bool = False
    name = "distance"

    def __post_init__(self):
        if self.alpha <= 0 or self.d_max <= 0:
            raise ValueError("alpha and d_max must be positive")


@dataclass(frozen=True)
class Predictive:
    alpha: float = 1.0
    d_max: float = 237.4
    tau: float = 3.0
    use_link_quality: bool = False
    name = "predictive"

    def __post_init__(self):
        if self.alpha <= 0 or self.d_max <= 0 or self.tau <= 0:
            raise ValueError("alpha, d_max and tau must be positive")


MetricFamily = Union[Throughput, HopCount, Distance, Predictive]

FAMILY_NAMES = ("throughput", "hopcount", "distance", "predictive")


@dataclass(slots=True)
class LinkObservation:
    elp_delivery_ratio: float = 1.0
    neighbor_distance: Optional[float] = None
    neighbor_predicted_distance: Optional[float] = None
    phy_rate: float = 54e6
    phy_rate_max: float = 54e6
    alive: bool = True


def link_sample(family: MetricFamily, obs: LinkObservation) -> float:
    """Instantaneous link quality in [0, 1] for one neighbor."""
    if isinstance(family, Throughput):
        return _clamp(obs.elp_delivery_ratio * obs.phy_rate / obs.phy_rate_max)
    if isinstance(family, (Distance, Predictive)):
        if obs.neighbor_distance is None:
            raise MissingPosition("ELP carried no position")
        if isinstance(family, Predictive) and obs.neighbor_predicted_distance is None:
            raise MissingPosition("ELP carried no predicted position")
        if family.use_link_quality:
            return _clamp(obs.elp_delivery_ratio)
    return 1.0 if obs.alive else 0.0


def geo_penalty(distance: float, d_max: float, alpha: float) -> float:
    """``(d / d_max) ** alpha`` capped at 1 for links beyond the range estimate."""
    x = distance / d_max
    return 1.0 if x >= 1.0 else x ** alpha


def _theta_throughput(fam, psi_hat, phi, obs):
    return _clamp((psi_hat if psi_hat < phi else phi) - fam.hop_penalty)


def _theta_hopcount(fam, psi_hat, phi, obs):
    return _clamp(psi_hat - fam.hop_penalty)


def _theta_geo(fam, psi_hat, phi, obs):
    if obs is None or obs.neighbor_distance is None:
        raise MissingPosition("distance families need the neighbor distance")
    penalty = geo_penalty(obs.neighbor_distance, fam.d_max, fam.alpha)
    if type(fam) is Predictive:
        if obs.neighbor_predicted_distance is None:
            raise MissingPosition("predictive family needs the predicted distance")
        ahead = geo_penalty(obs.neighbor_predicted_distance, fam.d_max, fam.alpha)
        if ahead > penalty:
            penalty = ahead
    base = (psi_hat if psi_hat < phi else phi) if fam.use_link_quality else psi_hat
    return _clamp(base - penalty)


_THETA = {Throughput: _theta_throughput, HopCount: _theta_hopcount,
          Distance: _theta_geo, Predictive: _theta_geo}


def theta(family: MetricFamily, psi_hat: float, phi: float,
          obs: LinkObservation | None = None) -> float:
    """Reverse path metric via one forwarder, from the received metric and the link."""
    return _THETA[type(family)](family, psi_hat, phi, obs)


def configure_dmax(family: MetricFamily, model: ChannelModel, radio: RadioConfig) -> MetricFamily:
    """Return ``family`` with ``d_max`` set from the channel's mean-field range."""
    if not isinstance(family, (Distance, Predictive)):
        return family
    return replace(family, d_max=max_range(model, radio))


def make_family(name: str, *, alpha: float = 1.0, tau: float = 3.0, d_max: float = 237.4,
                hop_penalty: float = DEFAULT_HOP_PENALTY,
                use_link_quality: bool = False) -> MetricFamily:
    name = name.lower()
    if name == "throughput":
        return Throughput(hop_penalty)
    if name == "hopcount":
        return HopCount(hop_penalty)
    if name == "distance":
        return Distance(alpha, d_max, use_link_quality)
    if name == "predictive":
        return Predictive(alpha, d_max, tau, use_link_quality)
    raise ValueError(f"unknown metric family {name!r}")
