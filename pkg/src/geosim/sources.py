"""Information sources and the value a proposer can capture from them.

Each source publishes a continuously updating stream whose value at
observation age t seconds is linear: a * max(t, 0) + b. Under multi-source
building the proposer aggregates every signal, each discounted by the
expected network delay from the source; under single-source building one
relay's bid plays the same role.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .topology import LatencyModel


class SourceKind(enum.Enum):
    SIGNAL = "signal"
    RELAY = "relay"


@dataclass(frozen=True)
class InfoSource:
    kind: SourceKind
    region: int
    a: float  # value slope per second, >= 0
    b: float  # value intercept, >= 0

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError("value parameters must be nonnegative")


def value_at(source: InfoSource, t: float) -> float:
    """Value of the source's stream at observation age t seconds."""
    return source.a * max(t, 0.0) + source.b


def aggregate_value_msp(
    region: int,
    tau: float,
    sources: Sequence[InfoSource],
    model: LatencyModel,
) -> float:
    """Total signal value available to a proposer in `region` releasing at tau.

    Each signal is observed with its expected latency, so a release at tau
    captures the stream as of tau - E[d]/1000 seconds (clamped at zero: a
    release before anything has arrived still earns each intercept).
    """
    total = 0.0
    for s in sources:
        lag_s = model.expected_latency(region, s.region) / 1000.0
        total += value_at(s, tau - lag_s)
    return total


def relay_effective_bid(
    region: int,
    tau: float,
    relay: InfoSource,
    model: LatencyModel,
) -> float:
    """Bid value a proposer in `region` can commit to at release time tau.

    The freshest bid available left the relay one expected delivery delay
    ago, so its value is the relay stream at tau - E[d]/1000 seconds.
    """
    lag_s = model.expected_latency(region, relay.region) / 1000.0
    return value_at(relay, tau - lag_s)
