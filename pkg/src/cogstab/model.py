"""Parameter types for the two-pair cognitive channel with a rechargeable primary.

Everything here is immutable. Probabilities are validated on construction and
out-of-range values raise ``ValueError`` instead of being clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Any, Mapping, Optional

# |eta| below this is treated as eta <= 0.
ETA_TOL = 1e-12

SCENARIO_KEYS = ("q11", "q22", "q112", "q212", "delta", "capacity", "lambda1", "lambda2", "p")


class PreconditionViolated(ValueError):
    """A closed-form rate was evaluated outside the domain where it holds."""


class OutOfRegion(ValueError):
    """The requested arrival rate lies outside the stability region."""


class DegenerateChannel(ValueError):
    """The requested branch is empty for this channel (e.g. q212 == 0)."""


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class ChannelModel:
    """Reception success probabilities.

    ``q11``/``q22`` are the success probabilities of each source transmitting
    alone; ``q112``/``q212`` apply when both transmit in the same slot.
    """

    q11: float
    q22: float
    q112: float
    q212: float

    def __post_init__(self) -> None:
        for f in fields(self):
            object.__setattr__(self, f.name, _check_prob(f.name, getattr(self, f.name)))
        if self.q112 > self.q11:
            raise ValueError(f"q112 ({self.q112}) must not exceed q11 ({self.q11})")
        if self.q212 > self.q22:
            raise ValueError(f"q212 ({self.q212}) must not exceed q22 ({self.q22})")

    @classmethod
    def collision(cls, q11: float = 1.0, q22: float = 1.0) -> "ChannelModel":
        """Collision channel with probabilistic erasures."""
        return cls(q11, q22, 0.0, 0.0)

    @property
    def is_collision(self) -> bool:
        return self.q112 == 0.0 and self.q212 == 0.0


@dataclass(frozen=True)
class EnergyModel:
    """Bernoulli(delta) harvesting into a battery of ``capacity`` units.

    ``capacity=None`` means the battery is unbounded.
    """

    delta: float
    capacity: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "delta", _check_prob("delta", self.delta))
        if self.capacity is not None:
            if isinstance(self.capacity, bool) or int(self.capacity) != self.capacity:
                raise ValueError(f"capacity must be an integer, got {self.capacity!r}")
            object.__setattr__(self, "capacity", int(self.capacity))
            if self.capacity < 1:
                raise ValueError(f"finite capacity must be >= 1, got {self.capacity}")

    @property
    def unbounded(self) -> bool:
        return self.capacity is None


@dataclass(frozen=True)
class ArrivalRates:
    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "lambda1", _check_prob("lambda1", self.lambda1))
        object.__setattr__(self, "lambda2", _check_prob("lambda2", self.lambda2))


@dataclass(frozen=True)
class AccessPolicy:
    """Probability that the secondary transmits alongside an active primary."""

    p: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", _check_prob("p", self.p))


@dataclass(frozen=True)
class Scenario:
    channel: ChannelModel
    energy: EnergyModel
    arrivals: ArrivalRates = field(default_factory=ArrivalRates)
    policy: AccessPolicy = field(default_factory=AccessPolicy)

    def with_values(self, **kw: Any) -> "Scenario":
        """Copy with any flat key (``q11``, ``delta``, ``lambda1``, ``p`` ...) replaced."""
        flat = self.to_dict()
        unknown = set(kw) - set(SCENARIO_KEYS)
        if unknown:
            raise KeyError(f"unknown scenario keys: {sorted(unknown)}")
        flat.update(kw)
        return Scenario.from_dict(flat)

    def to_dict(self) -> dict[str, Any]:
        c, e = self.channel, self.energy
        return {
            "q11": c.q11,
            "q22": c.q22,
            "q112": c.q112,
            "q212": c.q212,
            "delta": e.delta,
            "capacity": "inf" if e.capacity is None else e.capacity,
            "lambda1": self.arrivals.lambda1,
            "lambda2": self.arrivals.lambda2,
            "p": self.policy.p,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Scenario":
        """Build from the flat key set; unknown keys are an error."""
        unknown = set(data) - set(SCENARIO_KEYS)
        if unknown:
            raise KeyError(f"unknown scenario keys: {sorted(unknown)}")
        missing = {"q11", "q22", "q112", "q212", "delta"} - set(data)
        if missing:
            raise KeyError(f"missing scenario keys: {sorted(missing)}")
        return cls(
            channel=ChannelModel(data["q11"], data["q22"], data["q112"], data["q212"]),
            energy=EnergyModel(data["delta"], parse_capacity(data.get("capacity", "inf"))),
            arrivals=ArrivalRates(data.get("lambda1", 0.0), data.get("lambda2", 0.0)),
            policy=AccessPolicy(data.get("p", 0.0)),
        )


def parse_capacity(value: Any) -> Optional[int]:
    """``"inf"``/``None``/``math.inf`` -> unbounded, otherwise a positive integer."""
    if value is None:
        return None
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "unbounded"):
            return None
        try:
            value = int(text)
        except ValueError:
            raise ValueError(f"capacity must be an integer or 'inf', got {value!r}") from None
    if isinstance(value, float):
        if math.isinf(value):
            return None
        if not value.is_integer():
            raise ValueError(f"capacity must be an integer, got {value!r}")
        value = int(value)
    return value


def delta1(channel: ChannelModel) -> float:
    """Loss in primary success probability caused by a concurrent secondary."""
    return channel.q11 - channel.q112


def delta2(channel: ChannelModel) -> float:
    return channel.q22 - channel.q212


def eta(channel: ChannelModel) -> float:
    """Multipacket-reception index; its sign picks the shape of the primary subregion.

    Equals -1 for the pure collision channel and grows with MPR capability.
    """
    c = channel
    return c.q11 * c.q212 + c.q22 * c.q112 - c.q22 * c.q11


def eta_positive(channel: ChannelModel) -> bool:
    return eta(channel) > ETA_TOL


def battery_nonempty_prob(energy: EnergyModel) -> float:
    """Stationary probability that a saturated primary's battery holds energy.

    delta for an unbounded battery, delta(1 - delta^c)/(1 - delta^(c+1)) for
    capacity c, and 1 when delta == 1.
    """
    d = energy.delta
    if energy.capacity is None or d == 0.0:
        return d
    if d == 1.0:
        return 1.0
    c = energy.capacity
    return d * (1.0 - d**c) / (1.0 - d ** (c + 1))


def battery_empty_prob(energy: EnergyModel) -> float:
    """1 - battery_nonempty_prob, written as (1 - delta)/(1 - delta^(c+1)) for finite c."""
    d = energy.delta
    if energy.capacity is None or d == 0.0:
        return 1.0 - d
    if d == 1.0:
        return 0.0
    return (1.0 - d) / (1.0 - d ** (energy.capacity + 1))
