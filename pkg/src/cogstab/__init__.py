"""Stability regions and a slotted simulator for a cognitive shared channel
with an energy-harvesting primary source."""

from .model import (
    AccessPolicy,
    ArrivalRates,
    ChannelModel,
    DegenerateChannel,
    EnergyModel,
    OutOfRegion,
    PreconditionViolated,
    Scenario,
    battery_nonempty_prob,
    delta1,
    delta2,
    eta,
)
from .regions import (
    BoundaryPolyline,
    PStar,
    StabilityRegion,
    SubregionSpec,
    boundary_polyline,
    build_region,
    grid_pstar_oracle,
    max_lambda2,
    mu1_dominant1,
    mu1_dominant2,
    mu2_dominant1,
    mu2_dominant2,
    optimal_p,
    optimal_p_secondary_axis,
)

__version__ = "0.1.0"
