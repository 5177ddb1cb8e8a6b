"""Closed-form stability regions and optimal secondary access probabilities.

A region is kept symbolic: a union of subregions, each an optional affine
strict inequality ``a*l1 + b*l2 < t`` intersected with an interval on each
rate. Membership is exact; boundary polylines are derived from the same
objects.

The finite-battery results reuse the unbounded formulas with the saturated
battery occupancy ``beta`` in place of ``delta`` and ``1 - beta`` in place of
``1 - delta``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import (
    ChannelModel,
    DegenerateChannel,
    EnergyModel,
    OutOfRegion,
    PreconditionViolated,
    battery_empty_prob,
    battery_nonempty_prob,
    delta1,
    delta2,
    eta,
    eta_positive,
)

R1_PRIME = "R1'"
R1_DPRIME = "R1''"
R1_ETA_LE_0 = "R1_eta_le_0"
R2_PRIME = "R2'"
R2_DPRIME = "R2''"
COLLISION_R1 = "collision_R1"
COLLISION_R2 = "collision_R2"

# merge tolerance for polyline abscissae
_VERTEX_EPS = 1e-14


@dataclass(frozen=True)
class Interval:
    lo: float = 0.0
    hi: float = math.inf
    lo_closed: bool = True
    hi_closed: bool = False

    def contains(self, x: float) -> bool:
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return above and below

    @property
    def empty(self) -> bool:
        if self.lo < self.hi:
            return False
        return self.lo == self.hi and self.lo_closed and self.hi_closed


@dataclass(frozen=True)
class Affine:
    """The strict constraint ``a*lambda1 + b*lambda2 < t``."""

    a: float
    b: float
    t: float

    def holds(self, l1: float, l2: float) -> bool:
        return self.a * l1 + self.b * l2 < self.t


@dataclass(frozen=True)
class SubregionSpec:
    name: str
    inequality: Optional[Affine]
    lambda1_interval: Interval = Interval()
    lambda2_interval: Interval = Interval()

    def contains(self, l1: float, l2: float) -> bool:
        if not (self.lambda1_interval.contains(l1) and self.lambda2_interval.contains(l2)):
            return False
        return self.inequality is None or self.inequality.holds(l1, l2)

    def sup_lambda2(self, l1: float) -> Optional[float]:
        """Supremum of lambda2 over the vertical slice at ``l1``; None if the slice is empty."""
        if not self.lambda1_interval.contains(l1):
            return None
        return self._slice_sup(self.lambda2_interval, 1, l1)

    def sup_lambda1(self, l2: float) -> Optional[float]:
        """Supremum of lambda1 over the horizontal slice at ``l2``."""
        if not self.lambda2_interval.contains(l2):
            return None
        return self._slice_sup(self.lambda1_interval, 0, l2)

    def closure_lambda2(self, l1: float, tol: float = 0.0) -> Optional[float]:
        """Like :meth:`sup_lambda2` but over the closed lambda1 interval (for plotting)."""
        iv = self.lambda1_interval
        if iv.lo > iv.hi or not (iv.lo - tol <= l1 <= iv.hi + tol):
            return None
        return self._slice_sup(self.lambda2_interval, 1, l1, closed=True)

    def _slice_sup(
        self, iv: Interval, axis: int, fixed: float, closed: bool = False
    ) -> Optional[float]:
        # axis: index of the free variable (0 -> lambda1, 1 -> lambda2)
        if iv.empty and not closed:
            return None
        hi = iv.hi
        if self.inequality is not None:
            a, b, t = self.inequality.a, self.inequality.b, self.inequality.t
            c_free, c_fixed = (a, b) if axis == 0 else (b, a)
            if c_free > 0:
                hi = min(hi, (t - c_fixed * fixed) / c_free)
                # strict inequality leaves nothing above lo unless hi > lo
                if hi < iv.lo or (hi == iv.lo and not closed):
                    return None
            elif c_free == 0:
                if not (c_fixed * fixed < t or (closed and c_fixed * fixed <= t)):
                    return None
            else:
                raise ValueError("negative coefficient is not a stability constraint")
        if math.isinf(hi):
            return None
        return hi


@dataclass(frozen=True)
class StabilityRegion:
    subregions: tuple[SubregionSpec, ...]
    channel: ChannelModel
    energy: EnergyModel
    eta: float
    beta: float

    def contains(self, l1: float, l2: float) -> bool:
        return any(s.contains(l1, l2) for s in self.subregions)

    def __contains__(self, point: tuple[float, float]) -> bool:
        return self.contains(*point)

    @property
    def lambda1_extent(self) -> float:
        return self.beta * self.channel.q11

    @property
    def battery_case(self) -> str:
        return "unbounded" if self.energy.capacity is None else f"finite(c={self.energy.capacity})"

    def subset(self, *names: str) -> "StabilityRegion":
        """Region made of only the named subregions (e.g. the R1 or R2 part)."""
        keep = tuple(s for s in self.subregions if s.name in names)
        return StabilityRegion(keep, self.channel, self.energy, self.eta, self.beta)


@dataclass(frozen=True)
class BoundaryPolyline:
    vertices: tuple[tuple[float, float], ...]
    branches: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.vertices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float).reshape(-1, 2)


@dataclass(frozen=True)
class PStar:
    value: float
    branch: str


# ---------------------------------------------------------------------------
# dominant-system service rates


def _primary_success(channel: ChannelModel, p: float) -> float:
    # per-transmission success probability of an active primary
    return channel.q112 * p + channel.q11 * (1.0 - p)


def mu1_dominant1(channel: ChannelModel, energy: EnergyModel, p: float) -> float:
    """Primary service rate when the secondary always has something to send."""
    return battery_nonempty_prob(energy) * _primary_success(channel, p)


def mu2_dominant1(
    channel: ChannelModel, energy: EnergyModel, p: float, lambda1: float, *, check: bool = True
) -> float:
    """Secondary service rate given the primary's queue is stable at rate ``lambda1``.

    The primary is active for a fraction lambda1/s of slots, where s is its
    per-attempt success probability. ``check=False`` evaluates the affine
    expression at the closure (``lambda1 == mu1``), as needed on the boundary.
    """
    if check and not lambda1 < mu1_dominant1(channel, energy, p):
        raise PreconditionViolated(
            f"lambda1={lambda1} is not below the primary service rate "
            f"{mu1_dominant1(channel, energy, p)} at p={p}"
        )
    s = _primary_success(channel, p)
    if s == 0.0:
        if lambda1 == 0.0:
            return channel.q22
        raise PreconditionViolated("primary can never succeed at this p")
    return (channel.q212 * p - channel.q22) / s * lambda1 + channel.q22


def mu2_dominant2(channel: ChannelModel, energy: EnergyModel, p: float) -> float:
    """Secondary service rate when the primary transmits whenever its battery allows."""
    beta = battery_nonempty_prob(energy)
    return channel.q22 * battery_empty_prob(energy) + channel.q212 * beta * p


def mu1_dominant2(
    channel: ChannelModel, energy: EnergyModel, p: float, lambda2: float, *, check: bool = True
) -> float:
    """Primary service rate given the secondary's queue is stable at rate ``lambda2``."""
    denom = mu2_dominant2(channel, energy, p)
    if check and not lambda2 < denom:
        raise PreconditionViolated(
            f"lambda2={lambda2} is not below the secondary service rate {denom} at p={p}"
        )
    beta = battery_nonempty_prob(energy)
    if denom == 0.0:
        if lambda2 == 0.0:
            return beta * channel.q11
        raise PreconditionViolated("secondary can never succeed at this p")
    return beta * p * (channel.q112 - channel.q11) / denom * lambda2 + beta * channel.q11


# ---------------------------------------------------------------------------
# regions


def build_region(
    channel: ChannelModel, energy: EnergyModel, *, collision_form: Optional[bool] = None
) -> StabilityRegion:
    """Stability region over all access probabilities p.

    ``collision_form`` selects the collision-channel presentation (subregions
    ``collision_R1``/``collision_R2``); by default it is used exactly when
    ``q112 == q212 == 0``. Passing False forces the general construction.
    """
    if collision_form is None:
        collision_form = channel.is_collision
    elif collision_form and not channel.is_collision:
        raise DegenerateChannel("collision form requires q112 == q212 == 0")

    c = channel
    beta = battery_nonempty_prob(energy)
    beta_bar = battery_empty_prob(energy)
    d1, d2 = delta1(c), delta2(c)
    extent = beta * c.q11
    subs: list[SubregionSpec] = []

    # shared line through corner C = (beta*q11, (1-beta)*q22)
    mixed = Affine(c.q212, d1, beta * c.q11 * c.q212 + d1 * c.q22 * beta_bar)

    if collision_form:
        subs.append(
            SubregionSpec(
                COLLISION_R1,
                _sum_line(c),
                Interval(0.0, extent, True, True),
            )
        )
        subs.append(
            SubregionSpec(
                COLLISION_R2,
                None,
                Interval(0.0, extent, True, False),
                Interval(0.0, beta_bar * c.q22, True, True),
            )
        )
    else:
        if eta_positive(c):
            # eta > 0 forces q112 > 0
            subs.append(
                SubregionSpec(
                    R1_PRIME,
                    Affine(d2 / c.q112, 1.0, c.q22),
                    Interval(0.0, beta * c.q112, True, True),
                )
            )
            subs.append(
                SubregionSpec(
                    R1_DPRIME, mixed, Interval(beta * c.q112, extent, False, False)
                )
            )
        else:
            subs.append(SubregionSpec(R1_ETA_LE_0, _sum_line(c), _primary_extent(extent)))
        subs.append(
            SubregionSpec(
                R2_PRIME,
                None,
                Interval(0.0, extent, True, False),
                Interval(0.0, beta_bar * c.q22, True, True),
            )
        )
        subs.append(
            SubregionSpec(
                R2_DPRIME,
                mixed,
                Interval(),
                Interval(beta_bar * c.q22, beta_bar * c.q22 + beta * c.q212, False, False),
            )
        )
    return StabilityRegion(tuple(subs), channel, energy, eta(channel), beta)


def _sum_line(c: ChannelModel) -> Affine:
    # lambda1/q11 + lambda2/q22 < 1, kept in normalized form so that the
    # collision and eta <= 0 constructions agree bit for bit
    if c.q11 > 0 and c.q22 > 0:
        return Affine(1.0 / c.q11, 1.0 / c.q22, 1.0)
    if c.q22 > 0:
        # q11 == 0: only lambda1 == 0 survives (enforced by the interval)
        return Affine(0.0, 1.0 / c.q22, 1.0)
    return Affine(0.0, 1.0, 0.0)


def _primary_extent(extent: float) -> Interval:
    # An arrival-free primary is stable even with no service at all.
    if extent == 0.0:
        return Interval(0.0, 0.0, True, True)
    return Interval(0.0, extent, True, False)


def max_lambda2(region: StabilityRegion, lambda1: float) -> Optional[float]:
    """Supremum of lambda2 over the region at fixed lambda1, or None outside its lambda1 range."""
    if lambda1 < 0:
        raise ValueError("lambda1 must be nonnegative")
    extent = region.lambda1_extent
    if lambda1 > extent or (lambda1 == extent and extent > 0):
        return None
    sups = [s.sup_lambda2(lambda1) for s in region.subregions]
    sups = [v for v in sups if v is not None]
    return max(sups) if sups else None


def max_lambda1(region: StabilityRegion, lambda2: float) -> Optional[float]:
    """Supremum of lambda1 over the region at fixed lambda2, or None if the slice is empty."""
    if lambda2 < 0:
        raise ValueError("lambda2 must be nonnegative")
    sups = [s.sup_lambda1(lambda2) for s in region.subregions]
    sups = [v for v in sups if v is not None]
    return max(sups) if sups else None


def frontier_lambda2(region: StabilityRegion, lambda1: float) -> tuple[float, str]:
    """Closure value of the frontier at lambda1 in [0, extent] and the subregion attaining it."""
    extent = region.lambda1_extent
    if not (0.0 <= lambda1 <= extent + _VERTEX_EPS):
        raise OutOfRegion(f"lambda1={lambda1} outside [0, {extent}]")
    best, name = -math.inf, ""
    for s in region.subregions:
        v = s.closure_lambda2(lambda1, tol=_VERTEX_EPS)
        if v is not None and v > best:
            best, name = v, s.name
    if name == "":
        raise OutOfRegion(f"no subregion reaches lambda1={lambda1}")
    return max(best, 0.0), name


def _subregion_corners(s: SubregionSpec) -> list[float]:
    """Abscissae where this subregion's slice bound can change slope."""
    iv = s.lambda1_interval
    xs = [v for v in (iv.lo, iv.hi) if math.isfinite(v)]
    ineq = s.inequality
    if ineq is not None and ineq.a > 0:
        for y in (s.lambda2_interval.lo, s.lambda2_interval.hi):
            if math.isfinite(y):
                xs.append((ineq.t - ineq.b * y) / ineq.a)
    return xs


def boundary_polyline(region: StabilityRegion, n_points: int) -> BoundaryPolyline:
    """Frontier of the region from the lambda2 axis to lambda1 = beta*q11.

    Vertices follow a uniform lambda1 grid plus the exact corners where the
    frontier switches branch. Values are closure points.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    extent = region.lambda1_extent
    corners = set()
    for s in region.subregions:
        for x in _subregion_corners(s):
            if not 0.0 < x < extent:
                continue
            v = s.closure_lambda2(x, tol=_VERTEX_EPS)
            # only corners of the part that actually forms the frontier
            if v is not None and abs(v - frontier_lambda2(region, x)[0]) <= 1e-12:
                corners.add(x)
    xs: list[float] = []
    for x in sorted(set(np.linspace(0.0, extent, n_points).tolist()) | corners):
        if xs and abs(x - xs[-1]) <= _VERTEX_EPS:
            if x in corners:
                xs[-1] = x
            continue
        xs.append(x)
    verts, branches = [], []
    for x in xs:
        y, b = frontier_lambda2(region, x)
        verts.append((float(x), float(y)))
        branches.append(b)
    return BoundaryPolyline(tuple(verts), tuple(branches))


# ---------------------------------------------------------------------------
# optimal access probability


def optimal_p(channel: ChannelModel, energy: EnergyModel, lambda1: float) -> PStar:
    """Access probability that maximizes the admissible secondary rate at ``lambda1``."""
    beta = battery_nonempty_prob(energy)
    extent = beta * channel.q11
    if not (0.0 <= lambda1 < extent):
        raise OutOfRegion(f"lambda1={lambda1} not in [0, {extent})")
    if channel.is_collision:
        return PStar(0.0, COLLISION_R1)
    if not eta_positive(channel):
        return PStar(0.0, R1_ETA_LE_0)
    if lambda1 <= beta * channel.q112:
        return PStar(1.0, R1_PRIME)
    # lambda1 in (beta*q112, beta*q11) is nonempty, so delta1 > 0 here
    value = (extent - lambda1) / (beta * delta1(channel))
    return PStar(min(max(value, 0.0), 1.0), R1_DPRIME)


def optimal_p_secondary_axis(channel: ChannelModel, energy: EnergyModel, lambda2: float) -> PStar:
    """Access probability that maximizes the admissible primary rate at ``lambda2``."""
    beta = battery_nonempty_prob(energy)
    idle = battery_empty_prob(energy) * channel.q22
    upper = idle + beta * channel.q212
    if lambda2 < 0:
        raise OutOfRegion("lambda2 must be nonnegative")
    if lambda2 <= idle:
        if lambda2 >= upper:
            raise OutOfRegion(f"lambda2={lambda2} not below {upper}")
        return PStar(0.0, COLLISION_R2 if channel.is_collision else R2_PRIME)
    if channel.q212 == 0.0:
        raise DegenerateChannel("q212 == 0: simultaneous transmissions never help the secondary")
    if lambda2 >= upper:
        raise OutOfRegion(f"lambda2={lambda2} not below {upper}")
    value = (lambda2 - idle) / (beta * channel.q212)
    return PStar(min(max(value, 0.0), 1.0), R2_DPRIME)


def pstar_bound(channel: ChannelModel, energy: EnergyModel, lambda1: float) -> float:
    """Secondary bound achieved by :func:`optimal_p` (closure value at the boundary)."""
    ps = optimal_p(channel, energy, lambda1)
    return mu2_dominant1(channel, energy, ps.value, lambda1, check=False)


def pstar_bound_secondary_axis(channel: ChannelModel, energy: EnergyModel, lambda2: float) -> float:
    ps = optimal_p_secondary_axis(channel, energy, lambda2)
    return mu1_dominant2(channel, energy, ps.value, lambda2, check=False)


def grid_pstar_oracle(
    channel: ChannelModel, energy: EnergyModel, lambda1: float, p_grid_size: int = 1001
) -> tuple[float, float]:
    """Brute-force the secondary-rate bound over a uniform p grid.

    Only p with ``lambda1 < mu1_dominant1(p)`` are admissible. Returns the
    first maximizer and its bound.
    """
    if p_grid_size < 2:
        raise ValueError("p_grid_size must be >= 2")
    beta = battery_nonempty_prob(energy)
    if not (0.0 <= lambda1 < beta * channel.q11):
        raise OutOfRegion(f"lambda1={lambda1} not in [0, {beta * channel.q11})")
    best_p, best = math.nan, -math.inf
    for i in range(p_grid_size):
        p = i / (p_grid_size - 1)
        s = channel.q112 * p + channel.q11 * (1.0 - p)
        if not lambda1 < beta * s:
            continue
        y = (channel.q212 * p - channel.q22) / s * lambda1 + channel.q22
        if y > best:
            best_p, best = p, y
    return best_p, best


def grid_pstar_oracle_secondary_axis(
    channel: ChannelModel, energy: EnergyModel, lambda2: float, p_grid_size: int = 1001
) -> tuple[float, float]:
    """Brute-force the primary-rate bound of the second dominant system over a p grid."""
    if p_grid_size < 2:
        raise ValueError("p_grid_size must be >= 2")
    beta = battery_nonempty_prob(energy)
    idle = battery_empty_prob(energy) * channel.q22
    if not (0.0 <= lambda2 < idle + beta * channel.q212):
        raise OutOfRegion(f"lambda2={lambda2} not below {idle + beta * channel.q212}")
    best_p, best = math.nan, -math.inf
    for i in range(p_grid_size):
        p = i / (p_grid_size - 1)
        denom = idle + beta * p * channel.q212
        if not lambda2 < denom:
            continue
        y = beta * p * (channel.q112 - channel.q11) / denom * lambda2 + beta * channel.q11
        if y > best:
            best_p, best = p, y
    return best_p, best


# ---------------------------------------------------------------------------
# serialization


def polyline_to_csv(poly: BoundaryPolyline) -> str:
    out = io.StringIO()
    out.write("lambda1,lambda2,branch\n")
    for (x, y), b in zip(poly.vertices, poly.branches):
        out.write(f"{x!r},{y!r},{b}\n")
    return out.getvalue()


def region_metadata(region: StabilityRegion) -> str:
    cap = "inf" if region.energy.capacity is None else str(region.energy.capacity)
    return (
        f"eta = {region.eta!r}\n"
        f"delta = {region.energy.delta!r}\n"
        f"capacity = {cap}\n"
        f"battery_nonempty_prob = {region.beta!r}\n"
    )
