"""Analytic-versus-simulation validation campaigns.

Each campaign returns a :class:`ValidationReport`. A record passes iff
``|analytic - simulated| <= max(3 * ci_halfwidth, tolerance)``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ..model import (
    AccessPolicy,
    ArrivalRates,
    ChannelModel,
    EnergyModel,
    Scenario,
    battery_empty_prob,
    battery_nonempty_prob,
    delta1,
    eta,
)
from ..regions import (
    R2_DPRIME,
    R2_PRIME,
    build_region,
    frontier_lambda2,
    grid_pstar_oracle,
    grid_pstar_oracle_secondary_axis,
    max_lambda1,
    max_lambda2,
    mu1_dominant1,
    mu2_dominant2,
    optimal_p,
    optimal_p_secondary_axis,
    pstar_bound,
    pstar_bound_secondary_axis,
)
from ..sim import SimConfig, SimMode, SimReport, run

STAT_ABS_TOL = 5e-3
DET_TOL = 1e-9

CHANNELS = {
    "C0": ChannelModel(0.9, 0.8, 0.6, 0.5),
    "C1": ChannelModel(0.9, 0.8, 0.2, 0.1),
    "collision": ChannelModel.collision(),
}
DELTAS = (0.2, 0.5, 0.8)
CAPACITIES: tuple[Optional[int], ...] = (1, 2, 5, None)
ACCESS_PS = (0.0, 0.5, 1.0)

SUITES = ("service-rates", "battery", "active-fraction", "boundary", "pstar")


@dataclass
class ValidationRecord:
    suite: str
    channel: str
    delta: float
    capacity: str
    p: float
    lambda1: float
    lambda2: float
    quantity: str
    analytic: float
    simulated: float
    ci_halfwidth: float
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self) -> None:
        ci = self.ci_halfwidth if math.isfinite(self.ci_halfwidth) else 0.0
        self.passed = abs(self.analytic - self.simulated) <= max(3.0 * ci, self.tolerance)

    @property
    def deviation(self) -> float:
        return abs(self.analytic - self.simulated)


@dataclass
class ValidationReport:
    suite: str
    records: list[ValidationRecord]

    @property
    def pass_rate(self) -> float:
        return sum(r.passed for r in self.records) / len(self.records) if self.records else 1.0

    @property
    def worst_deviation(self) -> float:
        return max((r.deviation for r in self.records), default=0.0)

    @property
    def failures(self) -> list[ValidationRecord]:
        return [r for r in self.records if not r.passed]

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.records)

    def summary(self) -> str:
        n = len(self.records)
        return (
            f"{self.suite}: {n - len(self.failures)}/{n} passed "
            f"(pass rate {self.pass_rate:.4f}, worst deviation {self.worst_deviation:.3g})"
        )

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        cols = [f for f in ValidationRecord.__dataclass_fields__]
        w.writerow(cols)
        for r in self.records:
            d = asdict(r)
            w.writerow([_fmt(d[c]) for c in cols])
        return out.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _cap(c: Optional[int]) -> str:
    return "inf" if c is None else str(c)


def point_seed(seed: int, index: int) -> int:
    """Seed of the ``index``-th point of a campaign seeded with ``seed``."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def _run_all(configs: Sequence[SimConfig], workers: int) -> list[SimReport]:
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, configs))
    return [run(c) for c in configs]


# ---------------------------------------------------------------------------
# saturated grid (service rates and battery occupancy)


def saturated_grid() -> list[tuple[str, float, Optional[int], float]]:
    return [
        (name, d, c, p)
        for name in CHANNELS
        for d in DELTAS
        for c in CAPACITIES
        for p in ACCESS_PS
    ]


@lru_cache(maxsize=4)
def _saturated_runs(seed: int, horizon: int, replications: int, workers: int) -> tuple:
    configs = []
    for i, (name, d, c, p) in enumerate(saturated_grid()):
        sc = Scenario(CHANNELS[name], EnergyModel(d, c), policy=AccessPolicy(p))
        configs.append(
            SimConfig(sc, SimMode.SATURATED, horizon, horizon // 10, point_seed(seed, i), replications)
        )
    return tuple(_run_all(configs, workers))


def service_rates(
    seed: int = 0, horizon: int = 1_000_000, replications: int = 5, workers: int = 1
) -> ValidationReport:
    records = []
    for (name, d, c, p), rep in zip(saturated_grid(), _saturated_runs(seed, horizon, replications, workers)):
        ch, en = CHANNELS[name], EnergyModel(d, c)
        common = dict(suite="service-rates", channel=name, delta=d, capacity=_cap(c), p=p, lambda1=0.0, lambda2=0.0)
        records.append(
            ValidationRecord(
                **common,
                quantity="mu1_dominant1",
                analytic=mu1_dominant1(ch, en, p),
                simulated=rep.mean["service1"],
                ci_halfwidth=rep.ci_halfwidth["service1"],
                tolerance=STAT_ABS_TOL,
            )
        )
        records.append(
            ValidationRecord(
                **common,
                quantity="mu2_dominant2",
                analytic=mu2_dominant2(ch, en, p),
                simulated=rep.mean["service2"],
                ci_halfwidth=rep.ci_halfwidth["service2"],
                tolerance=STAT_ABS_TOL,
            )
        )
    return ValidationReport("service-rates", records)


def battery(
    seed: int = 0, horizon: int = 1_000_000, replications: int = 5, workers: int = 1
) -> ValidationReport:
    records = []
    for (name, d, c, p), rep in zip(saturated_grid(), _saturated_runs(seed, horizon, replications, workers)):
        records.append(
            ValidationRecord(
                suite="battery",
                channel=name,
                delta=d,
                capacity=_cap(c),
                p=p,
                lambda1=0.0,
                lambda2=0.0,
                quantity="battery_nonempty_prob",
                analytic=battery_nonempty_prob(EnergyModel(d, c)),
                simulated=rep.mean["battery_nonempty_fraction"],
                ci_halfwidth=rep.ci_halfwidth["battery_nonempty_fraction"],
                tolerance=STAT_ABS_TOL,
            )
        )
    return ValidationReport("battery", records)


def active_fraction(
    seed: int = 0,
    horizon: int = 1_000_000,
    replications: int = 5,
    workers: int = 1,
    load: float = 0.5,
) -> ValidationReport:
    """Dominant1 runs with lambda1 = load * mu1; the active fraction should be lambda1 / s."""
    points, configs = [], []
    for i, (name, d, c, p) in enumerate(saturated_grid()):
        ch, en = CHANNELS[name], EnergyModel(d, c)
        mu1 = mu1_dominant1(ch, en, p)
        if mu1 <= 0.0:
            continue
        lam1 = load * mu1
        sc = Scenario(ch, en, ArrivalRates(lam1, 0.1), AccessPolicy(p))
        points.append((name, d, c, p, lam1))
        configs.append(
            SimConfig(sc, SimMode.DOMINANT1, horizon, horizon // 10, point_seed(seed, i), replications)
        )
    records = []
    for (name, d, c, p, lam1), rep in zip(points, _run_all(configs, workers)):
        ch = CHANNELS[name]
        s = ch.q112 * p + ch.q11 * (1.0 - p)
        records.append(
            ValidationRecord(
                suite="active-fraction",
                channel=name,
                delta=d,
                capacity=_cap(c),
                p=p,
                lambda1=lam1,
                lambda2=0.1,
                quantity="active_fraction1",
                analytic=lam1 / s,
                simulated=rep.mean["active_fraction1"],
                ci_halfwidth=rep.ci_halfwidth["active_fraction1"],
                tolerance=STAT_ABS_TOL,
            )
        )
    return ValidationReport("active-fraction", records)


# ---------------------------------------------------------------------------
# boundary classification


@dataclass(frozen=True)
class BoundaryPoint:
    channel: str
    capacity: Optional[int]
    side: str  # "inside" or "outside"
    lambda1: float
    lambda2: float
    p: float
    queue: int  # queue whose verdict is checked on the outside; 0 = both (inside)


def boundary_points(
    channel_name: str,
    delta: float,
    capacity: Optional[int],
    n_per_side: int = 40,
    inset: float = 0.05,
) -> list[BoundaryPoint]:
    """Points at relative inset inside and outside the analytic frontier.

    Frontier points (x, y) sit at lambda1 = extent*(k + 1/2)/n. The inside
    point (1-inset)(x, y) runs at the p achieving (x, y); the outside point
    (1+inset)(x, y) runs at the best p for its own lambda1 when one exists.
    """
    ch = CHANNELS[channel_name]
    en = EnergyModel(delta, capacity)
    region = build_region(ch, en)
    extent = region.lambda1_extent
    pts = []
    for k in range(n_per_side):
        x = extent * (k + 0.5) / n_per_side
        y, _ = frontier_lambda2(region, x)
        p_here = optimal_p(ch, en, x).value
        pts.append(BoundaryPoint(channel_name, capacity, "inside", (1 - inset) * x, (1 - inset) * y, p_here, 0))
        xo, yo = (1 + inset) * x, (1 + inset) * y
        if xo < extent:
            pts.append(BoundaryPoint(channel_name, capacity, "outside", xo, yo, optimal_p(ch, en, xo).value, 2))
        else:
            pts.append(BoundaryPoint(channel_name, capacity, "outside", xo, yo, p_here, 1))
    return pts


BOUNDARY_DELTA = 0.5
BOUNDARY_CAPACITIES: tuple[Optional[int], ...] = (None, 1, 2)


def boundary(
    seed: int = 0,
    horizon: int = 2_000_000,
    replications: int = 5,
    workers: int = 1,
    inset: float = 0.05,
    n_per_side: int = 40,
    channels: Iterable[str] = tuple(CHANNELS),
    capacities: Iterable[Optional[int]] = BOUNDARY_CAPACITIES,
    delta: float = BOUNDARY_DELTA,
) -> ValidationReport:
    points: list[BoundaryPoint] = []
    for name in channels:
        for c in capacities:
            points.extend(boundary_points(name, delta, c, n_per_side, inset))
    configs = []
    for i, bp in enumerate(points):
        sc = Scenario(
            CHANNELS[bp.channel],
            EnergyModel(delta, bp.capacity),
            ArrivalRates(min(bp.lambda1, 1.0), min(bp.lambda2, 1.0)),
            AccessPolicy(bp.p),
        )
        configs.append(
            SimConfig(sc, SimMode.ORIGINAL, horizon, horizon // 10, point_seed(seed, i), replications)
        )
    records = []
    for bp, rep in zip(points, _run_all(configs, workers)):
        common = dict(
            suite="boundary",
            channel=bp.channel,
            delta=delta,
            capacity=_cap(bp.capacity),
            p=bp.p,
            lambda1=bp.lambda1,
            lambda2=bp.lambda2,
            ci_halfwidth=0.0,
            tolerance=0.0,
        )
        if bp.side == "inside":
            for q, verdict in ((1, rep.stable1), (2, rep.stable2)):
                records.append(
                    ValidationRecord(**common, quantity=f"inside_stable{q}", analytic=1.0, simulated=float(verdict))
                )
        else:
            verdict = rep.stable1 if bp.queue == 1 else rep.stable2
            records.append(
                ValidationRecord(**common, quantity=f"outside_stable{bp.queue}", analytic=0.0, simulated=float(verdict))
            )
    return ValidationReport("boundary", records)


# ---------------------------------------------------------------------------
# p* versus brute force


def random_configs(seed: int, n: int) -> list[tuple[ChannelModel, EnergyModel, float, float]]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    caps = (None, 1, 2, 5, 10, 64)
    out = []
    for _ in range(n):
        q11, q22 = rng.uniform(0.05, 1.0, size=2)
        ch = ChannelModel(float(q11), float(q22), float(rng.uniform(0, q11)), float(rng.uniform(0, q22)))
        en = EnergyModel(float(rng.uniform(0.05, 0.95)), caps[int(rng.integers(len(caps)))])
        beta = battery_nonempty_prob(en)
        lam1 = float(rng.uniform(0, beta * ch.q11))
        upper2 = battery_empty_prob(en) * ch.q22 + beta * ch.q212
        lam2 = float(rng.uniform(0, upper2))
        out.append((ch, en, lam1, lam2))
    return out


def pstar(seed: int = 0, n_configs: int = 200, grid: int = 1001) -> ValidationReport:
    step = 1.0 / (grid - 1)
    records = []
    for ch, en, lam1, lam2 in random_configs(seed, n_configs):
        beta = battery_nonempty_prob(en)
        region = build_region(ch, en)
        label = ",".join(repr(v) for v in (ch.q11, ch.q22, ch.q112, ch.q212))
        base = dict(suite="pstar", channel=label, delta=en.delta, capacity=_cap(en.capacity), ci_halfwidth=0.0)

        # primary axis
        ps = optimal_p(ch, en, lam1)
        p_or, y_or = grid_pstar_oracle(ch, en, lam1, grid)
        y_cf = pstar_bound(ch, en, lam1)
        s_min = max(ch.q112, lam1 / beta) if beta > 0 else ch.q11
        lip = abs(eta(ch)) * lam1 / (s_min * s_min) if s_min > 0 else math.inf
        ax = dict(base, p=ps.value, lambda1=lam1, lambda2=y_cf)
        records.append(ValidationRecord(**ax, quantity="p_star", analytic=ps.value, simulated=p_or, tolerance=step + 1e-12))
        records.append(
            ValidationRecord(**ax, quantity="bound_vs_region", analytic=y_cf, simulated=max_lambda2(region, lam1), tolerance=DET_TOL)
        )
        records.append(
            ValidationRecord(**ax, quantity="bound_vs_oracle", analytic=y_cf, simulated=y_or, tolerance=lip * step + DET_TOL)
        )
        # the grid can never beat the closed form
        records.append(
            ValidationRecord(**ax, quantity="oracle_excess", analytic=0.0, simulated=max(0.0, y_or - y_cf), tolerance=DET_TOL)
        )

        # secondary axis
        ps2 = optimal_p_secondary_axis(ch, en, lam2)
        p_or2, x_or = grid_pstar_oracle_secondary_axis(ch, en, lam2, grid)
        x_cf = pstar_bound_secondary_axis(ch, en, lam2)
        r2 = region.subset(R2_PRIME, R2_DPRIME)
        den_min = max(battery_empty_prob(en) * ch.q22, lam2)
        theta = beta * battery_empty_prob(en) * ch.q22 * delta1(ch)
        lip2 = theta * lam2 / (den_min * den_min) if den_min > 0 else math.inf
        ax2 = dict(base, p=ps2.value, lambda1=x_cf, lambda2=lam2)
        records.append(
            ValidationRecord(**ax2, quantity="p_star_secondary", analytic=ps2.value, simulated=p_or2, tolerance=step + 1e-12)
        )
        records.append(
            ValidationRecord(
                **ax2, quantity="bound_vs_region_secondary", analytic=x_cf, simulated=max_lambda1(r2, lam2), tolerance=DET_TOL
            )
        )
        records.append(
            ValidationRecord(
                **ax2, quantity="bound_vs_oracle_secondary", analytic=x_cf, simulated=x_or, tolerance=lip2 * step + DET_TOL
            )
        )
        records.append(
            ValidationRecord(
                **ax2, quantity="oracle_excess_secondary", analytic=0.0, simulated=max(0.0, x_or - x_cf), tolerance=DET_TOL
            )
        )
    return ValidationReport("pstar", records)


CAMPAIGNS: dict[str, Callable[..., ValidationReport]] = {
    "service-rates": service_rates,
    "battery": battery,
    "active-fraction": active_fraction,
    "boundary": boundary,
    "pstar": pstar,
}
