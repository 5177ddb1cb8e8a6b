"""Slotted Monte Carlo simulator of the cognitive access protocol.

Slot t, in order:

1. the primary is active iff its battery is nonempty and it has a packet
   (or sends a dummy, in the Dominant2 / SaturatedBoth modes);
2. an active primary transmits;
3. the secondary transmits if it has a packet (or a dummy, in Dominant1 /
   SaturatedBoth) and either the primary is idle or its p-draw fires;
4. a lone transmitter i succeeds w.p. q_{i/i}; concurrent transmitters
   succeed independently w.p. q_{1/1,2} and q_{2/1,2};
5. successful real packets leave their queues;
6. a primary transmission spends one energy unit whatever its outcome;
7. a Bernoulli(delta) energy unit is stored iff the battery held fewer than
   ``c`` units at the start of the slot;
8. Bernoulli(lambda_i) packets join the queues.

Arrivals and harvests of slot t are usable from slot t+1. Six uniforms are
drawn every slot, always in the order arrival1, arrival2, harvest, p-draw,
success1, success2, so streams stay aligned across modes.

Replication r of a run seeded with ``seed`` uses
``PCG64(SeedSequence(seed, spawn_key=(r,)))``.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit
from scipy import stats

from .model import Scenario

SLOPE_EPS = 1e-3
DEFAULT_HORIZON = 2_000_000
DEFAULT_BURN_IN = 200_000
DEFAULT_REPLICATIONS = 5

# counters filled by the kernel
_C_ARR1, _C_ARR2, _C_DEP1, _C_DEP2 = 0, 1, 2, 3
_C_HARV, _C_USED, _C_OVER = 4, 5, 6
_C_TP1, _C_TP2, _C_SRV1, _C_SRV2 = 7, 8, 9, 10
_C_ACT1, _C_BNZ, _C_BUSY2, _C_TX1, _C_TX2 = 11, 12, 13, 14, 15
_N_COUNTERS = 16


class InvalidConfig(ValueError):
    pass


class SimMode(str, enum.Enum):
    ORIGINAL = "original"
    DOMINANT1 = "dominant1"  # secondary sends dummies when Q2 is empty
    DOMINANT2 = "dominant2"  # primary sends dummies when Q1 is empty
    SATURATED = "saturated"  # both

    @property
    def primary_dummy(self) -> bool:
        return self in (SimMode.DOMINANT2, SimMode.SATURATED)

    @property
    def secondary_dummy(self) -> bool:
        return self in (SimMode.DOMINANT1, SimMode.SATURATED)


@dataclass
class SystemState:
    q1: int = 0
    q2: int = 0
    b1: int = 0

    def __post_init__(self) -> None:
        if min(self.q1, self.q2, self.b1) < 0:
            raise ValueError("queue and battery levels must be nonnegative")


@dataclass(frozen=True)
class SlotEvents:
    tx1: bool
    tx2: bool
    success1: bool
    success2: bool
    departed1: bool
    departed2: bool
    harvested: bool
    stored: bool
    arrival1: bool
    arrival2: bool


@dataclass(frozen=True)
class SimConfig:
    scenario: Scenario
    mode: SimMode = SimMode.ORIGINAL
    horizon: int = DEFAULT_HORIZON
    burn_in: int = DEFAULT_BURN_IN
    seed: int = 0
    replications: int = DEFAULT_REPLICATIONS
    trajectory_stride: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", SimMode(self.mode))
        if self.horizon < 1 or self.burn_in < 0 or self.burn_in >= self.horizon:
            raise InvalidConfig(f"need 0 <= burn_in < horizon, got {self.burn_in}, {self.horizon}")
        if self.replications < 1:
            raise InvalidConfig("replications must be >= 1")
        if self.trajectory_stride < 0:
            raise InvalidConfig("trajectory_stride must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be an unsigned 64-bit integer")


STAT_FIELDS = (
    "throughput1",
    "throughput2",
    "service1",
    "service2",
    "active_fraction1",
    "battery_nonempty_fraction",
    "secondary_busy_fraction",
    "tx_fraction1",
    "tx_fraction2",
    "queue_slope1",
    "queue_slope2",
    "final_q1",
    "final_q2",
    "final_b1",
)


@dataclass
class ReplicationResult:
    """Statistics of one stream. Rates are per post-burn-in slot.

    ``service1``/``service2`` count successful transmissions including
    dummies; ``throughput1``/``throughput2`` count real deliveries only.
    """

    replication: int
    throughput1: float
    throughput2: float
    service1: float
    service2: float
    active_fraction1: float
    battery_nonempty_fraction: float
    secondary_busy_fraction: float
    tx_fraction1: float
    tx_fraction2: float
    queue_slope1: float
    queue_slope2: float
    final_q1: int
    final_q2: int
    final_b1: int
    stable1: bool
    stable2: bool
    arrivals1: int
    arrivals2: int
    departures1: int
    departures2: int
    harvested: int
    consumed: int
    overflow: int
    trajectory: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass
class SimReport:
    config: SimConfig
    replications: list[ReplicationResult]
    mean: dict[str, float]
    ci_halfwidth: dict[str, float]
    stable1: bool
    stable2: bool

    @property
    def verdicts(self) -> tuple[bool, bool]:
        return self.stable1, self.stable2

    def __getattr__(self, name: str) -> float:
        # report.throughput1 etc. resolve to the across-replication mean
        mean = self.__dict__.get("mean")
        if mean is not None and name in mean:
            return mean[name]
        raise AttributeError(name)

    def to_csv(self) -> str:
        return report_to_csv(self)


# ---------------------------------------------------------------------------
# kernel


@njit(cache=True)
def _simulate(
    rng,
    horizon,
    burn_in,
    lam1,
    lam2,
    delta,
    cap,
    p,
    q11,
    q22,
    q112,
    q212,
    primary_dummy,
    secondary_dummy,
    stride,
    counters,
    lsq,
    traj,
):
    q1 = 0
    q2 = 0
    b1 = 0
    n_traj = 0
    for t in range(horizon):
        u_a1 = rng.random()
        u_a2 = rng.random()
        u_h = rng.random()
        u_p = rng.random()
        u_s1 = rng.random()
        u_s2 = rng.random()

        counted = t >= burn_in
        if counted:
            x = float(t - burn_in)
            lsq[0] += x
            lsq[1] += x * x
            lsq[2] += q1
            lsq[3] += x * q1
            lsq[4] += q2
            lsq[5] += x * q2
            if b1 > 0:
                counters[_C_BNZ] += 1
                if q1 > 0:
                    counters[_C_ACT1] += 1
            if q2 > 0:
                counters[_C_BUSY2] += 1
        if stride > 0 and t % stride == 0:
            traj[n_traj, 0] = t
            traj[n_traj, 1] = q1
            traj[n_traj, 2] = q2
            traj[n_traj, 3] = b1
            n_traj += 1

        b_start = b1
        tx1 = b1 > 0 and (q1 > 0 or primary_dummy)
        has2 = q2 > 0 or secondary_dummy
        if tx1:
            tx2 = has2 and u_p < p
        else:
            tx2 = has2

        ok1 = False
        ok2 = False
        if tx1 and tx2:
            ok1 = u_s1 < q112
            ok2 = u_s2 < q212
        elif tx1:
            ok1 = u_s1 < q11
        elif tx2:
            ok2 = u_s2 < q22

        if ok1:
            if counted:
                counters[_C_SRV1] += 1
            if q1 > 0:
                q1 -= 1
                counters[_C_DEP1] += 1
                if counted:
                    counters[_C_TP1] += 1
        if ok2:
            if counted:
                counters[_C_SRV2] += 1
            if q2 > 0:
                q2 -= 1
                counters[_C_DEP2] += 1
                if counted:
                    counters[_C_TP2] += 1
        if tx1:
            b1 -= 1
            counters[_C_USED] += 1
            if counted:
                counters[_C_TX1] += 1
        if tx2 and counted:
            counters[_C_TX2] += 1

        if u_h < delta:
            counters[_C_HARV] += 1
            if cap < 0 or b_start < cap:
                b1 += 1
            else:
                counters[_C_OVER] += 1
        if u_a1 < lam1:
            q1 += 1
            counters[_C_ARR1] += 1
        if u_a2 < lam2:
            q2 += 1
            counters[_C_ARR2] += 1
    return q1, q2, b1, n_traj


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replication,))))


def _slope(lsq: np.ndarray, n: int, which: int) -> float:
    sx, sxx = lsq[0], lsq[1]
    sy, sxy = lsq[2 + 2 * which], lsq[3 + 2 * which]
    den = n * sxx - sx * sx
    if n < 2 or den == 0:
        return 0.0
    return (n * sxy - sx * sy) / den


def q_cap(horizon: int) -> float:
    return 10.0 * math.sqrt(horizon)


def run_replication(config: SimConfig, replication: int) -> ReplicationResult:
    sc = config.scenario
    ch, en = sc.channel, sc.energy
    counters = np.zeros(_N_COUNTERS, dtype=np.int64)
    lsq = np.zeros(6, dtype=np.float64)
    stride = config.trajectory_stride
    n_rows = (config.horizon + stride - 1) // stride if stride else 0
    traj = np.zeros((max(n_rows, 1), 4), dtype=np.int64)
    q1, q2, b1, n_traj = _simulate(
        replication_rng(config.seed, replication),
        config.horizon,
        config.burn_in,
        sc.arrivals.lambda1,
        sc.arrivals.lambda2,
        en.delta,
        -1 if en.capacity is None else en.capacity,
        sc.policy.p,
        ch.q11,
        ch.q22,
        ch.q112,
        ch.q212,
        config.mode.primary_dummy,
        config.mode.secondary_dummy,
        stride,
        counters,
        lsq,
        traj,
    )
    n = config.horizon - config.burn_in
    slope1, slope2 = _slope(lsq, n, 0), _slope(lsq, n, 1)
    cap = q_cap(config.horizon)
    return ReplicationResult(
        replication=replication,
        throughput1=counters[_C_TP1] / n,
        throughput2=counters[_C_TP2] / n,
        service1=counters[_C_SRV1] / n,
        service2=counters[_C_SRV2] / n,
        active_fraction1=counters[_C_ACT1] / n,
        battery_nonempty_fraction=counters[_C_BNZ] / n,
        secondary_busy_fraction=counters[_C_BUSY2] / n,
        tx_fraction1=counters[_C_TX1] / n,
        tx_fraction2=counters[_C_TX2] / n,
        queue_slope1=slope1,
        queue_slope2=slope2,
        final_q1=int(q1),
        final_q2=int(q2),
        final_b1=int(b1),
        stable1=bool(slope1 < SLOPE_EPS and q1 < cap),
        stable2=bool(slope2 < SLOPE_EPS and q2 < cap),
        arrivals1=int(counters[_C_ARR1]),
        arrivals2=int(counters[_C_ARR2]),
        departures1=int(counters[_C_DEP1]),
        departures2=int(counters[_C_DEP2]),
        harvested=int(counters[_C_HARV]),
        consumed=int(counters[_C_USED]),
        overflow=int(counters[_C_OVER]),
        trajectory=traj[:n_traj].copy() if stride else None,
    )


def _ci_halfwidth(values: Sequence[float]) -> float:
    n = len(values)
    if n < 2:
        return math.inf
    sd = float(np.std(values, ddof=1))
    return float(stats.t.ppf(0.975, n - 1)) * sd / math.sqrt(n)


def aggregate(config: SimConfig, reps: list[ReplicationResult]) -> SimReport:
    reps = sorted(reps, key=lambda r: r.replication)
    mean, ci = {}, {}
    for name in STAT_FIELDS:
        vals = [float(getattr(r, name)) for r in reps]
        mean[name] = float(np.mean(vals))
        ci[name] = _ci_halfwidth(vals)
    votes1 = sum(r.stable1 for r in reps)
    votes2 = sum(r.stable2 for r in reps)
    return SimReport(
        config=config,
        replications=reps,
        mean=mean,
        ci_halfwidth=ci,
        stable1=2 * votes1 > len(reps),
        stable2=2 * votes2 > len(reps),
    )


def _run_one(args: tuple[SimConfig, int]) -> ReplicationResult:
    return run_replication(*args)


def run(config: SimConfig, workers: int = 1) -> SimReport:
    """Run all replications of ``config`` and aggregate them in replication order."""
    jobs = [(config, r) for r in range(config.replications)]
    if workers > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reps = list(pool.map(_run_one, jobs))
    else:
        reps = [_run_one(j) for j in jobs]
    return aggregate(config, reps)


def saturated_service_rates(
    scenario: Scenario,
    mode: SimMode = SimMode.SATURATED,
    horizon: int = 1_000_000,
    seed: int = 0,
    replications: int = DEFAULT_REPLICATIONS,
) -> tuple[float, float]:
    """Empirical successful-transmission rates (dummies included) with queues forced busy."""
    mode = SimMode(mode)
    if mode is SimMode.ORIGINAL:
        raise InvalidConfig("saturated service rates need a dominant or saturated mode")
    cfg = SimConfig(scenario, mode, horizon, horizon // 10, seed, replications)
    rep = run(cfg)
    return rep.mean["service1"], rep.mean["service2"]


def stability_probe(
    scenario: Scenario,
    horizon: int = DEFAULT_HORIZON,
    seed: int = 0,
    replications: int = DEFAULT_REPLICATIONS,
    burn_in: Optional[int] = None,
) -> tuple[bool, bool]:
    """Majority-vote stability verdicts of the original system."""
    if burn_in is None:
        burn_in = horizon // 10
    rep = run(SimConfig(scenario, SimMode.ORIGINAL, horizon, burn_in, seed, replications))
    return rep.stable1, rep.stable2


def step(
    state: SystemState,
    scenario: Scenario,
    mode: SimMode,
    u: Sequence[float],
) -> tuple[SystemState, SlotEvents]:
    """Execute one slot from explicit uniforms ``u`` (six values, draw order as above).

    Pure-Python mirror of the kernel, meant for tracing and tests.
    """
    mode = SimMode(mode)
    u_a1, u_a2, u_h, u_p, u_s1, u_s2 = u
    ch, en = scenario.channel, scenario.energy
    q1, q2, b1 = state.q1, state.q2, state.b1
    b_start = b1

    tx1 = b1 > 0 and (q1 > 0 or mode.primary_dummy)
    has2 = q2 > 0 or mode.secondary_dummy
    tx2 = has2 and (u_p < scenario.policy.p if tx1 else True)

    ok1 = ok2 = False
    if tx1 and tx2:
        ok1, ok2 = u_s1 < ch.q112, u_s2 < ch.q212
    elif tx1:
        ok1 = u_s1 < ch.q11
    elif tx2:
        ok2 = u_s2 < ch.q22

    dep1 = ok1 and q1 > 0
    dep2 = ok2 and q2 > 0
    q1 -= dep1
    q2 -= dep2
    if tx1:
        b1 -= 1
    harvested = u_h < en.delta
    stored = harvested and (en.capacity is None or b_start < en.capacity)
    b1 += stored
    a1 = u_a1 < scenario.arrivals.lambda1
    a2 = u_a2 < scenario.arrivals.lambda2
    q1 += a1
    q2 += a2
    events = SlotEvents(tx1, tx2, ok1, ok2, dep1, dep2, harvested, stored, a1, a2)
    return SystemState(q1, q2, b1), events


# ---------------------------------------------------------------------------
# CSV

REPORT_COLUMNS = (
    ("replication",)
    + STAT_FIELDS
    + ("stable1", "stable2")
)
COUNT_COLUMNS = (
    "arrivals1",
    "arrivals2",
    "departures1",
    "departures2",
    "harvested",
    "consumed",
    "overflow",
)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def report_to_csv(report: SimReport, header: Optional[dict] = None) -> str:
    """One row per replication, then ``mean`` and ``ci95`` rows.

    ``header`` entries are written first as ``# key = value`` comment lines.
    """
    out = io.StringIO()
    for k, v in (header or {}).items():
        out.write(f"# {k} = {v}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(REPORT_COLUMNS + COUNT_COLUMNS)
    for r in report.replications:
        d = asdict(r)
        w.writerow([_fmt(d[c]) for c in REPORT_COLUMNS + COUNT_COLUMNS])
    w.writerow(
        ["mean"]
        + [_fmt(report.mean[c]) for c in STAT_FIELDS]
        + [_fmt(report.stable1), _fmt(report.stable2)]
        + [""] * len(COUNT_COLUMNS)
    )
    w.writerow(
        ["ci95"]
        + [_fmt(report.ci_halfwidth[c]) for c in STAT_FIELDS]
        + ["", ""]
        + [""] * len(COUNT_COLUMNS)
    )
    return out.getvalue()


def trajectory_to_csv(traj: np.ndarray) -> str:
    out = io.StringIO()
    out.write("slot,q1,q2,b1\n")
    for row in traj:
        out.write(f"{row[0]},{row[1]},{row[2]},{row[3]}\n")
    return out.getvalue()
