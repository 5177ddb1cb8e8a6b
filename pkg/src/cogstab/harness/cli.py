"""Command line interface: ``cogstab {region,simulate,sweep,validate}``.

Exit codes: 0 success, 1 usage or configuration error, 2 validation failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from ..model import SCENARIO_KEYS, parse_capacity
from ..regions import boundary_polyline, build_region, polyline_to_csv, region_metadata
from ..sim import (
    DEFAULT_BURN_IN,
    DEFAULT_HORIZON,
    DEFAULT_REPLICATIONS,
    InvalidConfig,
    SimConfig,
    SimMode,
    report_to_csv,
    run,
    trajectory_to_csv,
)
from . import validation
from .config import ConfigError, header_lines, load_config, merge, scenario_from
from .svg import render_svg
from .sweep import SWEEP_PARAMS, SweepSpec, run_sweep, sweep_to_csv

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _common(p: argparse.ArgumentParser, scenario: bool = True) -> None:
    p.add_argument("--config", help="flat YAML/JSON config file")
    p.add_argument("--seed", type=_u64, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", help="output path")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    if scenario:
        g = p.add_argument_group("scenario (override config values)")
        for key in SCENARIO_KEYS:
            if key == "capacity":
                g.add_argument("--capacity", help="battery capacity, integer or 'inf'")
            else:
                g.add_argument(f"--{key}", type=float)


def _sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=[m.value for m in SimMode])
    p.add_argument("--horizon", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--replications", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cogstab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("region", help="closed-form region frontier as CSV and SVG")
    _common(p)
    p.add_argument("--n-points", dest="n_points", type=int)
    p.add_argument(
        "--finite-capacity",
        dest="finite_capacity",
        type=int,
        help="also draw the finite-battery region with this capacity (dotted)",
    )

    p = sub.add_parser("simulate", help="run the slotted simulator")
    _common(p)
    _sim_flags(p)
    p.add_argument("--trajectory-stride", dest="trajectory_stride", type=int)

    p = sub.add_parser("sweep", help="simulate over a grid of one parameter")
    _common(p)
    _sim_flags(p)
    p.add_argument("--param", choices=sorted(SWEEP_PARAMS))
    p.add_argument("--grid", help="comma-separated values")

    p = sub.add_parser("validate", help="analytic vs simulation campaign")
    _common(p, scenario=False)
    p.add_argument("suite", choices=validation.SUITES)
    p.add_argument("--horizon", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--inset", type=float, help="relative boundary offset (default 0.05)")
    p.add_argument("--n-per-side", dest="n_per_side", type=int, help="boundary points per side (default 40)")
    p.add_argument("--n-configs", dest="n_configs", type=int, help="random p* configurations (default 200)")
    p.add_argument("--grid-size", dest="grid_size", type=int, help="p grid of the oracle (default 1001)")
    return parser


def _effective(args: argparse.Namespace, keys: Sequence[str]) -> dict[str, Any]:
    base = load_config(args.config) if args.config else {}
    flags = {k: getattr(args, k, None) for k in keys}
    return merge(base, flags)


def _write(path: Optional[str], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _prefix(out: Optional[str], default: str) -> Path:
    path = Path(out or default)
    return path.with_suffix("") if path.suffix in (".csv", ".svg") else path


def cmd_region(args: argparse.Namespace) -> int:
    cfg = _effective(args, SCENARIO_KEYS + ("seed", "n_points", "finite_capacity"))
    scenario = scenario_from(cfg)
    n_points = int(cfg.get("n_points", 50))
    prefix = _prefix(args.out, "region")
    ch, en = scenario.channel, scenario.energy

    cases = []
    if cfg.get("finite_capacity") is not None:
        finite = parse_capacity(cfg["finite_capacity"])
        if finite is None:
            raise ConfigError("finite_capacity must be an integer")
        cases.append(("infinite", type(en)(en.delta, None), False, prefix))
        cases.append((f"finite c={finite}", type(en)(en.delta, finite), True, Path(f"{prefix}_finite")))
    else:
        label = "infinite" if en.capacity is None else f"finite c={en.capacity}"
        cases.append((label, en, en.capacity is not None, prefix))

    curves = []
    for label, energy, dotted, stem in cases:
        region = build_region(ch, energy)
        poly = boundary_polyline(region, n_points)
        Path(f"{stem}.csv").write_text(polyline_to_csv(poly))
        Path(f"{stem}.meta").write_text(region_metadata(region))
        curves.append((label, region, poly, dotted))
        print(f"wrote {stem}.csv ({len(poly)} vertices, eta={region.eta:.6g}, beta={region.beta:.6g})")
    title = f"q=({ch.q11:g}, {ch.q22:g}, {ch.q112:g}, {ch.q212:g}), delta={en.delta:g}"
    Path(f"{prefix}.svg").write_text(render_svg(curves, title))
    print(f"wrote {prefix}.svg")
    return EXIT_OK


def _sim_config(cfg: dict[str, Any]) -> SimConfig:
    return SimConfig(
        scenario=scenario_from(cfg),
        mode=SimMode(cfg.get("mode", SimMode.ORIGINAL.value)),
        horizon=int(cfg.get("horizon", DEFAULT_HORIZON)),
        burn_in=int(cfg.get("burn_in", min(DEFAULT_BURN_IN, int(cfg.get("horizon", DEFAULT_HORIZON)) // 10))),
        seed=int(cfg.get("seed", 0)),
        replications=int(cfg.get("replications", DEFAULT_REPLICATIONS)),
        trajectory_stride=int(cfg.get("trajectory_stride", 0)),
    )


SIM_KEYS = SCENARIO_KEYS + ("mode", "horizon", "burn_in", "replications", "seed", "workers")


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _effective(args, SIM_KEYS + ("trajectory_stride",))
    config = _sim_config(cfg)
    report = run(config, workers=int(cfg.get("workers", 1)))
    header = header_lines({**cfg, **_resolved(config)})
    _write(args.out, report_to_csv(report, header))
    if args.out:
        m, ci = report.mean, report.ci_halfwidth
        for key in ("throughput1", "throughput2", "service1", "service2", "active_fraction1",
                    "battery_nonempty_fraction", "queue_slope1", "queue_slope2"):
            print(f"{key:>26} = {m[key]:.6f} +/- {ci[key]:.2g}")
        print(f"{'stable':>26} = ({report.stable1}, {report.stable2})")
        if config.trajectory_stride:
            stem = _prefix(args.out, "report")
            for r in report.replications:
                Path(f"{stem}_traj_r{r.replication}.csv").write_text(trajectory_to_csv(r.trajectory))
    return EXIT_OK


def _resolved(config: SimConfig) -> dict[str, Any]:
    return {
        "mode": config.mode.value,
        "horizon": config.horizon,
        "burn_in": config.burn_in,
        "replications": config.replications,
        "seed": config.seed,
    }


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _effective(args, SIM_KEYS + ("param", "grid"))
    base = _sim_config(cfg)
    param, grid_text = cfg.get("param"), cfg.get("grid")
    if param is None or grid_text is None:
        raise ConfigError("sweep needs --param and --grid (or param/grid config keys)")
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"cannot sweep {param!r}; choose from {sorted(SWEEP_PARAMS)}")
    try:
        grid = [_parse_grid_value(param, v) for v in str(grid_text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid: {exc}") from exc
    spec = SweepSpec(
        scenario=base.scenario,
        param=param,
        grid=grid,
        mode=base.mode,
        overrides={
            "horizon": base.horizon,
            "burn_in": base.burn_in,
            "replications": base.replications,
            "seed": base.seed,
        },
    )
    reports = run_sweep(spec, workers=int(cfg.get("workers", 1)))
    header = header_lines({**cfg, **_resolved(base)})
    header["grid"] = ",".join(str(v) for v in grid)
    _write(args.out, sweep_to_csv(spec, reports, header))
    return EXIT_OK


def _parse_grid_value(param: str, text: str) -> Any:
    text = text.strip()
    if param == "c":
        cap = parse_capacity(text)
        return "inf" if cap is None else cap
    return float(text)


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = _effective(
        args,
        ("seed", "workers", "horizon", "replications", "inset", "n_per_side", "n_configs", "grid_size"),
    )
    kw: dict[str, Any] = {"seed": int(cfg.get("seed", 0))}
    if args.suite == "pstar":
        kw.update(n_configs=int(cfg.get("n_configs", 200)), grid=int(cfg.get("grid_size", 1001)))
    else:
        kw["workers"] = int(cfg.get("workers", 1))
        for key in ("horizon", "replications"):
            if key in cfg:
                kw[key] = int(cfg[key])
        if args.suite == "boundary":
            kw.update(inset=float(cfg.get("inset", 0.05)), n_per_side=int(cfg.get("n_per_side", 40)))
    report = validation.CAMPAIGNS[args.suite](**kw)
    _write(args.out, report.to_csv())
    if args.out:
        print(report.summary())
    for r in report.failures[:50]:
        print(
            f"FAIL {r.quantity} channel={r.channel} delta={r.delta} c={r.capacity} p={r.p:.4g} "
            f"l1={r.lambda1:.4g} l2={r.lambda2:.4g}: analytic={r.analytic:.6g} "
            f"simulated={r.simulated:.6g} ci={r.ci_halfwidth:.2g} tol={r.tolerance:.2g}",
            file=sys.stderr,
        )
    return EXIT_OK if report.ok else EXIT_VALIDATION


COMMANDS = {
    "region": cmd_region,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InvalidConfig, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"cogstab {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
