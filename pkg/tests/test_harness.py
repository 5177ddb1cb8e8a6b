import csv
import io
import json
import re

import pytest

from cogstab.harness import validation
from cogstab.harness.cli import main
from cogstab.harness.config import ConfigError, load_config, merge, scenario_from
from cogstab.harness.sweep import SweepSpec, run_sweep, sweep_to_csv
from cogstab.model import Scenario
from cogstab.sim import SimMode

C0 = dict(q11=0.9, q22=0.8, q112=0.6, q212=0.5, delta=0.4)
COLL = dict(q11=1.0, q22=1.0, q112=0.0, q212=0.0, delta=0.5)


def write_cfg(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if name.endswith(".json") else "\n".join(f"{k}: {v}" for k, v in data.items()))
    return str(path)


def data_rows(text):
    return list(csv.reader(l for l in io.StringIO(text) if not l.startswith("#")))


# config


def test_load_yaml_and_json(tmp_path):
    a = load_config(write_cfg(tmp_path, {**C0, "capacity": "inf"}))
    b = load_config(write_cfg(tmp_path, {**C0, "capacity": "inf"}, "cfg.json"))
    assert a == b
    assert scenario_from(a).energy.capacity is None


@pytest.mark.parametrize("text", ["q11: 0.9\nq12: 0.3\n", "- 1\n- 2\n", "q11: [1, 2]\n", "q11: {a: 1}\n", "q11: : :\n"])
def test_bad_config(tmp_path, text):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


def test_flags_override_file():
    merged = merge({**C0, "p": 0.1}, {"p": 0.7, "delta": None})
    assert merged["p"] == 0.7 and merged["delta"] == 0.4


def test_scenario_errors_are_config_errors():
    with pytest.raises(ConfigError):
        scenario_from({"q11": 0.5})
    with pytest.raises(ConfigError):
        scenario_from({**C0, "q11": 1.5})


# cli: region


def test_region_files(tmp_path):
    cfg = write_cfg(tmp_path, {**C0, "capacity": "inf"})
    out = tmp_path / "fig"
    assert main(["region", "--config", cfg, "--n-points", "20", "--finite-capacity", "2", "--out", str(out)]) == 0
    inf_rows = data_rows((tmp_path / "fig.csv").read_text())
    fin_rows = data_rows((tmp_path / "fig_finite.csv").read_text())
    assert inf_rows[0] == ["lambda1", "lambda2", "branch"]
    meta = (tmp_path / "fig_finite.meta").read_text()
    assert re.search(r"^capacity = 2$", meta, re.M)
    for key in ("eta", "delta", "battery_nonempty_prob"):
        assert re.search(rf"^{key} = ", meta, re.M)

    # finite frontier nowhere above the infinite one
    from cogstab.model import EnergyModel
    from cogstab.regions import build_region, frontier_lambda2

    inf_region = build_region(scenario_from(C0).channel, EnergyModel(0.4))
    for x, y, _ in fin_rows[1:]:
        assert float(y) <= frontier_lambda2(inf_region, float(x))[0] + 1e-12

    svg = (tmp_path / "fig.svg").read_text()
    assert svg.startswith("<svg") and 'width="800" height="600"' in svg
    assert svg.count("<path") == 2 and "stroke-dasharray" in svg
    assert "&#948;q11" in svg and "&#946;q11" in svg
    assert ">A<" in svg and ">B<" in svg


def test_region_collision_single_line(tmp_path):
    cfg = write_cfg(tmp_path, COLL)
    assert main(["region", "--config", cfg, "--n-points", "11", "--out", str(tmp_path / "c.csv")]) == 0
    rows = data_rows((tmp_path / "c.csv").read_text())[1:]
    assert all(abs(float(x) + float(y) - 1.0) < 1e-12 for x, y, _ in rows)
    assert float(rows[-1][0]) == pytest.approx(0.5, abs=1e-15)
    svg = (tmp_path / "c.svg").read_text()
    assert svg.count("<path") == 1 and "stroke-dasharray" not in svg


def test_region_eta_le_0_two_segments(tmp_path):
    # frontier: sum line up to lambda1 = delta*q11, then the vertical drop
    cfg = write_cfg(tmp_path, dict(q11=0.9, q22=0.8, q112=0.2, q212=0.1, delta=0.5))
    assert main(["region", "--config", cfg, "--n-points", "5", "--out", str(tmp_path / "n")]) == 0
    rows = data_rows((tmp_path / "n.csv").read_text())[1:]
    assert all(abs(float(x) / 0.9 + float(y) / 0.8 - 1) < 1e-12 for x, y, _ in rows)
    assert {b for *_, b in rows} == {"R1_eta_le_0"}
    assert "L" in (tmp_path / "n.svg").read_text()


def test_region_svg_is_deterministic(tmp_path):
    args = ["region", *sum(([f"--{k}", str(v)] for k, v in C0.items()), []), "--n-points", "9"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    assert (tmp_path / "a.svg").read_text() == (tmp_path / "b.svg").read_text()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


# cli: simulate


def test_simulate_defaults(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {**C0, "lambda1": 0.1, "lambda2": 0.2, "p": 0.5})
    out = tmp_path / "r.csv"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    text = out.read_text()
    rows = data_rows(text)
    assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3", "4", "mean", "ci95"]
    assert "# horizon = 2000000" in text and "# replications = 5" in text and "# p = 0.5" in text
    assert "throughput1" in capsys.readouterr().out


def test_simulate_saturated_mu1(tmp_path, capsys):
    out = tmp_path / "s.csv"
    argv = ["simulate", *sum(([f"--{k}", str(v)] for k, v in C0.items()), [])]
    argv += ["--mode", "saturated", "--p", "0.5", "--horizon", "300000", "--out", str(out)]
    assert main(argv) == 0
    rows = data_rows(out.read_text())
    mean = dict(zip(rows[0], next(r for r in rows if r[0] == "mean")))
    assert float(mean["service1"]) == pytest.approx(0.3, abs=5e-3)
    assert re.search(r"service1 = 0\.29|service1 = 0\.30", capsys.readouterr().out)


def test_simulate_unstable_primary(tmp_path):
    out = tmp_path / "u.csv"
    argv = ["simulate", *sum(([f"--{k}", str(v)] for k, v in C0.items()), [])]
    argv += ["--lambda1", "0.9", "--horizon", "200000", "--replications", "3", "--out", str(out)]
    assert main(argv) == 0
    rows = data_rows(out.read_text())
    mean = dict(zip(rows[0], next(r for r in rows if r[0] == "mean")))
    assert mean["stable1"] == "0"


def test_simulate_trajectory(tmp_path):
    out = tmp_path / "t.csv"
    argv = ["simulate", *sum(([f"--{k}", str(v)] for k, v in C0.items()), [])]
    argv += ["--horizon", "1000", "--replications", "2", "--trajectory-stride", "10", "--out", str(out)]
    assert main(argv) == 0
    lines = (tmp_path / "t_traj_r1.csv").read_text().splitlines()
    assert lines[0] == "slot,q1,q2,b1" and len(lines) == 101


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["simulate", "--mode", "weird"],
        ["simulate", "--horizon", "ten"],
        ["simulate", "--seed", "-3"],
        ["simulate", "--seed", str(2**64)],
        ["simulate", "--q11", "0.9"],  # missing keys
        ["simulate", *sum(([f"--{k}", str(v)] for k, v in C0.items()), []), "--q11", "1.5"],
        ["simulate", *sum(([f"--{k}", str(v)] for k, v in C0.items()), []), "--horizon", "10", "--burn-in", "10"],
        ["region", "--config", "/does/not/exist.yaml"],
        ["sweep", *sum(([f"--{k}", str(v)] for k, v in C0.items()), [])],  # no param/grid
        ["sweep", *sum(([f"--{k}", str(v)] for k, v in C0.items()), []), "--param", "p", "--grid", "0.1,x"],
        ["sweep", *sum(([f"--{k}", str(v)] for k, v in C0.items()), []), "--param", "p", "--grid", "0.1,1.5"],
        ["validate", "nosuch"],
    ],
)
def test_usage_errors_exit_1(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1
    assert capsys.readouterr().err


def test_unknown_config_key_exit_1(tmp_path):
    cfg = write_cfg(tmp_path, {**C0, "lamda1": 0.2})
    assert main(["simulate", "--config", cfg]) == 1


# cli: sweep


def test_sweep_grid_order(tmp_path):
    out = tmp_path / "sw.csv"
    argv = ["sweep", *sum(([f"--{k}", str(v)] for k, v in C0.items()), [])]
    argv += ["--lambda1", "0.1", "--param", "lambda2", "--grid", "0.5,0.1,0.9,0.3"]
    argv += ["--horizon", "20000", "--replications", "2", "--workers", "2", "--out", str(out)]
    assert main(argv) == 0
    rows = data_rows(out.read_text())
    assert rows[0][0] == "lambda2" and rows[0][-3:] == ["stable1", "stable2", "in_region"]
    assert [float(r[0]) for r in rows[1:]] == [0.5, 0.1, 0.9, 0.3]
    assert [r[-1] for r in rows[1:]] == ["1", "1", "0", "1"]


def test_sweep_capacity_and_config_keys(tmp_path):
    cfg = write_cfg(tmp_path, {**C0, "param": "c", "grid": "inf,1,2", "horizon": 5000, "replications": 1})
    out = tmp_path / "c.csv"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    assert [r[0] for r in data_rows(out.read_text())[1:]] == ["inf", "1", "2"]


def test_sweep_spec_workers_match_serial():
    spec = SweepSpec(
        Scenario.from_dict({**C0, "lambda1": 0.1}),
        "p",
        [0.0, 0.5, 1.0],
        SimMode.ORIGINAL,
        {"horizon": 5000, "burn_in": 500, "replications": 2, "seed": 9},
    )
    assert sweep_to_csv(spec, run_sweep(spec)) == sweep_to_csv(spec, run_sweep(spec, workers=3))
    with pytest.raises(ValueError):
        SweepSpec(spec.scenario, "q11", [0.5])
    with pytest.raises(ValueError):
        SweepSpec(spec.scenario, "p", [])


# cli: validate


def test_validate_pstar_pass(tmp_path, capsys):
    out = tmp_path / "v.csv"
    assert main(["validate", "pstar", "--seed", "3", "--n-configs", "30", "--out", str(out)]) == 0
    rows = data_rows(out.read_text())
    assert rows[0][:2] == ["suite", "channel"] and "passed" in rows[0]
    assert "pass rate 1.0000" in capsys.readouterr().out


def test_validate_failure_exit_2(tmp_path, capsys):
    out = tmp_path / "b.csv"
    code = main(["validate", "battery", "--horizon", "20000", "--replications", "2", "--out", str(out)])
    err = capsys.readouterr().err
    # finite-capacity occupancy for c >= 2 disagrees with the closed form
    assert code == 2
    assert "FAIL" in err and "c=2" in err


def test_validation_record_pass_rule():
    r = validation.ValidationRecord("s", "C0", 0.5, "inf", 0.0, 0.0, 0.0, "q", 0.5, 0.51, 0.002, 5e-3)
    assert not r.passed  # 0.01 > max(0.006, 0.005)
    r = validation.ValidationRecord("s", "C0", 0.5, "inf", 0.0, 0.0, 0.0, "q", 0.5, 0.51, 0.004, 5e-3)
    assert r.passed  # 0.01 <= 0.012
