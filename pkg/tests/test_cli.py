import csv
import json
import os

import numpy as np
import pytest

from swarmplan.cli import main
from swarmplan.config import DEFAULT_CONFIG, dump_config, load_config, planner_config

TIMING_COLUMNS = {"mean_qp_ms", "p95_qp_ms", "mean_cycle_ms"}


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def strip_timing(path):
    rows = read_csv(path)
    return [{k: v for k, v in r.items() if k not in TIMING_COLUMNS}
            for r in rows]


@pytest.fixture(autouse=True)
def serial_workers(monkeypatch):
    monkeypatch.setenv("SWARMPLAN_WORKERS", "1")


def test_dump_config_roundtrip(tmp_path, capsys):
    out = tmp_path / "config.json"
    assert main(["dump-config", "--out", str(out)]) == 0
    cfg = json.loads(out.read_text())
    assert cfg["planner"]["h"] == 0.2
    assert cfg["benchmark"]["methods"] == DEFAULT_CONFIG["benchmark"]["methods"]


def test_config_overrides_merge(tmp_path):
    path = tmp_path / "override.json"
    path.write_text(json.dumps({"planner": {"method": "bvc", "r_min": 0.35}}))
    cfg = load_config(path)
    assert cfg["planner"]["method"] == "bvc"
    assert cfg["planner"]["r_min"] == 0.35
    assert cfg["planner"]["h"] == 0.2     # untouched default
    pcfg = planner_config(cfg)
    assert pcfg.method == "bvc"
    assert pcfg.ellipsoid.r_min == 0.35


def test_simulate_writes_outputs_and_exit_code(tmp_path):
    out = tmp_path / "run"
    rc = main(["simulate", "--agents", "3", "--seed", "4",
               "--method", "ondemand-input", "--out", str(out)])
    assert rc == 0
    for name in ("trajectory.csv", "metrics.csv", "envelope.csv", "summary.txt"):
        assert (out / name).exists()
    rows = read_csv(out / "trajectory.csv")
    assert list(rows[0]) == ["t", "agent_id", "px", "py", "pz", "vx", "vy",
                             "vz", "ux", "uy", "uz", "reset_flag"]
    # 20 Hz output: successive samples of one agent are 0.05 s apart
    t_agent0 = [float(r["t"]) for r in rows if r["agent_id"] == "0"]
    assert abs((t_agent0[1] - t_agent0[0]) - 0.05) < 1e-9


def test_simulate_missing_config_exits_two(tmp_path, capsys):
    rc = main(["simulate", "--config", str(tmp_path / "nope.json"),
               "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "nope.json" in capsys.readouterr().err


def test_simulate_hoop_scenario_runs(tmp_path):
    out = tmp_path / "hoop"
    rc = main(["simulate", "--scenario", "hoop", "--agents", "4", "--seed", "0",
               "--method", "ondemand-input", "--stop", "envelope",
               "--out", str(out)])
    assert rc == 0
    assert (out / "envelope.csv").exists()


def test_compare_grid_and_aggregate(tmp_path):
    out = tmp_path / "cmp"
    rc = main(["compare", "--methods", "bvc,ondemand-input", "--counts", "4",
               "--trials", "2", "--seed", "100", "--out", str(out)])
    assert rc == 0
    rows = read_csv(out / "trials.csv")
    assert len(rows) == 4
    # identical seeded scenarios across methods
    seeds = {(r["method"], r["trial"]): r["seed"] for r in rows}
    assert seeds[("bvc", "0")] == seeds[("ondemand-input", "0")]
    agg = read_csv(out / "aggregate.csv")
    assert {r["method"] for r in agg} == {"bvc", "ondemand-input"}
    assert (out / "summary.txt").exists()


def test_compare_rejects_unknown_method(tmp_path, capsys):
    rc = main(["compare", "--methods", "warp", "--counts", "4",
               "--trials", "1", "--out", str(tmp_path / "x")])
    assert rc == 2


def test_compare_is_deterministic_modulo_timing(tmp_path):
    args = ["compare", "--methods", "ondemand-input", "--counts", "3",
            "--trials", "2", "--seed", "55"]
    rc1 = main(args + ["--out", str(tmp_path / "a")])
    rc2 = main(args + ["--out", str(tmp_path / "b")])
    assert rc1 == rc2 == 0
    assert strip_timing(tmp_path / "a" / "trials.csv") == \
        strip_timing(tmp_path / "b" / "trials.csv")


def test_bench_runtime_outputs(tmp_path):
    out = tmp_path / "bench"
    rc = main(["bench-runtime", "--methods", "bvc,ondemand-input",
               "--counts", "4", "--trials", "1", "--duration", "1.0",
               "--out", str(out)])
    assert rc == 0
    rows = read_csv(out / "runtime.csv")
    assert len(rows) == 2
    for r in rows:
        assert float(r["mean_qp_ms"]) > 0.0
        assert float(r["mean_cycle_ms"]) >= float(r["mean_qp_ms"])
