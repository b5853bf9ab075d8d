import json
import os

import pytest

from wickflow.cli import main
from wickflow.experiments import ExperimentConfig


def write_config(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh)
    return str(path)


SMALL_SIM = {
    "grid": {"K": 3},
    "solver": {"delta": 2e-3, "T": 0.02, "record_every": 5},
    "ensemble": {"n_traj": 2, "master_seed": 7},
    "output": {"formats": ["csv", "json", "wck1"]},
}


def test_simulate_writes_artifacts(tmp_path):
    cfg = write_config(tmp_path / "c.json", SMALL_SIM)
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out), "--threads", "1"]) == 0
    assert (out / "trajectory_000.csv").exists()
    assert (out / "trajectory_001.wck1").exists()
    report = json.loads((out / "simulate_report.json").read_text())
    assert report["pass"] is True
    assert report["config"]["K"] == 3
    assert report["version"].startswith("wickflow")


def test_simulate_deterministic_bytes(tmp_path):
    cfg = write_config(tmp_path / "c.json", SMALL_SIM)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out", str(a), "--threads", "1"]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(b), "--threads", "1"]) == 0
    assert (a / "trajectory_000.csv").read_bytes() == (b / "trajectory_000.csv").read_bytes()


def test_flag_overrides(tmp_path):
    cfg = write_config(tmp_path / "c.json", SMALL_SIM)
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out),
                 "--seed", "99", "--k", "2", "--threads", "1"]) == 0
    report = json.loads((out / "simulate_report.json").read_text())
    assert report["config"]["master_seed"] == 99
    assert report["config"]["K"] == 2


def test_env_var_out_dir(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "c.json", SMALL_SIM)
    env_out = tmp_path / "envdir"
    monkeypatch.setenv("WICKFLOW_OUT", str(env_out))
    assert main(["simulate", "--config", cfg, "--threads", "1"]) == 0
    assert (env_out / "simulate_report.json").exists()


def test_invalid_polynomial_exit_2(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"polynomial": {"N": 2, "a": [0, 0, 0, 0, 0.0]}})
    assert main(["simulate", "--config", cfg]) == 2


def test_unknown_section_exit_2(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"grids": {"K": 3}})
    assert main(["simulate", "--config", cfg]) == 2


def test_bad_json_exit_2(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{not json")
    assert main(["simulate", "--config", str(path)]) == 2


def test_identities_command(tmp_path):
    out = tmp_path / "out"
    assert main(["identities", "--out", str(out), "--threads", "1"]) == 0
    report = json.loads((out / "identities_report.json").read_text())
    assert report["pass"] is True
    assert all(v < 1e-10 for v in report["results"]["max_residuals"].values())


def test_gibbs_command(tmp_path):
    cfg = write_config(tmp_path / "c.json", {
        "grid": {"K": 2},
        "sampler": {"rho": 0.4, "n_steps": 400, "burn_in": 100, "thinning": 20},
        "output": {"formats": ["csv", "json", "wck1"]},
    })
    out = tmp_path / "out"
    assert main(["gibbs", "--config", cfg, "--out", str(out), "--threads", "1"]) == 0
    assert (out / "chain_samples.wck1").exists()
    assert (out / "chain_wick2.csv").exists()


def test_config_schema_round_trip():
    cfg = ExperimentConfig.from_dict(SMALL_SIM)
    assert cfg.K == 3 and cfg.n_traj == 2
    resolved = cfg.resolved()
    assert resolved["delta"] == 2e-3
