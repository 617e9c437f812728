import csv
import json

import numpy as np
import pytest

from seqihr.cli import main
from seqihr.config import RunConfig
from seqihr.errors import ConfigError

from test_calibration import synthetic_series


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def run(tmp_path, command, *extra, config=None):
    argv = [command, "--out", str(tmp_path / command)]
    if config is not None:
        cfg_path = tmp_path / f"{command}.cfg"
        cfg_path.write_text(config, encoding="utf-8")
        argv += ["--config", str(cfg_path)]
    return main(argv + list(extra)), tmp_path / command


def test_config_roundtrip_default(tmp_path):
    cfg = RunConfig()
    cfg.save(tmp_path / "c.txt")
    assert RunConfig.load(tmp_path / "c.txt") == cfg


def test_config_roundtrip_modified(tmp_path):
    cfg = RunConfig.from_text("beta = 0:0.31,75:0.12\nsegment_breaks = 75,160\nw_o = 0.2\n"
                              "chi_sweep = 1,2\nstrict_r = true\nworkers = 3\nmr_beta = 0:0.25,100:0.1\n")
    assert cfg.params.strict_r and cfg.groups["w_o"] == 0.2 and cfg.workers == 3
    assert RunConfig.from_text(cfg.to_text()) == cfg


@pytest.mark.parametrize("text,pattern", [
    ("bogus = 1", "unknown key"),
    ("dt = 0.25\ndt = 0.5", "duplicate"),
    ("dt = fast", "bad value"),
    ("n_y = 0.9", "shares"),
    ("no equals sign", "expected key"),
])
def test_config_errors(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        RunConfig.from_text(text)


def test_simulate_flat_without_transmission(tmp_path):
    code, out = run(tmp_path, "simulate", config="beta = 0:0\ne0 = 0\nhorizon = 30\n")
    assert code == 0
    rows = read_rows(out / "trajectory.csv")
    assert list(rows[0]) == ["t", "S", "E", "I", "Q", "H", "R", "D", "daily_deaths"]
    assert len(rows) == 31
    s = np.array([float(r["S"]) for r in rows])
    assert np.allclose(s, 1.0, atol=1e-14)
    assert all(float(r["D"]) == 0.0 and float(r["daily_deaths"]) == 0.0 for r in rows)


def test_strict_flag_isolates_quarantine_recoveries(tmp_path):
    cfg = "horizon = 20\ne0 = 1e-4\n"
    run(tmp_path, "simulate", config=cfg)
    default = read_rows(tmp_path / "simulate" / "trajectory.csv")
    code = main(["simulate", "--out", str(tmp_path / "strict"), "--config", str(tmp_path / "simulate.cfg"),
                 "--strict-r-equation"])
    assert code == 0
    strict = read_rows(tmp_path / "strict" / "trajectory.csv")
    manifest = json.loads((tmp_path / "strict" / "run_manifest.json").read_text())
    assert "strict_r = true" in manifest["config"]
    t = np.array([float(r["t"]) for r in strict])
    q = np.array([float(r["Q"]) for r in strict])
    r_gap = np.array([float(a["R"]) - float(b["R"]) for a, b in zip(default, strict)])
    from seqihr.calibration import default_params
    inflow = default_params().r_q * np.concatenate([[0.0], np.cumsum(0.5 * (q[1:] + q[:-1]) * np.diff(t))])
    np.testing.assert_allclose(r_gap, inflow, rtol=0, atol=1e-2 * r_gap.max())
    # the remaining compartments move only through the population total, a second-order effect
    for name in "SEIQH":
        a = np.array([float(r[name]) for r in default])
        b = np.array([float(r[name]) for r in strict])
        assert np.max(np.abs(a - b)) <= 1e-3 * np.max(np.abs(r_gap)) + 1e-15


def test_simulate_plot_and_manifest(tmp_path):
    code, out = run(tmp_path, "simulate", "--plot", config="horizon = 60\n")
    assert code == 0
    for name in ("trajectory.csv", "trajectory.svg", "daily_deaths.svg", "run_manifest.json"):
        assert (out / name).exists()
    assert (out / "trajectory.svg").read_text().lstrip().startswith("<?xml")
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["command"] == "simulate" and manifest["version"]
    assert set(manifest["outputs"]) >= {"trajectory.csv", "trajectory.svg", "run_config.txt"}
    assert "config" in manifest["inputs"]


def test_manifest_reproduces_outputs(tmp_path):
    code, out = run(tmp_path, "simulate", config="horizon = 45\nbeta = 0:0.3\n")
    manifest = json.loads((out / "run_manifest.json").read_text())
    echo = tmp_path / "echo.cfg"
    echo.write_text("\n".join(manifest["config"]) + "\n")
    assert main(["simulate", "--config", str(echo), "--out", str(tmp_path / "again")]) == 0
    again = json.loads((tmp_path / "again" / "run_manifest.json").read_text())
    assert again["outputs"]["trajectory.csv"] == manifest["outputs"]["trajectory.csv"]


def test_equilibrium_command(tmp_path):
    code, out = run(tmp_path, "equilibrium")
    assert code == 0
    rows = read_rows(out / "equilibrium.csv")
    assert [r["kind"] for r in rows] == ["disease-free", "pandemic", "pandemic"]
    assert float(rows[2]["residual"]) <= 1e-8
    assert "relative gap" in (out / "divergence_report.txt").read_text()


def test_reproduction_command(tmp_path):
    code, out = run(tmp_path, "reproduction")
    assert code == 0
    row = read_rows(out / "reproduction.csv")[0]
    assert row["threshold_consistent"] == "true"
    assert abs(float(row["R_0"]) - 6.9635 * 0.2) < 0.01


def test_fit_command_synthetic(tmp_path):
    series = synthetic_series()
    data = tmp_path / "deaths.csv"
    data.write_text("date,deaths\n" + "".join(f"{d.isoformat()},{int(round(v))}\n"
                                              for d, v in zip(series.dates, series.raw)))
    code, out = run(tmp_path, "fit", "--plot", config=f"deaths_csv = {data}\nsegment_breaks = 75,160,270\n")
    assert code == 0
    assert "converged=true" in (out / "fit_summary.txt").read_text()
    assert len(read_rows(out / "fit.csv")) == 4
    assert (out / "fit.svg").exists()
    fitted = RunConfig.load(out / "fitted_config.txt")
    assert len(fitted.params.beta) == 4
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["inputs"]["deaths_csv"]["sha256"]


def test_missing_death_csv_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "fit", config="deaths_csv = /nonexistent/deaths.csv\n")
    assert code == 2
    assert "/nonexistent/deaths.csv" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "simulate", config="mystery = 3\n")
    assert code == 1
    assert "mystery" in capsys.readouterr().err


def test_numeric_error_exit_code(tmp_path):
    # a huge step on a fast epidemic drives compartments negative
    code, _ = run(tmp_path, "simulate", config="dt = 1\nbeta = 0:50\ne0 = 0.1\n")
    assert code == 3


def test_frontier_one_point_grid(tmp_path):
    code, out = run(tmp_path, "frontier", config="level_step = 2\n")
    assert code == 0
    rows = read_rows(out / "frontier.csv")
    assert [r["kind"] for r in rows] == ["targeted", "uniform"]
    assert all(r["on_frontier"] == "1" for r in rows)
    assert (out / "calibration_gap.txt").exists()


def test_policy_command(tmp_path):
    code, out = run(tmp_path, "policy", "--plot", config="level_step = 0.35\nchi_sweep = 1,100\n")
    assert code == 0
    assert read_rows(out / "policy.csv")[0].keys() == {"group", "start_day", "level"}
    assert list(read_rows(out / "outcome.csv")[0]) == ["policy_id", "gdp_loss", "death_rate", "social_cost"]
    assert len(read_rows(out / "chi_sweep.csv")) == 2
    code, out2 = run(tmp_path, "policy", "--policy", str(out / "policy.csv"))
    assert code == 0
    assert read_rows(out2 / "outcome.csv") == read_rows(out / "outcome.csv")
