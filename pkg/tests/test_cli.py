import json
import subprocess

import numpy as np
import pytest

from tiltlink.cli import EXIT_CONFIG, EXIT_DIVERGED, EXIT_OK, main


def _csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])


def test_sweep_beta(tmp_path):
    out = tmp_path / "beta.csv"
    assert main(["design", "sweep-beta", "--out", str(out)]) == EXIT_OK
    header, rows = _csv(out)
    assert header[:3] == ["beta", "u_s_min", "u_s_max"] and len(rows) == 81
    assert rows[0, 0] == 0.0 and rows[-1, 0] == pytest.approx(0.8)
    assert np.all(np.diff(rows[:, 1]) > 0) and np.all(np.diff(rows[:, 2]) > 0)


def test_sweep_joints_marks_singular_forms(tmp_path):
    out = tmp_path / "q.csv"
    assert main(["design", "sweep-joints", "--n", "3", "--out", str(out), "--jobs", "2"]) == 0
    header, rows = _csv(out)
    assert len(rows) == 9
    centre = rows[(rows[:, 0] == 0) & (rows[:, 1] == 0)][0]
    assert centre[header.index("valid")] == 0 and np.isnan(centre[header.index("u_s_min")])


def test_optimize_prints_beta(tmp_path, capsys):
    out = tmp_path / "opt.csv"
    assert main(["design", "optimize", "--to", "0.2", "--step", "0.05", "--out", str(out)]) == 0
    assert capsys.readouterr().out.startswith("beta_opt=")
    header, rows = _csv(out)
    assert header == ["beta", "x1", "x2", "x3", "x4", "objective"] and len(rows) == 5


def test_missing_spec_is_config_error(tmp_path, capsys):
    out = tmp_path / "beta.csv"
    assert main(["design", "sweep-beta", "--spec", str(tmp_path / "nope"), "--out", str(out)]) \
        == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_scenario_and_bad_seed(capsys):
    assert main(["run", "--scenario", "loop"]) == EXIT_CONFIG
    assert main(["run", "--seed", "-1"]) == EXIT_CONFIG


def test_gains_report(capsys):
    assert main(["gains"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["are_residual"] < 1e-9 and rep["spectral_abscissa"] < 0
    assert "kp_ratio_margin" in rep["gain_check"]


def test_run_is_reproducible(tmp_path):
    for d in ("a", "b"):
        assert main(["run", "--scenario", "hover", "--seed", "1", "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "hover_seed1.csv").read_bytes()
    assert a == (tmp_path / "b" / "hover_seed1.csv").read_bytes()
    summary = json.loads((tmp_path / "a" / "hover_seed1.json").read_text())
    assert summary["scenario"] == "hover" and summary["seed"] == 1


def test_divergence_exit_code(tmp_path, capsys):
    cfg = tmp_path / "blowup.cfg"
    cfg.write_text("base = hover\nname = blowup\nduration = 2\nsteady_window = 1\n"
                   "impulses = 0 1 0 0 0 1e300 1e300 0\n")
    assert main(["run", "--scenario", str(cfg)]) == EXIT_DIVERGED
    assert "divergence in" in capsys.readouterr().err


def test_run_with_sensor_log_then_replay(tmp_path):
    cfg = tmp_path / "short.cfg"
    cfg.write_text("base = kick\nname = short\nduration = 2\nsteady_window = 1\n")
    assert main(["run", "--scenario", str(cfg), "--sensor-log", "--out", str(tmp_path)]) == 0
    log = tmp_path / "short_seed0_sensors.log"
    out = tmp_path / "est.csv"
    assert main(["replay", str(log), "--out", str(out)]) == 0
    header, rows = _csv(out)
    assert header[0] == "stamp" and len(rows) == 201


def test_replay_malformed_and_empty(tmp_path, capsys):
    bad = tmp_path / "bad.log"
    bad.write_text("0,imu,1,2\n")
    assert main(["replay", str(bad)]) == EXIT_CONFIG
    assert "bad.log:1" in capsys.readouterr().err
    empty = tmp_path / "empty.log"
    empty.write_text("")
    out = tmp_path / "e.csv"
    assert main(["replay", str(empty), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 1


def test_entry_point():
    res = subprocess.run(["tiltlink", "design", "sweep-beta", "--to", "0.02"],
                         capture_output=True, text=True, check=True)
    assert len(res.stdout.splitlines()) == 4


@pytest.mark.slow
def test_grasp_settles(capsys):
    assert main(["run", "--scenario", "grasp", "--seed", "7"]) == 0
    assert json.loads(capsys.readouterr().out)["steady_err"] < 0.05
