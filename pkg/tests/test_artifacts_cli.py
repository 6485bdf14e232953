import json
import subprocess
import sys

import numpy as np
import pytest

from deqflow import artifacts
from deqflow.cli import main
from deqflow.dynamics import GdConfig, gd_run
from deqflow.experiments import RunConfig, run
from deqflow.model import TargetModel
from deqflow.risk import LinearObjective, MomentSummary


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_trajectory_csv_roundtrip(tmp_path):
    target = TargetModel([2.0])
    traj = gd_run(LinearObjective(target, MomentSummary(np.array([[1 / 3]]), 1 / 3, 1 / 3)), [0.1, 0.1],
                  GdConfig(0.05, 20), target)
    artifacts.write_trajectory_csv(tmp_path / "t.csv", traj)
    back = artifacts.read_trajectory_csv(tmp_path / "t.csv")
    assert list(back) == artifacts.trajectory_header(1)
    assert np.array_equal(back["theta1_1"], traj.thetas[:, 0])
    assert np.array_equal(back["risk"], traj.risk)
    assert np.array_equal(back["phi_1"], traj.phi[:, 0])


def test_jsonable_handles_numpy_and_nonfinite():
    out = artifacts.jsonable({"a": np.float64(1.5), "b": np.arange(2), "c": np.inf, "d": np.bool_(True)})
    assert out == {"a": 1.5, "b": [0, 1], "c": "inf", "d": True}


def test_plot_has_csv_sibling(tmp_path):
    artifacts.write_plot(tmp_path / "p", [("s", [1, 2, 3], [1.0, 0.1, 0.0])], logy=True)
    assert (tmp_path / "p.svg").read_text().startswith("<svg")
    rows = (tmp_path / "p.csv").read_text().splitlines()
    assert rows[0] == "series,x,y" and len(rows) == 3  # the zero is dropped on a log axis


def test_run_is_byte_stable(tmp_path):
    cfg = RunConfig(experiment="linear-1d", seed=3, epochs=50)
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert a == b
    for name in a:
        if name.endswith(".svg"):
            assert name[:-4] + ".csv" in a


def test_zero_epoch_run(tmp_path):
    res = run(RunConfig(experiment="linear-1d", epochs=0, constants=False), tmp_path)
    rows = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert len(rows) == 2
    assert json.loads((tmp_path / "summary.json").read_text())["status"] == "ok"
    assert res.trajectory.times.tolist() == [0.0]


def test_guard_trip_run_writes_status(tmp_path):
    cfg = RunConfig(experiment="custom", init="trivial", init_scale=1e-12, epochs=5, constants=False)
    res = run(cfg, tmp_path)
    assert res.status == "guard:singular"
    assert json.loads((tmp_path / "summary.json").read_text())["status"] == "guard:singular"


def test_picard_and_brent_agree_on_sigmoid_run():
    base = dict(experiment="sigmoid-1d", activation="sigmoid", eta=0.1, epochs=50, constants=False)
    a = run(RunConfig(solver="picard", **base)).trajectory
    b = run(RunConfig(solver="brent", **base)).trajectory
    np.testing.assert_allclose(a.thetas, b.thetas, atol=1e-9, rtol=0)


def test_cli_reproduce_linear(tmp_path, capsys):
    assert main(["reproduce-linear", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
    for name in ("trajectory.csv", "loss.svg", "loss.csv", "summary.json", "learned-function.svg"):
        assert (tmp_path / name).exists()


def test_cli_gd_with_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"activation": "tanh", "xi": [1.5], "eta": 0.2, "epochs": 30, "solver": "brent",
                               "delta2": 0.5}))
    assert main(["gd", "--config", str(cfg), "--epochs", "10", "--no-constants", "--out", str(tmp_path / "r")]) \
        in (0, 1)
    summary = json.loads((tmp_path / "r" / "summary.json").read_text())
    assert summary["config"]["activation"] == "tanh" and summary["config"]["epochs"] == 10
    assert summary["config"]["eta"] == 0.2


def test_cli_flow_and_constants(tmp_path, capsys):
    code = main(["flow", "--horizon", "1", "--step", "0.01", "--no-constants", "--out", str(tmp_path)])
    assert code in (0, 1)
    assert (tmp_path / "trajectory.csv").exists()
    capsys.readouterr()
    assert main(["constants", "--activation", "sigmoid", "--grid", "3", "--samples", "200"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["constants"]["rho"] > 0


def test_cli_errors_exit_2(capsys):
    assert main(["gd", "--eta", "-1"]) == 2
    assert main(["gd", "--activation", "tanh", "--delta2", "1.5", "--no-constants"]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_verify_gradcheck(tmp_path, capsys):
    assert main(["verify", "gradcheck", "--out", str(tmp_path)]) == 0
    assert "PASS" in capsys.readouterr().out
    assert json.loads((tmp_path / "report.json").read_text())["status"] == "pass"


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "deqflow.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "reproduce-sigmoid" in r.stdout


def test_cli_rejects_unknown_solver():
    with pytest.raises(SystemExit):
        main(["gd", "--solver", "newton"])
