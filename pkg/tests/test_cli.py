import json
import subprocess
import sys

import numpy as np
import pytest

from harmsync.cli import main
from harmsync.harness import bundled_config


def write_config(tmp_path, **changes):
    d = {
        "name": "cli",
        "p": 2,
        "omega": 2.0,
        "couplings": [{"i": 1, "j": 2, "kind": "saturation", "gain": 1.0, "level": 1.0},
                      {"i": 2, "j": 1, "kind": "saturation", "gain": 1.0, "level": 1.0}],
        "initial": {"type": "random", "seed": 4, "radius": 1.0},
        "horizon": 2.0,
        "frames": ["original", "averaged"],
        "integrator": {"h0": 0.01, "sample_dt": 0.25},
    }
    d.update(changes)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(d))
    return str(path)


def test_check_graph_example(capsys):
    assert main(["check-graph", str(bundled_config("paper_example"))]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["connected"] is True and "n4" in report["witnesses"]


def test_check_graph_disconnected(capsys):
    assert main(["check-graph", "disconnected"]) == 0
    assert json.loads(capsys.readouterr().out)["connected"] is False


def test_profile_linear_rows(capsys):
    assert main(["profile", "--kind", "linear", "--gain", "2", "--rmax", "1", "--n", "2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "r,rho"
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    np.testing.assert_allclose(rows, [[0, 0], [0.5, 0.5], [1, 1]], atol=1e-10)


def test_profile_to_file(tmp_path):
    out = tmp_path / "p" / "rho.csv"
    assert main(["profile", "--kind", "deadzone", "--gain", "1", "--width", "0.5", "--slope", "1",
                 "--rmax", "3", "--n", "30", "--rule", "simpson", "--nodes", "1024", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 32


@pytest.mark.parametrize("argv", [
    ["profile", "--kind", "linear", "--gain", "-2", "--rmax", "1", "--n", "2"],
    ["profile", "--kind", "linear", "--rmax", "1", "--n", "0"],
    ["profile", "--kind", "linear", "--rmax", "1", "--n", "2", "--nodes", "4"],
])
def test_profile_invalid_values(argv, capsys):
    assert main(argv) == 1
    assert "invalid input" in capsys.readouterr().err


def test_simulate_writes_outputs(tmp_path, capsys):
    config = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["simulate", config, "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert sorted(summary["frames"]) == ["averaged", "original"]
    assert sorted(p.name for p in out.iterdir()) == ["cli_averaged.csv", "cli_metrics.json",
                                                     "cli_original.csv"]
    header = (out / "cli_original.csv").read_text().splitlines()[0]
    assert header == "t,q1,p1,q2,p2"


def test_simulate_byte_identical(tmp_path):
    config = write_config(tmp_path)
    for d in ("a", "b"):
        assert main(["simulate", config, "--out", str(tmp_path / d)]) == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_simulate_negative_gain_exit_1(tmp_path, capsys):
    config = write_config(tmp_path, couplings=[{"i": 1, "j": 2, "kind": "linear", "gain": -1.0}])
    assert main(["simulate", config]) == 1
    assert "couplings[0]" in capsys.readouterr().err


def test_simulate_missing_file_exit_1(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.json")]) == 1


def test_simulate_blow_up_exit_2(tmp_path, capsys):
    config = write_config(tmp_path,
                          couplings=[{"i": 1, "j": 2, "kind": "cubic", "gain": 1000.0},
                                     {"i": 2, "j": 1, "kind": "cubic", "gain": 1000.0}],
                          initial={"type": "explicit", "states": [[0, 0], [0, 10]]},
                          frames=["original"], integrator={"h0": 0.05, "steps_per_period": 20})
    assert main(["simulate", config]) == 2
    assert "runtime failure" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [[], ["simulate"], ["frobnicate"], ["check-graph", "x", "--bogus"],
                                  ["sweep", "x", "--Delta", "1"], ["sweep", "x", "--Delta", "1",
                                                                   "--delta", "0.1", "--omegas", "a,b"]])
def test_usage_errors_exit_64(argv, capsys):
    assert main(argv) == 64
    assert "usage" in capsys.readouterr().err


def test_help_exit_0(capsys):
    assert main(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out


def test_sweep_command(tmp_path):
    config = write_config(tmp_path, integrator={"h0": 0.02, "steps_per_period": 32})
    out = tmp_path / "sweep.json"
    assert main(["sweep", config, "--Delta", "1", "--delta", "0.05", "--omegas", "1,4",
                 "--seeds", "2", "--horizon", "10", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["omegas"] == [1.0, 4.0] and len(report["runs"]) == 2
    assert "config_hash" in report["provenance"]


def test_sweep_invalid_grid_exit_1(tmp_path):
    config = write_config(tmp_path)
    assert main(["sweep", config, "--Delta", "1", "--delta", "0.05", "--omegas", "4,1"]) == 1


def test_avg_error_command(tmp_path, capsys):
    config = write_config(tmp_path)
    assert main(["avg-error", config, "--omegas", "20,40", "--horizon", "2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "omega,error" and len(lines) == 4
    assert lines[-1].startswith("# slope,")
    assert float(lines[-1].split(",")[1]) < 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "harmsync", "profile", "--kind", "cubic",
                           "--rmax", "2", "--n", "1"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    last = proc.stdout.strip().splitlines()[-1].split(",")
    assert float(last[1]) == pytest.approx(3.0, abs=1e-9)
