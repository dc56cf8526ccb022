import json
import subprocess
import sys
from pathlib import Path

import pytest

from hjdecay.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = {
    "name": "cli_small",
    "times": [1, 10],
    "epsilon": 0.2,
    "hamiltonian": {"variant": "quadratic", "dim": 1, "params": {"Q": [[1.0]]}},
    "initial_data": {"dim": 1, "modes": [{"kind": "sin", "freq": "1", "amp": 0.5}]},
    "grids": {"torus": 128, "fd": [64, 128]},
    "compare_times": [1],
    "nd": {"K": 3},
}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


@pytest.mark.parametrize("command", ["decay", "solve", "certify", "compare", "check-nd", "transform"])
def test_commands_succeed(tmp_path, command):
    cfg = write(tmp_path, "small.json", SMALL)
    out = tmp_path / "out"
    assert main([command, "--config", str(cfg), "--out", str(out)]) == 0
    assert any(out.iterdir())


def test_decay_writes_all_formats(tmp_path):
    cfg = write(tmp_path, "small.json", SMALL)
    out = tmp_path / "out"
    code = main(["decay", "--config", str(cfg), "--out", str(out), "--t-list", "1,2,5",
                 "--format", "csv", "--format", "json", "--format", "svg"])
    assert code == 0
    assert {p.suffix for p in out.iterdir()} == {".csv", ".json", ".svg"}
    rows = (out / "cli_small.csv").read_text().splitlines()
    assert len(rows) == 4


def test_counterexample_command(tmp_path):
    out = tmp_path / "cx"
    code = main(["counterexample", "--config", str(CONFIGS / "nondecay_hinge.toml"), "--out", str(out),
                 "--grid", "256", "--t-list", "1"])
    assert code == 0 and (out / "counterexample.csv").exists()


def test_invalid_config_exit_code(tmp_path, capsys):
    bad = write(tmp_path, "bad.json", dict(SMALL, times=[5, 1]))
    assert main(["decay", "--config", str(bad)]) == 2
    assert "strictly increasing" in capsys.readouterr().err
    assert main(["decay"]) == 2


def test_budget_failure_exit_code(tmp_path):
    code = main(["certify", "--config", str(CONFIGS / "nondecay_hinge.toml"), "--epsilon", "0.05",
                 "--out", str(tmp_path)])
    assert code == 3


def test_nd_violation_exit_code(tmp_path, capsys):
    code = main(["decay", "--config", str(CONFIGS / "abs_linear_degenerate.toml"), "--out", str(tmp_path)])
    assert code == 0   # policy "warn": curve recorded, warning printed
    assert "non-degeneracy violated" in capsys.readouterr().err
    strict = dict(SMALL, hamiltonian={"variant": "abs_linear", "dim": 2, "params": {"p": [1.0, 2.0]}},
                  initial_data={"dim": 2, "modes": [{"kind": "sin", "freq": ["2", "-1"], "amp": 0.3}]},
                  nd={"K": 3, "policy": "error"}, epsilon=None)
    del strict["epsilon"]
    cfg = write(tmp_path, "strict.json", strict)
    assert main(["decay", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 4
    err = capsys.readouterr().err
    assert '"verdict": "violated"' in err


def test_check_nd_reports_without_failing(tmp_path, capsys):
    code = main(["check-nd", "--config", str(CONFIGS / "abs_linear_degenerate.toml"), "--out", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "nd_report.json").read_text())
    assert report["verdict"] == "violated"


def test_transform_of_spec_file(tmp_path):
    spec = write(tmp_path, "h.json", {"variant": "abs_linear", "dim": 1, "params": {"p": [1.0]}})
    out = tmp_path / "t"
    assert main(["transform", "--spec", str(spec), "--radius", "2", "--grid", "41", "--out", str(out)]) == 0
    rows = (out / "conjugate.csv").read_text().splitlines()
    assert rows[0] == "p0,value,boundary_attained"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "hjdecay", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("transform", "check-nd", "solve", "decay", "certify", "compare", "counterexample"):
        assert cmd in res.stdout
