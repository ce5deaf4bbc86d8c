import json
import subprocess
import sys

import pytest

from randorder.cli import main
from randorder.model import load_instance, save_instance, validate_gap


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "randorder.cli", *args],
                          capture_output=True, check=False)


def test_generate_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["generate", "--gap", "n=6", "m=2", "--seed", "4", "--out", str(a)]) == 0
    assert main(["generate", "--gap", "n=6", "m=2", "--seed", "4", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert load_instance(a.read_bytes()).num_items == 6
    assert "instance " in capsys.readouterr().out


def test_generate_unit_iid(tmp_path):
    out = tmp_path / "u.json"
    assert main(["generate", "--unit-iid", "n=5", "dist=uniform:1,2,3", "--out", str(out)]) == 0
    inst = load_instance(out.read_bytes())
    assert inst.capacity == 1 and set(inst.sizes) == {1}


def test_generate_usage_errors(capsys):
    assert main(["generate", "--gap", "n=3", "bogus=1"]) == 2
    assert main(["generate"]) == 2
    assert "error" in capsys.readouterr().err


def test_solve(tmp_path, capsys):
    path = tmp_path / "i.json"
    path.write_bytes(save_instance(validate_gap([1], [[9, 5]], [[1, 1]])))
    assert main(["solve", str(path), "--which", "integral"]) == 0
    assert "integral optimum: 9" in capsys.readouterr().out
    out = tmp_path / "sol.json"
    assert main(["solve", str(path), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["objective"] == "9"


def test_solve_budget_exceeded(tmp_path, capsys):
    path = tmp_path / "i.json"
    assert main(["generate", "--gap", "n=10", "m=3", "--out", str(path)]) == 0
    assert main(["solve", str(path), "--which", "integral", "--budget", "100"]) == 1
    assert "budget" in capsys.readouterr().err


def test_solve_missing_file(tmp_path):
    assert main(["solve", str(tmp_path / "none.json")]) == 1


def test_run_exact_json(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["run", "--instance", "gap n=4 m=2", "--algorithm", "infeasible-gap",
                 "--mode", "exact", "--seed", "3", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["bounds"]["lemma3"]["passed"]
    assert "bound lemma3" in capsys.readouterr().out


def test_run_config_file(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"instance": "gap n=5 m=2", "algorithm": "random-gap",
                                "trials": 40, "seed": 2, "format": "csv"}))
    out1, out2 = tmp_path / "1.csv", tmp_path / "2.csv"
    assert main(["run", "--config", str(conf), "--out", str(out1)]) == 0
    assert main(["run", "--config", str(conf), "--trials", "40", "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    conf.write_text(json.dumps({"instance": "gap n=5 m=2", "algorithm": "random-gap", "x": 1}))
    assert main(["run", "--config", str(conf)]) == 2


def test_run_usage_errors():
    assert main(["run", "--instance", "gap n=3 m=1"]) == 2
    assert main(["run", "--instance", "gap n=3 m=1", "--algorithm", "fractional-knapsack"]) == 1


def test_workers_do_not_change_output(tmp_path):
    outs = []
    for w in ("1", "2", "3"):
        out = tmp_path / f"w{w}.csv"
        res = run_cli("run", "--instance", "gap n=6 m=2", "--algorithm", "infeasible-gap",
                      "--trials", "200", "--seed", "9", "--format", "csv",
                      "--workers", w, "--out", str(out))
        assert res.returncode == 0, res.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_verify(tmp_path, capsys):
    out = tmp_path / "v.json"
    assert main(["verify", "coupling", "--trials", "200", "--out", str(out)]) == 0
    assert "coupling: PASS" in capsys.readouterr().out
    assert json.loads(out.read_text())["passed"]


def test_help_exits_cleanly():
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
