import json
import os
import subprocess
import sys

import pytest

from hecketree.cli import main


def _run(tmp_path, *argv):
    return main(["--out", str(tmp_path), *argv])


def _load(path):
    return json.loads(path.read_text())


def test_tree_json(tmp_path, capsys):
    assert _run(tmp_path, "tree", "build", "--p", "2", "--radius", "2", "--json") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["config"]["p"] == 2
    files = list(tmp_path.glob("*.json"))
    assert len(files) == 1
    doc = _load(files[0])
    assert doc["config"]["command"] == "tree build"
    assert len(doc["result"]["vertices"]) == 10


def test_tree_dot_header(tmp_path):
    assert _run(tmp_path, "tree", "build", "--p", "3", "--radius", "1", "--dot") == 0
    (dot,) = tmp_path.glob("*.dot")
    first = dot.read_text().splitlines()[0]
    assert first.startswith("// config: ")


def test_cube(tmp_path):
    assert _run(tmp_path, "cube", "--n", "3") == 0
    doc = _load(tmp_path / "cube_n3.json")
    assert doc["result"]["point_homology"] and doc["result"]["d_squared_zero"]
    csv = (tmp_path / "cube_n3_d1.csv").read_text().splitlines()
    assert csv[0].startswith("# config: ")


def test_assembly(tmp_path):
    assert _run(tmp_path, "assembly", "--p", "2", "--level", "1") == 0
    doc = _load(tmp_path / "assembly_p2_L1.json")
    assert doc["result"]["coker"]["free_rank"] == 5 and doc["result"]["coker"]["torsion"] == []
    assert doc["result"]["snf_reconstructs"]
    assert doc["result"]["snf_diagonal"] == [1]
    assert (tmp_path / "assembly_p2_L1.csv").exists()


def test_hecke_and_chartab(tmp_path):
    assert _run(tmp_path, "hecke", "check", "--p", "2", "--level", "1", "--samples", "3") == 0
    assert _run(tmp_path, "chartab", "--p", "2", "--level", "1") == 0
    doc = _load(tmp_path / "chartab_U0_p2_L1.json")
    assert doc["result"]["check"]["ok"]


@pytest.mark.parametrize("argv", [
    ["tree", "build", "--p", "4", "--radius", "1"],
    ["tree", "build", "--p", "2", "--radius", "40"],
    ["cube", "--n", "12"],
    ["assembly", "--p", "3", "--level", "2"],
    ["hecke", "check", "--p", "2", "--level", "5"],
    ["dynamics", "suite", "--samples", "-1"],
])
def test_config_errors_exit_2(tmp_path, argv, capsys):
    assert _run(tmp_path, *argv) == 2
    assert "hecketree:" in capsys.readouterr().err


def test_env_out(tmp_path, monkeypatch):
    monkeypatch.setenv("HECKETREE_OUT", str(tmp_path / "env"))
    assert main(["cube", "--n", "2"]) == 0
    assert (tmp_path / "env" / "cube_n2.json").exists()


def _invariants(out, hashseed):
    env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
    r = subprocess.run([sys.executable, "-m", "hecketree.cli", "--out", str(out), "invariants", "all", "--seed", "7"],
                       env=env, capture_output=True, text=True)
    assert r.returncode == 0, r.stderr + r.stdout
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_invariants_deterministic(tmp_path):
    a = _invariants(tmp_path / "a", 1)
    b = _invariants(tmp_path / "b", 2)
    assert a.keys() == b.keys()
    assert "invariants_all.json" in a
    assert a == b
