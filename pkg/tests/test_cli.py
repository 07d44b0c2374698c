import csv
import json
import subprocess
import sys

import pytest

from membrane_walk import __version__
from membrane_walk.cli import main
from membrane_walk.membrane import fig1a, membrane_to_dict, transparent


@pytest.fixture
def fig_spec(tmp_path):
    path = tmp_path / "fig1a.json"
    path.write_text(json.dumps(membrane_to_dict(fig1a(0.5))))
    return str(path)



def test_analyze_output_and_byte_stability(fig_spec, tmp_path):
    a = tmp_path / "a.json"
    assert main(["analyze", "--spec", fig_spec, "--out", str(a)]) == 0
    first = a.read_bytes()
    assert main(["analyze", "--spec", fig_spec, "--out", str(a)]) == 0
    assert a.read_bytes() == first
    doc = json.loads(a.read_text())
    assert doc["seed"] == 1 and doc["version"] == __version__ and doc["config"]["spec"] == fig_spec
    assert abs(doc["analysis"]["gamma"] - 0.045517) <= 5e-6
    assert len(doc["analysis"]["pi"]) == 4
    # canonical formatting: at most 15 significant digits
    assert "0.0455154477128408" in a.read_text() and "0.04551544771284083" not in a.read_text()


def test_analyze_compare_example(tmp_path):
    out = tmp_path / "c.json"
    assert main(["analyze", "--spec", "builtin:fig1a(0.5)", "--compare-paper-example", "0.5",
                 "--out", str(out)]) == 0
    cmp_ = json.loads(out.read_text())["example_comparison"]
    assert cmp_["delta"]["P"] <= 1e-12 and abs(cmp_["delta"]["gamma"]) <= 1e-10
    assert cmp_["pipeline"]["c"][0] == pytest.approx(-0.23862, abs=1e-5)
    assert cmp_["closed_form"]["c"][0] == pytest.approx(-0.47725, abs=1e-5)


def test_analyze_with_oracle(tmp_path):
    out = tmp_path / "o.json"
    assert main(["analyze", "--spec", "builtin:fig1a(0.5)", "--hitting-kernel", "truncated-solve",
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text())["hitting_oracle"]["max_abs_difference"] <= 1e-6


def test_analyze_transparent(tmp_path):
    out = tmp_path / "t.json"
    assert main(["analyze", "--spec", "builtin:transparent", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())["analysis"]
    assert doc["gamma"] == 0 and doc["c"] == [0]


def test_analyze_reducible(tmp_path, capsys):
    spec = {"m": 2, "periods": [1], "kernel": [
        {"side": "L", "class": [0], "moves": [{"exit": "L", "slide": [0], "prob": 1.0}]},
        {"side": "R", "class": [0], "moves": [{"exit": "R", "slide": [0], "prob": 1.0}]}]}
    path = tmp_path / "red.json"
    path.write_text(json.dumps(spec))
    assert main(["analyze", "--spec", str(path)]) == 1
    err = capsys.readouterr().err
    assert "closed classes" in err and "('L', (0,))" in err and "('R', (0,))" in err


def test_analyze_bad_spec(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"m": 2, "periods": [1],\n "kernel": [}')
    assert main(["analyze", "--spec", str(path)]) == 2
    assert f"{path}:2:" in capsys.readouterr().err
    assert main(["analyze", "--spec", str(tmp_path / "missing.json")]) == 2


def test_simulate_paths(fig_spec, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["simulate", "--spec", fig_spec, "--steps", "2000", "--paths", "8", "--seed", "1"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    texts = [(a / f"path_{i:05d}.csv").read_text() for i in range(8)]
    assert len(set(texts)) == 8
    assert texts == [(b / f"path_{i:05d}.csv").read_text() for i in range(8)]
    rows = list(csv.reader((a / "path_00000.csv").open()))
    assert rows[0] == ["step", "x", "side", "y1"] and len(rows) == 2002
    summary = json.loads((a / "summary.json").read_text())
    assert summary["seed"] == 1 and len(summary["paths"]) == 8
    assert all(all(p["invariants"].values()) for p in summary["paths"])


def test_simulate_stride_and_grid(tmp_path):
    out = tmp_path / "s"
    assert main(["simulate", "--spec", "builtin:fig1a(0.5)", "--steps", "10000", "--stride", "100",
                 "--grid", "0,0.5,1", "--out", str(out)]) == 0
    rows = list(csv.reader((out / "path_00000.csv").open()))
    assert [int(r[0]) for r in rows[1:]] == list(range(0, 10001, 100))
    s = json.loads((out / "summary.json").read_text())["paths"][0]
    full = tmp_path / "f"
    main(["simulate", "--spec", "builtin:fig1a(0.5)", "--steps", "10000", "--out", str(full)])
    f = json.loads((full / "summary.json").read_text())["paths"][0]
    assert s["L_total"] == f["L_total"] and s["final"] == f["final"]
    assert s["scaled"]["x"][2] == f["final"]["x"] / 100


def test_simulate_usage_errors(tmp_path):
    assert main(["simulate", "--spec", "builtin:fig1a(0.5)", "--steps", "10", "--paths", "0",
                 "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--steps", "10", "--out", str(tmp_path)]) == 2


def test_simulate_env(tmp_path):
    env = tmp_path / "env.json"
    env.write_text(json.dumps({"type": "iid", "law": {"bernoulli_values": [0.2, 0.8],
                                                      "weights": [0.5, 0.5]}, "seed": 3}))
    assert main(["simulate", "--env", str(env), "--steps", "500", "--out", str(tmp_path / "o")]) == 0


def test_seed_env_var_and_config(tmp_path, monkeypatch):
    monkeypatch.setenv("MEMBRANE_WALK_SEED", "77")
    out = tmp_path / "a.json"
    assert main(["analyze", "--spec", "builtin:transparent", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["seed"] == 77
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"spec": "builtin:transparent", "seed": 5}))
    assert main(["analyze", "--config", str(cfg), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["seed"] == 5
    assert main(["analyze", "--config", str(cfg), "--seed", "6", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["seed"] == 6
    cfg.write_text(json.dumps({"spec": "builtin:transparent", "sede": 5}))
    assert main(["analyze", "--config", str(cfg), "--out", str(out)]) == 2


def test_verify_missing_spec(tmp_path):
    assert main(["verify", "--spec", str(tmp_path / "nope.json"), "--suite", "invariance"]) == 2
    assert main(["verify", "--suite", "invariance"]) == 2


def test_verify_pass_and_report(tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify", "--spec", "builtin:transparent", "--suite", "invariance", "--n", "10000",
                 "--paths", "2000", "--seed", "3", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["seed"] == 3 and doc["report"]["passed"] is True
    assert {c["name"] for c in doc["report"]["checks"]} == {"sign", "shape_ks", "radial_ks"}


def test_verify_negative_control(tmp_path):
    assert main(["verify", "--spec", "builtin:transparent", "--suite", "martingale", "--n", "2000",
                 "--paths", "4000", "--debug-drift", "--out", str(tmp_path / "r.json")]) == 1


def test_verify_one_sided_cli(tmp_path):
    env = tmp_path / "env.json"
    env.write_text(json.dumps({"type": "constant", "p": 0.7}))
    assert main(["verify", "--one-sided", str(env), "--suite", "one-sided", "--n", "10000",
                 "--paths", "4000", "--out", str(tmp_path / "r.json")]) == 0


def test_verify_all_defaults_fig1a(tmp_path, capsys):
    """Every suite at its default size on the two-periodic example with p = 1/2."""
    out = tmp_path / "all.json"
    code = main(["verify", "--spec", "builtin:fig1a(0.5)", "--suite", "all", "--out", str(out)])
    failures = [c["name"] for c in json.loads(out.read_text())["report"]["checks"]
                if not c["passed"] and not c["diagnostic"]]
    assert code == 0, f"failing checks: {failures}"


def test_reference_csv(tmp_path):
    out = tmp_path / "ref.csv"
    assert main(["reference", "--gamma", "0.3", "--paths", "500", "--steps", "1000",
                 "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["path", "x", "local_time"] and len(rows) == 501
    summ = dict(csv.reader((tmp_path / "ref_summary.csv").open()))
    assert summ["seed"] == "1" and float(summ["limit_fraction_positive"]) == pytest.approx(0.65)
    assert main(["reference", "--gamma", "2", "--paths", "5", "--steps", "10"]) == 2


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "membrane_walk.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
