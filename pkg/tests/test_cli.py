import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from akplab.cli import main

SMALL = {"data": {"source": "synth", "n_class0": 30, "n_class1": 20, "side": 12}, "d_feat": 16,
         "head_widths": [8, 6], "probe_count": 8}


def write_cfg(path, **kw):
    doc = dict(SMALL, **kw)
    path.write_text(json.dumps(doc))
    return str(path)


def test_lv_sim_conserves(tmp_path):
    out = tmp_path / "lv.csv"
    code = main(["lv-sim", "--a", "0.6667", "--b", "1.3333", "--c", "1", "--d", "1", "--w1", "1", "--w2", "1",
                 "--dt", "0.001", "--t-end", "10", "--out", str(out), "--plot"])
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    v = np.array([float(r["V"]) for r in rows])
    assert len(rows) == 10001 and np.ptp(v) <= 1e-6
    assert out.with_suffix(".png").is_file()


def test_lv_sim_decoupled_and_feature_map(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["lv-sim", "--a", "0.5", "--b", "0", "--c", "0.2", "--d", "0", "--w1", "1", "--w2", "2",
                 "--dt", "0.5", "--t-end", "2", "--decoupled", "--feature-map", "1,1,1,-1", "--out", str(out)]) == 0
    with open(out) as fh:
        last = list(csv.DictReader(fh))[-1]
    w1, w2 = float(last["W1"]), float(last["W2"])
    assert w1 == pytest.approx(np.e) and float(last["f1"]) == pytest.approx(w1 + w2)


def test_lv_sim_bad_parameters(tmp_path):
    args = ["lv-sim", "--a", "-1", "--b", "1", "--c", "1", "--d", "1", "--w1", "1", "--w2", "1", "--t-end", "1",
            "--out", str(tmp_path / "x.csv")]
    assert main(args) == 1
    args[2] = "1"
    args[10] = "0"  # --w1 0 is a runtime domain failure
    assert main(args) == 2


def test_usage_errors(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["lv-sim", "--bogus"]) == 1
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_group_schedule_violation(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", group="A", epochs=20)
    assert main(["group", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "schedule violation" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert main(["train", "--config", str(tmp_path / "none.json")]) == 1


def test_train_and_out_env(tmp_path, monkeypatch):
    monkeypatch.setenv("AKP_OUT_DIR", str(tmp_path / "envout"))
    cfg = write_cfg(tmp_path / "c.json", trials=2, epochs=22)
    assert main(["train", "--config", cfg, "--trial", "1", "--seed", "5"]) == 0
    run = json.loads((tmp_path / "envout" / "custom" / "trial_001" / "run.json").read_text())
    assert run["seed"] == 5 and run["config"]["epochs"] == 22
    assert main(["train", "--config", cfg, "--trial", "7"]) == 1


def test_group_similarity_report(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", group="A", name="demo", trials=3, trial_variation="permute_policy")
    out = tmp_path / "out"
    assert main(["group", "--config", cfg, "--out", str(out)]) == 0

    sim = tmp_path / "sim"
    assert main(["similarity", "--snapshots", str(out), "--threshold", "0.5", "--out", str(sim)]) == 0
    for name in ("similarity.csv", "ordination.csv", "akp_report.json", "similarity.png", "ordination.png"):
        assert (sim / name).is_file()
    with open(sim / "ordination.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["model_id", "stress", "x", "y"] and len(rows) == 3
    rep = json.loads((sim / "akp_report.json").read_text())
    assert rep["threshold"] == 0.5 and len(rep["happy"]) + len(rep["unhappy"]) == 3

    report = tmp_path / "rep" / "table.json"
    assert main(["report", "--runs", str(out), "--out", str(report)]) == 0
    doc = json.loads(report.read_text())
    (exp,) = doc["experiments"]
    assert (exp["group"], exp["optimizer"], exp["perturbation"], exp["n_trials"]) == ("A", "rmsprop", "activation", 3)
    assert set(exp["classes"]) == {"0", "1"}
    assert set(exp["classes"]["1"]) == {"precision", "recall", "f1"}
    assert isinstance(exp["accuracy"], float)
    with open(report.with_suffix(".csv")) as fh:
        table = list(csv.DictReader(fh))
    assert [r["class"] for r in table] == ["0", "1"]
    assert table[0]["accuracy"] != "" and table[1]["accuracy"] == ""
    assert all((report.parent / f).is_file() for f in doc["figures"])


def test_similarity_without_snapshots(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["similarity", "--snapshots", str(tmp_path / "empty"), "--out", str(tmp_path / "s")]) == 2


def test_report_without_runs(tmp_path):
    assert main(["report", "--runs", str(tmp_path), "--out", str(tmp_path / "r.json")]) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "akplab", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "lv-sim" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "akplab", "nope"], capture_output=True, text=True)
    assert proc.returncode == 1 and "usage" in proc.stderr
