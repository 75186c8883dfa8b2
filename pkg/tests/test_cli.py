import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest
import yaml

from _oracles import severity_table
from lnarx.cli import main
from lnarx.dataset import CsvSchema, load_csv
from lnarx.modelfile import load_model

SMALL = {
    "data": {"path": "data.csv", "classes": ["Normal", "P2", "P1", "P0"]},
    "model": {"k_max": 4},
    "split": {"seed": 0, "n_folds": 3},
    "baselines": {"names": ["random_forest", "knn"], "grid": {"n_trees": [5], "max_depth": [None, 4]}},
    "simulate": {"n_sections": 2, "samples_per_section": 300, "seed": 5},
    "outputs": {"dataset": "data.csv", "model": "model.json", "train_report": "train.json",
                "evaluation": "eval.json", "reduced": "reduced.csv", "predictions": "pred.csv"},
}


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "run.yaml").write_text(yaml.safe_dump(SMALL))
    return tmp_path


def _run(*args):
    return main([str(a) for a in args])


def _csv_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate_counts_match_file(workdir, capsys):
    assert _run("simulate", "--config", workdir / "run.yaml") == 0
    summary = json.loads(capsys.readouterr().out)
    rows = _csv_rows(workdir / "data.csv")
    assert len(rows) == summary["n_samples"] == 600
    for c, n in summary["class_counts"].items():
        assert sum(r["criticality"] == c for r in rows) == n


def test_simulate_deterministic(workdir):
    _run("simulate", "--config", workdir / "run.yaml", "-o", workdir / "a.csv")
    _run("simulate", "--config", workdir / "run.yaml", "-o", workdir / "b.csv")
    assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()


def test_label_subcommand(tmp_path, capsys):
    src = tmp_path / "in.csv"
    grid = [(r, round(lv * 0.05, 2), load) for r in range(0, 101, 5) for lv in range(31) for load in ("loaded", "empty")]
    with src.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["relief", "lv", "load_state", "other"])
        w.writerows([(r, lv, load, "x") for r, lv, load in grid])
    assert _run("label", "-i", src, "-o", tmp_path / "out.csv") == 0
    rows = _csv_rows(tmp_path / "out.csv")
    names = ["Normal", "P2", "P1", "P0"]
    assert len(rows) == len(grid) > 1000
    for row, (r, lv, load) in zip(rows, grid):
        assert row["criticality"] == names[severity_table(r, lv, load == "loaded")]
        assert row["other"] == "x"
    (tmp_path / "one.csv").write_text("relief,lv,load_state\n55,0.7,empty\n0,0,loaded\n")
    _run("label", "-i", tmp_path / "one.csv", "-o", tmp_path / "one_out.csv")
    assert [r["criticality"] for r in _csv_rows(tmp_path / "one_out.csv")] == ["P2", "Normal"]


def test_label_missing_column(tmp_path):
    (tmp_path / "x.csv").write_text("relief,lv\n1,0.1\n")
    assert _run("label", "-i", tmp_path / "x.csv") == 2


@pytest.fixture
def trained(workdir, capsys):
    assert _run("simulate", "--config", workdir / "run.yaml") == 0
    assert _run("train", "--config", workdir / "run.yaml") == 0
    capsys.readouterr()
    return workdir


def test_train_outputs(trained):
    doc = json.loads((trained / "train.json").read_text())
    assert doc["format_version"] == 1 and doc["kind"] == "lnarx-train-report"
    row = doc["importance"][0]
    assert {"term", "score", "feature", "parameter"} <= set(row)
    assert row["term"] == "u7(k)"  # the planted yaw_box channel
    assert doc["selection"][0]["steps"][0]["term"] == "u7(k)"
    model = json.loads((trained / "model.json").read_text())
    assert model["spec"]["degree"] == 2 and model["format_version"] == 1
    assert len(model["provenance"]["config_hash"]) == 64


def test_train_rerun_byte_identical(trained):
    first = (trained / "model.json").read_bytes()
    assert _run("train", "--config", trained / "run.yaml", "--model", trained / "again.json",
                "--report", trained / "r2.json") == 0
    assert (trained / "again.json").read_bytes() == first


def test_predict_matches_in_memory(trained, capsys):
    assert _run("predict", "--model", trained / "model.json", "--data", trained / "data.csv",
                "-o", trained / "pred.csv") == 0
    clf = load_model(trained / "model.json")
    ds = load_csv(trained / "data.csv", CsvSchema("criticality", clf.channel_names, classes=clf.class_labels))
    rows = _csv_rows(trained / "pred.csv")
    assert [r["predicted"] for r in rows] == clf.predict_labels(ds)
    assert {r["predicted"] for r in rows} <= {"Normal", "P2", "P1", "P0"}
    first = (trained / "pred.csv").read_bytes()
    _run("predict", "--model", trained / "model.json", "--data", trained / "data.csv", "-o", trained / "pred.csv")
    assert (trained / "pred.csv").read_bytes() == first


def test_predict_schema_mismatch(trained):
    (trained / "bad.csv").write_text("a,b\n1,2\n")
    assert _run("predict", "--model", trained / "model.json", "--data", trained / "bad.csv") == 2


def test_select_then_retrain(trained, capsys):
    assert _run("select", "--config", trained / "run.yaml") == 0
    out = json.loads(capsys.readouterr().out)
    clf = load_model(trained / "model.json")
    used = sorted({c for t in clf.terms for c in t.input_channels})
    assert out["channels"] == [clf.channel_names[c - 1] for c in used]
    header = next(csv.reader(open(trained / "reduced.csv")))
    assert header[: len(used)] == out["channels"] and "criticality" in header
    cfg = dict(SMALL, data={"path": "reduced.csv", "classes": SMALL["data"]["classes"]},
               outputs={"model": "reduced_model.json", "train_report": "reduced_train.json"})
    (trained / "reduced.yaml").write_text(yaml.safe_dump(cfg))
    assert _run("train", "--config", trained / "reduced.yaml") == 0
    assert load_model(trained / "reduced_model.json").channel_names == tuple(out["channels"])


def test_evaluate_report(trained, capsys):
    assert _run("evaluate", "--config", trained / "run.yaml") == 0
    text = capsys.readouterr().out
    doc = json.loads((trained / "eval.json").read_text())
    assert doc["format_version"] == 1
    assert set(doc["models"]) == {"logistic_narx", "random_forest", "knn"}
    for name in ("Average Accuracy", "Sensitivity", "Specificity", "Precision", "F1 Score"):
        assert name in doc["metric_names"] and name in text
        assert name in doc["models"]["logistic_narx"]["summary"]
    conf = doc["models"]["logistic_narx"]["confusion"]
    for row, counts in zip(conf["row_percent"], conf["counts"]):
        if sum(counts):
            assert sum(row) == pytest.approx(100.0)
    assert _run("report", trained / "eval.json") == 0
    assert "confusion (row %)" in capsys.readouterr().out


def test_evaluate_on_training_data_of_separable_run(workdir, capsys):
    cfg = dict(SMALL, simulate=dict(SMALL["simulate"], noise_std=0.0))
    (workdir / "sep.yaml").write_text(yaml.safe_dump(cfg))
    _run("simulate", "--config", workdir / "sep.yaml")
    _run("train", "--config", workdir / "sep.yaml")
    assert _run("evaluate", "--config", workdir / "sep.yaml", "--full", "--baselines", "") == 0
    doc = json.loads((workdir / "eval.json").read_text())
    assert doc["models"]["logistic_narx"]["summary"]["Average Accuracy"] >= 0.99


def test_report_renders_model_and_train(trained, capsys):
    assert _run("report", trained / "model.json") == 0
    assert "u7(k)" in capsys.readouterr().out
    assert _run("report", trained / "train.json", "--format", "json") == 0
    assert json.loads(capsys.readouterr().out)["kind"] == "lnarx-train-report"


def test_version_mismatch_exit_code(trained):
    doc = json.loads((trained / "model.json").read_text())
    doc["format_version"] = 2
    (trained / "old.json").write_text(json.dumps(doc))
    assert _run("evaluate", "--config", trained / "run.yaml", "--model", trained / "old.json") == 2


def test_exit_codes(workdir, tmp_path):
    assert _run("train", "--bogus") == 1
    assert _run("train", "--config", tmp_path / "nope.yaml") == 1
    (tmp_path / "bad.yaml").write_text("model: {k_max: 0}\n")
    assert _run("train", "--config", tmp_path / "bad.yaml") == 1
    (tmp_path / "unk.yaml").write_text("modle: {}\n")
    assert _run("train", "--config", tmp_path / "unk.yaml") == 1
    # data error: non-numeric cell
    (tmp_path / "d.csv").write_text("a,criticality\n1,x\nfoo,y\n")
    assert _run("train", "--data", tmp_path / "d.csv") == 2
    assert _run("train", "--data", tmp_path / "missing.csv") == 2


@pytest.mark.filterwarnings("ignore:k_max")
def test_numerical_failure_exit_code(tmp_path):
    # every candidate column is zero, so selection cannot pick a term
    with open(tmp_path / "z.csv", "w") as fh:
        fh.write("a,b,criticality\n" + "".join(f"0,0,{'xy'[i % 2]}\n" for i in range(40)))
    assert _run("train", "--data", tmp_path / "z.csv", "--model", tmp_path / "m.json",
                "--report", tmp_path / "r.json") == 3


def test_console_script_and_log_env(tmp_path):
    env = dict(os.environ, LNARX_LOG_LEVEL="INFO")
    proc = subprocess.run([sys.executable, "-m", "lnarx", "simulate", "-o", str(tmp_path / "d.csv"),
                           "--n-sections", "1", "--samples-per-section", "50"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n_samples"] == 50
    proc = subprocess.run([sys.executable, "-m", "lnarx", "train", "--data", str(tmp_path / "nothere.csv")],
                          capture_output=True, text=True, env=dict(os.environ, LNARX_LOG_LEVEL="ERROR"))
    assert proc.returncode == 2 and "ERROR" in proc.stderr
