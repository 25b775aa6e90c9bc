import json
import os

import numpy as np
import pytest

from setgen.cli import (
    RunConfig,
    eval_run,
    load_run,
    main,
    reproduce,
    train_run,
)
from setgen.core import ValidationError, load_dataset
from setgen.metrics import EvalReport
from setgen.tasks import TaskSpec, generate, task2_truth
from tests.conftest import OracleLabelPosterior


def read(path):
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


# --- gen / import -----------------------------------------------------------------


def test_gen_writes_dataset_and_manifest(tmp_path, capsys):
    out = tmp_path / "g"
    assert main(["gen", "--task", "task1", "--n", "50", "--seed", "7",
                 "--out", str(out)]) == 0
    ds = load_dataset(str(out / "task1.jsonl"))
    assert len(ds) == 50
    manifest = json.loads(read(out / "task1.manifest.json"))
    assert manifest["seed"] == 7 and manifest["n"] == 50


def test_gen_twice_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["gen", "--task", "task1", "--n", "100", "--seed", "7",
                     "--out", str(out)]) == 0
    assert read(a / "task1.jsonl") == read(b / "task1.jsonl")
    assert read(a / "task1.manifest.json") == read(b / "task1.manifest.json")


def test_gen_task2_passes_truth_self_check(tmp_path):
    out = tmp_path / "g2"
    assert main(["gen", "--task", "task2", "--n", "10", "--seed", "3",
                 "--out", str(out)]) == 0
    ds = load_dataset(str(out / "task2.jsonl"))
    for s in ds.samples:
        x = "".join(str(t) for t in s.x)
        got = {"".join(str(t) for t in seq[:-1]) for seq in s.y}
        assert got == task2_truth(x)


def test_import_round_trips_sparse_file(tmp_path):
    src = tmp_path / "ml.txt"
    src.write_text("1,3 0:0.5 2:1.0\n0 1:2.0\n2 0:1.0 1:1.0 2:1.0\n")
    out = tmp_path / "imp"
    assert main(["import", "--data", str(src), "--out", str(out)]) == 0
    ds = load_dataset(str(out / "imported.jsonl"))
    assert len(ds) == 3 and ds.universe == 4


# --- train ------------------------------------------------------------------------


def test_train_scalar_threshold_reports_one_lambda(tmp_path):
    cfg = RunConfig(task="threshold", variant="scalar", n=60, epochs=3, seed=1)
    out = tmp_path / "run"
    train_run(cfg, out=str(out))
    report = json.loads(read(out / "train_report.json"))
    pen = report["penalty"]
    assert pen["variant"] == "scalar"
    assert isinstance(pen["value"], float)
    assert len(pen["feasibility"]) == 1
    assert "feasible" in pen["feasibility"][0]


def test_train_per_position_reports_value_per_position(tmp_path):
    cfg = RunConfig(task="task2", variant="per-position", n=30, epochs=2, seed=1)
    out = tmp_path / "run"
    train_run(cfg, out=str(out))
    pen = json.loads(read(out / "penalty.json"))
    assert pen["variant"] == "per-position"
    assert len(pen["values"]) == 10  # task2 output positions incl. end token
    assert len(pen["feasibility"]) == 10


def test_train_learned_windowed_writes_gate_and_accuracy(tmp_path):
    cfg = RunConfig(task="task1", variant="learned-windowed", n=40, epochs=2, seed=1)
    out = tmp_path / "run"
    train_run(cfg, out=str(out))
    assert os.path.exists(out / "gate.json")
    report = json.loads(read(out / "train_report.json"))
    assert 0.0 <= report["gate_validation_accuracy"] <= 1.0
    pen = json.loads(read(out / "penalty.json"))
    assert pen["variant"] == "learned" and pen["classifier_ref"] == "gate.json"
    assert pen["model_hash"]


def test_baseline_on_task2_is_refused():
    with pytest.raises(ValidationError, match="not applicable"):
        RunConfig(task="task2", variant="baseline")
    assert main(["train", "--task", "task2", "--variant", "baseline"]) == 1


def test_train_exit_code_on_divergence(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({
        "task": "threshold", "variant": "scalar", "n": 30, "epochs": 3,
        "learning_rate": 1e308, "seed": 0,
    }))
    rc = main(["train", "--config", str(conf), "--out", str(tmp_path / "r")])
    assert rc == 2


# --- eval --------------------------------------------------------------------------


def test_eval_round_trip_from_disk(tmp_path):
    cfg = RunConfig(task="threshold", variant="scalar", n=60, epochs=4, seed=2)
    out = tmp_path / "run"
    train_run(cfg, out=str(out))
    art = load_run(str(out))
    report = eval_run(art, out=str(tmp_path / "eval"))
    assert isinstance(report, EvalReport)
    doc = json.loads(read(tmp_path / "eval" / "eval_report.json"))
    assert doc["metric"] == "mF1"
    assert len(doc["per_sample"]) == report.n_samples
    lines = read(tmp_path / "eval" / "decode_report.jsonl").splitlines()
    assert len(lines) == report.n_samples
    row = json.loads(lines[0])
    assert set(row) == {"x", "predicted", "iterations", "truncated", "repeats"}


def test_eval_is_deterministic(tmp_path):
    cfg = RunConfig(task="threshold", variant="scalar", n=50, epochs=3, seed=3)
    out = tmp_path / "run"
    train_run(cfg, out=str(out))
    for name in ("e1", "e2"):
        eval_run(load_run(str(out)), out=str(tmp_path / name))
    for fname in ("eval_report.json", "decode_report.jsonl", "summary.csv"):
        assert read(tmp_path / "e1" / fname) == read(tmp_path / "e2" / fname)


def test_eval_oracle_fixture_scores_perfectly(tmp_path):
    # an oracle posterior plus its calibrated scalar penalty decodes exactly
    from setgen.penalty import PenaltyParams, margin_stats, solve_lambda
    from setgen.cli import RunArtifacts
    from setgen.tasks import split_train_test

    ds = generate(TaskSpec(task="threshold", n=200, seed=4))
    train_ds, test_ds = split_train_test(ds, 0.7, seed=4)
    oracle = OracleLabelPosterior({s.x: s.y_set for s in ds.samples}, ds.universe)
    sol = solve_lambda(margin_stats(oracle, train_ds))
    # strict margins (interior solve) are the separability precondition for
    # exact decoding; at a boundary solve, penalized members tie with the
    # best negative and the tie-break may leave the target set
    assert sol.candidate == "interior"
    art = RunArtifacts(
        cfg=RunConfig(task="threshold", variant="scalar", n=80, seed=4),
        dataset=ds, train_split=train_ds, test_split=test_ds,
        base_model=oracle,
        penalty=PenaltyParams(variant="scalar", value=sol.value, solutions=(sol,)),
    )
    report = eval_run(art)
    assert report.aggregate == 1.0
    assert report.exact_match_rate == 1.0


def test_eval_cli_threads_flag(tmp_path):
    cfg = RunConfig(task="threshold", variant="scalar", n=40, epochs=2, seed=5)
    out = tmp_path / "run"
    train_run(cfg, out=str(out))
    rc = main(["eval", "--run", str(out), "--out", str(tmp_path / "e"),
               "--threads", "2"])
    assert rc == 0


# --- reproduce ------------------------------------------------------------------------


def test_reproduce_task1_smoke(tmp_path, capsys):
    doc, _ = reproduce("task1", str(tmp_path / "rep"), n=60, seed=5, epochs=2)
    cols = doc["columns"]
    assert set(cols) == {"multi-label", "ssg-s", "ssg-recurrent", "ssg-windowed"}
    assert (tmp_path / "rep" / "table.csv").exists()
    assert (tmp_path / "rep" / "reproduce_report.json").exists()
    printed = capsys.readouterr().out
    assert "multi-label" in printed and "ssg-windowed" in printed


def test_reproduce_task2_reports_baseline_not_applicable(tmp_path, capsys):
    doc, _ = reproduce("task2", str(tmp_path / "rep2"), n=40, seed=5, epochs=2)
    assert doc["not_applicable"] == ["multi-label"]
    table = read(tmp_path / "rep2" / "table.csv")
    assert "N/A" in table
    assert "multi-label" not in doc["columns"]


def test_reproduce_multilabel_file(tmp_path):
    rng = np.random.default_rng(0)
    lines = []
    for _ in range(60):
        labels = sorted(rng.choice(4, size=int(rng.integers(1, 3)), replace=False))
        feats = " ".join(f"{i}:{rng.uniform():.3f}" for i in range(5))
        lines.append(",".join(map(str, labels)) + " " + feats)
    src = tmp_path / "ml.txt"
    src.write_text("\n".join(lines) + "\n")
    doc, ok = reproduce("multilabel-file", str(tmp_path / "rep3"), n=60, seed=5,
                        epochs=2, data=str(src))
    assert ok  # no pinned criteria for user data
    assert set(doc["columns"]) == {"multi-label", "ssg-s", "ssg-recurrent",
                                   "ssg-windowed"}


def test_config_file_merging(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"task": "threshold", "variant": "scalar",
                                "n": 30, "epochs": 2}))
    rc = main(["train", "--config", str(conf), "--seed", "9",
               "--out", str(tmp_path / "r")])
    assert rc == 0
    saved = json.loads(read(tmp_path / "r" / "config.json"))
    assert saved["config"]["seed"] == 9  # flag overrides
    assert saved["config"]["n"] == 30  # config file value kept
    assert "config_hash" in saved


def test_run_directories_are_append_only(tmp_path):
    cfg = RunConfig(task="threshold", variant="scalar", n=30, epochs=2, seed=1)
    out = tmp_path / "run"
    train_run(cfg, out=str(out))
    with pytest.raises(ValidationError, match="refusing to overwrite"):
        train_run(cfg, out=str(out))
    eval_out = tmp_path / "eval"
    eval_run(load_run(str(out)), out=str(eval_out))
    with pytest.raises(ValidationError, match="refusing to overwrite"):
        eval_run(load_run(str(out)), out=str(eval_out))


def test_run_config_validation():
    with pytest.raises(ValidationError):
        RunConfig(task="threshold", variant="scalar", rho=1.5)
    with pytest.raises(ValidationError):
        RunConfig(task="threshold", variant="scalar", split=0.0)
    with pytest.raises(ValidationError):
        RunConfig(task="multilabel-file", variant="scalar")
