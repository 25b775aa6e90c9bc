"""Experiment harness: dataset generation, training, calibration, decoding, evaluation.

Verbs: ``gen``, ``import``, ``train``, ``eval``, ``reproduce``.  Every run
writes a resolved config (with its hash and the library version) next to its
artifacts, and nothing mutates a previously written run directory, so any
result can be re-derived bit-identically from what is on disk.  Reports never
embed wall-clock values; timing goes to stderr only.

Exit codes: 0 success, 1 validation error, 2 training failure,
3 criterion failure (``reproduce`` only).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import __version__, metrics, tasks
from .core import Dataset, TrainingError, ValidationError, flatten, load_dataset, save_dataset
from .decoder import content_hash, decode_sequence_set, decode_set, verify_penalty_binding
from .lambda_net import (
    LambdaNet,
    build_label_lambda_training_set,
    build_lambda_training_set,
    classify_positives,
    train_lambda_net,
)
from .models import (
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train_label_model,
    train_multilabel_baseline,
    train_sequence_model,
)
from .penalty import PenaltyParams, margin_stats, solve_lambda, solve_lambda_per_position

VARIANTS = ("scalar", "per-position", "learned-recurrent", "learned-windowed", "baseline")
TASKS = ("threshold", "task1", "task2", "multilabel-file")


@dataclass(frozen=True)
class RunConfig:
    """Flat, fully serialized description of one train/eval run."""

    task: str
    variant: str
    n: int = 1000
    seed: int = 7
    rho: float = 0.0
    split: float = 0.7
    epochs: int = 40
    gate_epochs: int = 0  # 0 means "same as epochs"
    learning_rate: float = 1e-3
    batch_size: int = 15
    hidden: int = 64
    embed_dim: int = 60
    enc_hidden: int = 60
    dec_hidden: int = 120
    gate_hidden: int = 24
    gate_filters: int = 8
    gate_dense: int = 16
    threshold: float = 0.5
    threads: int = 1
    max_branches: int = 1024
    data: str = ""  # sparse multi-label file, multilabel-file task only

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValidationError(f"unknown task {self.task!r}")
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown penalty variant {self.variant!r}")
        if not 0.0 <= self.rho < 1.0:
            raise ValidationError("rho must lie in [0, 1)")
        if not 0.0 < self.split < 1.0:
            raise ValidationError("split fraction must lie in (0, 1)")
        if self.task == "multilabel-file" and not self.data:
            raise ValidationError("multilabel-file runs need --data")
        if self.task == "task2" and self.variant == "baseline":
            raise ValidationError(
                "not applicable: the multi-label baseline cannot emit sequence sets"
            )

    @property
    def effective_gate_epochs(self) -> int:
        return self.gate_epochs or self.epochs

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _fresh_dir(path: str, marker: str | None = None) -> str:
    """Create a run directory; refuse to overwrite one that already has results.

    Run directories are append-only: a directory holding ``marker`` was
    written by an earlier command and stays immutable.
    """
    os.makedirs(path, exist_ok=True)
    if marker and os.path.exists(os.path.join(path, marker)):
        raise ValidationError(
            f"refusing to overwrite existing run artifacts in {path!r} "
            f"({marker} already present); choose a fresh --out"
        )
    return path


def _build_dataset(cfg: RunConfig) -> Dataset:
    if cfg.task == "multilabel-file":
        return tasks.load_multilabel(cfg.data)
    spec = tasks.TaskSpec(task=cfg.task, n=cfg.n, seed=cfg.seed)
    return tasks.generate(spec)


def _train_cfg(cfg: RunConfig, epochs: int, seed_offset: int = 0) -> TrainConfig:
    return TrainConfig(
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        epochs=epochs,
        optimizer="adam",
        seed=cfg.seed + seed_offset,
        hidden_sizes=(cfg.hidden,),
    )


@dataclass
class RunArtifacts:
    """In-memory handles produced by training; mirrored on disk."""

    cfg: RunConfig
    dataset: Dataset
    train_split: Dataset
    test_split: Dataset
    base_model: object = None
    baseline_model: object = None
    gate: LambdaNet | None = None
    penalty: PenaltyParams | None = None
    report: dict | None = None


def train_run(cfg: RunConfig, dataset: Dataset | None = None,
              out: str | None = None) -> RunArtifacts:
    """Train the base model and calibrate the configured penalty variant."""
    dataset = dataset if dataset is not None else _build_dataset(cfg)
    train_ds, test_ds = tasks.split_train_test(dataset, cfg.split, cfg.seed)
    art = RunArtifacts(cfg=cfg, dataset=dataset, train_split=train_ds, test_split=test_ds)
    report: dict = {
        "version": __version__,
        "config": asdict(cfg),
        "config_hash": cfg.config_hash(),
        "n_train": len(train_ds),
        "n_test": len(test_ds),
    }

    if cfg.variant == "baseline":
        label_ds = tasks.task1_label_view(train_ds) if cfg.task == "task1" else train_ds
        art.baseline_model = train_multilabel_baseline(
            label_ds, _train_cfg(cfg, cfg.epochs), threshold=cfg.threshold
        )
        report["train_losses"] = art.baseline_model.train_losses
    elif dataset.kind == "labels":
        flat = flatten(train_ds)
        art.base_model = train_label_model(flat, _train_cfg(cfg, cfg.epochs), dataset.universe)
        report["train_losses"] = art.base_model.train_losses
        if cfg.variant == "scalar":
            records = margin_stats(art.base_model, train_ds)
            sol = solve_lambda(records)
            art.penalty = PenaltyParams(
                variant="scalar", value=sol.value, solutions=(sol,),
                model_hash=content_hash(art.base_model),
            )
        else:
            art.gate = _train_gate_for_labels(cfg, art.base_model, train_ds, report)
            art.penalty = PenaltyParams(
                variant="learned", classifier=art.gate,
                model_hash=content_hash(art.base_model),
            )
    else:
        flat = [p for p in flatten(train_ds)]
        art.base_model = train_sequence_model(
            flat, _train_cfg(cfg, cfg.epochs),
            input_vocab=10, vocab=dataset.universe, max_len=dataset.max_len,
            embed_dim=cfg.embed_dim, enc_hidden=cfg.enc_hidden, dec_hidden=cfg.dec_hidden,
        )
        report["train_losses"] = art.base_model.train_losses
        if cfg.variant == "per-position":
            art.penalty = solve_lambda_per_position(art.base_model, train_ds)
            art.penalty = replace_penalty_hash(art.penalty, content_hash(art.base_model))
        else:
            art.gate = _train_gate_for_sequences(cfg, art.base_model, train_ds, report)
            art.penalty = PenaltyParams(
                variant="learned", classifier=art.gate,
                model_hash=content_hash(art.base_model),
            )
    if art.penalty is not None:
        report["penalty"] = art.penalty.to_dict()
    art.report = report
    if out:
        _persist_run(art, out)
    return art


def replace_penalty_hash(p: PenaltyParams, model_hash: str) -> PenaltyParams:
    return PenaltyParams(variant=p.variant, value=p.value, values=p.values,
                         solutions=p.solutions, classifier=p.classifier,
                         classifier_ref=p.classifier_ref, model_hash=model_hash)


def _gate_variant(cfg: RunConfig) -> str:
    return "recurrent" if cfg.variant == "learned-recurrent" else "windowed"


def _gate_accuracy(gate: LambdaNet, examples) -> float:
    """Token-level accuracy of the gate's thresholded decisions."""
    hits = 0
    total = 0
    for ex in examples:
        got = classify_positives(gate, np.asarray(ex.logits), ex.position)
        want = {k for k, t in enumerate(ex.targets) if t}
        hits += sum((k in got) == (k in want) for k in range(len(ex.targets)))
        total += len(ex.targets)
    return hits / max(total, 1)


def _train_gate_for_labels(cfg, model, train_ds, report) -> LambdaNet:
    examples = build_label_lambda_training_set(model, train_ds)
    return _fit_gate(cfg, examples, max_len=1, report=report)


def _train_gate_for_sequences(cfg, model, train_ds, report) -> LambdaNet:
    examples = build_lambda_training_set(model, train_ds)
    return _fit_gate(cfg, examples, max_len=train_ds.max_len, report=report)


def _fit_gate(cfg: RunConfig, examples, max_len: int, report: dict) -> LambdaNet:
    cut = max(1, int(round(0.9 * len(examples))))
    gate = train_lambda_net(
        examples[:cut], _gate_variant(cfg), _train_cfg(cfg, cfg.effective_gate_epochs, 1),
        max_len=max_len, threshold=cfg.threshold, hidden=cfg.gate_hidden,
        filters=cfg.gate_filters, dense=cfg.gate_dense,
    )
    holdout = examples[cut:] or examples[:cut]
    report["gate_train_losses"] = gate.train_losses
    report["gate_validation_accuracy"] = _gate_accuracy(gate, holdout)
    return gate


def _persist_run(art: RunArtifacts, out: str) -> None:
    out = _fresh_dir(out, marker="config.json")
    _write_json(os.path.join(out, "config.json"), {
        "version": __version__,
        "config": asdict(art.cfg),
        "config_hash": art.cfg.config_hash(),
    })
    save_dataset(art.dataset, os.path.join(out, "dataset.jsonl"))
    if art.base_model is not None:
        save_checkpoint(art.base_model, os.path.join(out, "model.json"))
    if art.baseline_model is not None:
        save_checkpoint(art.baseline_model, os.path.join(out, "baseline.json"))
    if art.gate is not None:
        save_checkpoint(art.gate, os.path.join(out, "gate.json"))
        if art.penalty is not None:
            art.penalty.classifier_ref = "gate.json"
    if art.penalty is not None:
        _write_json(os.path.join(out, "penalty.json"), art.penalty.to_dict())
    _write_json(os.path.join(out, "train_report.json"), art.report)


def load_run(run_dir: str) -> RunArtifacts:
    """Rehydrate checkpoints written by ``train_run``."""
    with open(os.path.join(run_dir, "config.json"), "r", encoding="utf-8") as fh:
        cfg = RunConfig(**json.load(fh)["config"])
    dataset = load_dataset(os.path.join(run_dir, "dataset.jsonl"))
    train_ds, test_ds = tasks.split_train_test(dataset, cfg.split, cfg.seed)
    art = RunArtifacts(cfg=cfg, dataset=dataset, train_split=train_ds, test_split=test_ds)
    model_path = os.path.join(run_dir, "model.json")
    if os.path.exists(model_path):
        art.base_model = load_checkpoint(model_path)
    baseline_path = os.path.join(run_dir, "baseline.json")
    if os.path.exists(baseline_path):
        art.baseline_model = load_checkpoint(baseline_path)
    penalty_path = os.path.join(run_dir, "penalty.json")
    if os.path.exists(penalty_path):
        with open(penalty_path, "r", encoding="utf-8") as fh:
            art.penalty = PenaltyParams.from_dict(json.load(fh))
        gate_path = os.path.join(run_dir, "gate.json")
        if os.path.exists(gate_path):
            art.gate = load_checkpoint(gate_path)
            art.penalty.classifier = art.gate
    return art


# --- decoding + evaluation -----------------------------------------------------


def _predict_sample(art: RunArtifacts, sample):
    """Decode one sample into (predicted set of hashables, report dict)."""
    cfg = art.cfg
    if cfg.variant == "baseline":
        if art.dataset.kind == "sequences":  # task1 via the label view
            x = tasks.featurize_digits(sample.x, 10)
        else:
            x = sample.x
        pred = art.baseline_model.predict_set(x)
        if art.dataset.kind == "sequences":
            pred = frozenset((int(d),) for d in pred)
        return pred, {"x": _x_repr(sample.x), "predicted": sorted(map(_el_repr, pred)),
                      "iterations": 1, "truncated": False, "repeats": 0}
    if art.dataset.kind == "labels":
        if cfg.variant == "scalar":
            res = decode_set(art.base_model, art.penalty.value, sample.x, rho=cfg.rho)
            return res.label_set, res.to_report(sample.x)
        logits = art.base_model.scores(np.asarray(sample.x, dtype=float)[None, :])[0]
        pred = classify_positives(art.gate, logits, 1)
        return pred, {"x": _x_repr(sample.x), "predicted": sorted(pred),
                      "iterations": 1, "truncated": False, "repeats": 0}
    res = decode_sequence_set(
        art.base_model, art.penalty, sample.x,
        rho=cfg.rho, max_branches=cfg.max_branches,
    )
    content = frozenset(seq[:-1] for seq in res.sequences)
    return content, res.to_report(sample.x)


def _x_repr(x):
    if isinstance(x, tuple) and x and isinstance(x[0], int):
        return "".join(str(t) for t in x)
    return list(x)


def _el_repr(el):
    if isinstance(el, tuple):
        return "".join(str(t) for t in el)
    return el


def _truth_sets(art: RunArtifacts, ds: Dataset):
    if ds.kind == "labels":
        return [s.y_set for s in ds.samples]
    return [frozenset(seq[:-1] for seq in s.y) for s in ds.samples]


def task_metric(task: str) -> str:
    return "mED" if task == "task2" else "mF1"


def eval_run(art: RunArtifacts, out: str | None = None,
             metric: str | None = None) -> metrics.EvalReport:
    """Decode the held-out split and score it with the task's metric."""
    cfg = art.cfg
    metric = metric or task_metric(cfg.task)
    ds = art.test_split
    if cfg.variant != "baseline" and art.penalty is not None and art.base_model is not None:
        verify_penalty_binding(art.base_model, art.penalty)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            results = list(ex.map(lambda s: _predict_sample(art, s), ds.samples))
    else:
        results = [_predict_sample(art, s) for s in ds.samples]
    preds = [r[0] for r in results]
    reports = [r[1] for r in results]
    truths = _truth_sets(art, ds)
    n_truncated = sum(1 for r in reports if r.get("truncated"))
    report = metrics.evaluate(preds, truths, metric, n_truncated=n_truncated)
    if out:
        out = _fresh_dir(out, marker="eval_report.json")
        doc = report.to_dict()
        doc["version"] = __version__
        doc["config_hash"] = cfg.config_hash()
        doc["variant"] = cfg.variant
        doc["task"] = cfg.task
        _write_json(os.path.join(out, "eval_report.json"), doc)
        with open(os.path.join(out, "decode_report.jsonl"), "w", encoding="utf-8") as fh:
            for r in reports:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
        with open(os.path.join(out, "summary.csv"), "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["task", "variant", "metric", "aggregate", "exact_match_rate", "n"])
            w.writerow([cfg.task, cfg.variant, metric,
                        f"{report.aggregate:.6f}", f"{report.exact_match_rate:.6f}",
                        report.n_samples])
    return report


# --- reproduce pipelines ----------------------------------------------------------


REPRODUCE_VARIANTS = {
    "task1": ("baseline", "per-position", "learned-recurrent", "learned-windowed"),
    "task2": ("per-position", "learned-recurrent", "learned-windowed"),
    "multilabel-file": ("baseline", "scalar", "learned-recurrent", "learned-windowed"),
}
COLUMN_NAMES = {
    "baseline": "multi-label",
    "scalar": "ssg-s",
    "per-position": "ssg-s",
    "learned-recurrent": "ssg-recurrent",
    "learned-windowed": "ssg-windowed",
}


def reproduce(task: str, out: str, n: int = 1000, seed: int = 7, epochs: int | None = None,
              data: str = "", threads: int = 1) -> tuple[dict, bool]:
    """Run the baseline and every applicable variant; check directional criteria.

    Returns (report, all_criteria_pass).  Absolute scores depend on the
    pinned seed and schedule; only orderings are asserted.
    """
    if task not in REPRODUCE_VARIANTS:
        raise ValidationError(f"unknown reproduce tag {task!r}")
    out = _fresh_dir(out, marker="reproduce_report.json")
    epochs = epochs if epochs is not None else (60 if task != "multilabel-file" else 80)
    scores: dict[str, float] = {}
    reports: dict[str, dict] = {}
    shared_art: RunArtifacts | None = None
    metric = task_metric(task)
    for variant in REPRODUCE_VARIANTS[task]:
        cfg = RunConfig(task=task, variant=variant, n=n, seed=seed, epochs=epochs,
                        data=data, threads=threads)
        t0 = time.perf_counter()
        if shared_art is not None and variant != "baseline":
            # Reuse the shared base model; recalibrate the penalty only.
            art = _recalibrate(cfg, shared_art)
        else:
            art = train_run(cfg, out=os.path.join(out, variant))
            if variant != "baseline":
                shared_art = art
        report = eval_run(art, out=os.path.join(out, variant))
        dt = time.perf_counter() - t0
        scores[variant] = report.aggregate
        reports[variant] = report.to_dict()
        print(f"[{COLUMN_NAMES[variant]:>14}] {metric}={report.aggregate:.4f} "
              f"exact={report.exact_match_rate:.3f} ({dt:.1f}s)", file=sys.stderr)
    criteria = _criteria(task, scores)
    table = _format_table(task, metric, scores)
    print(table)
    all_pass = all(ok for _, ok in criteria)
    for name, ok in criteria:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    doc = {
        "version": __version__,
        "task": task,
        "metric": metric,
        "n": n,
        "seed": seed,
        "epochs": epochs,
        "columns": {COLUMN_NAMES[v]: scores[v] for v in scores},
        "not_applicable": ["multi-label"] if task == "task2" else [],
        "criteria": [{"name": name, "pass": ok} for name, ok in criteria],
        "reports": reports,
    }
    _write_json(os.path.join(out, "reproduce_report.json"), doc)
    cols = ["task", "metric"] + [COLUMN_NAMES[v] for v in REPRODUCE_VARIANTS[task]]
    row = [task, metric] + [f"{scores[v]:.6f}" for v in REPRODUCE_VARIANTS[task]]
    if task == "task2":
        cols.insert(2, "multi-label")
        row.insert(2, "N/A")
    with open(os.path.join(out, "table.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        w.writerow(row)
    return doc, all_pass


def _recalibrate(cfg: RunConfig, shared: RunArtifacts) -> RunArtifacts:
    """New penalty variant on top of an already trained base model."""
    art = RunArtifacts(cfg=cfg, dataset=shared.dataset,
                       train_split=shared.train_split, test_split=shared.test_split,
                       base_model=shared.base_model)
    report = {"version": __version__, "config": asdict(cfg),
              "config_hash": cfg.config_hash(), "reused_base": True}
    if cfg.variant == "per-position":
        art.penalty = replace_penalty_hash(
            solve_lambda_per_position(art.base_model, art.train_split),
            content_hash(art.base_model))
    elif cfg.variant == "scalar":
        sol = solve_lambda(margin_stats(art.base_model, art.train_split))
        art.penalty = PenaltyParams(variant="scalar", value=sol.value, solutions=(sol,),
                                    model_hash=content_hash(art.base_model))
    else:
        if art.dataset.kind == "labels":
            art.gate = _train_gate_for_labels(cfg, art.base_model, art.train_split, report)
        else:
            art.gate = _train_gate_for_sequences(cfg, art.base_model, art.train_split, report)
        art.penalty = PenaltyParams(variant="learned", classifier=art.gate,
                                    model_hash=content_hash(art.base_model))
    report["penalty"] = art.penalty.to_dict()
    art.report = report
    return art


def _criteria(task: str, scores: dict[str, float]) -> list[tuple[str, bool]]:
    if task == "task1":
        return [
            ("ssg-windowed mF1 > multi-label mF1",
             scores["learned-windowed"] > scores["baseline"]),
            ("ssg-windowed mF1 > ssg-s mF1",
             scores["learned-windowed"] > scores["per-position"]),
            ("ssg-recurrent mF1 > ssg-s mF1",
             scores["learned-recurrent"] > scores["per-position"]),
        ]
    if task == "task2":
        return [
            ("ssg-windowed mED < ssg-s mED",
             scores["learned-windowed"] < scores["per-position"]),
            ("ssg-recurrent mED < ssg-s mED",
             scores["learned-recurrent"] < scores["per-position"]),
            ("multi-label reported N/A", "baseline" not in scores),
        ]
    return []


def _format_table(task: str, metric: str, scores: dict[str, float]) -> str:
    cols = REPRODUCE_VARIANTS[task]
    names = [COLUMN_NAMES[v] for v in cols]
    if task == "task2":
        names = ["multi-label"] + names
    header = f"{'task':<8} {'metric':<7} " + " ".join(f"{n:>15}" for n in names)
    cells = []
    if task == "task2":
        cells.append(f"{'N/A':>15}")
    for v in cols:
        cells.append(f"{scores[v]:>15.4f}")
    return header + "\n" + f"{task:<8} {metric:<7} " + " ".join(cells)


# --- argument parsing ----------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--config", type=str, default=None,
                   help="JSON file of flat RunConfig keys; flags override it")
    p.add_argument("--threads", type=int, default=None)


def _merged_config(args: argparse.Namespace, required: tuple[str, ...] = ()) -> RunConfig:
    doc: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            doc.update(json.load(fh))
    for key in RunConfig.__dataclass_fields__:
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    for key in required:
        if key not in doc:
            raise ValidationError(f"missing required config key {key!r}")
    return RunConfig(**doc)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="setgen", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--task", required=True, choices=("threshold", "task1", "task2"))
    p.add_argument("--n", type=int, required=True)
    _add_common(p)

    p = sub.add_parser("import", help="convert a sparse multi-label file to the dataset format")
    p.add_argument("--data", required=True)
    p.add_argument("--features", type=int, default=None)
    p.add_argument("--universe", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("train", help="train a base model and calibrate its penalty")
    p.add_argument("--task", choices=TASKS, default=None)
    p.add_argument("--variant", choices=VARIANTS, default=None)
    p.add_argument("--dataset", type=str, default=None, help="existing dataset.jsonl")
    p.add_argument("--data", type=str, default=None, help="sparse multi-label file")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--gate-epochs", dest="gate_epochs", type=int, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--split", type=float, default=None)
    _add_common(p)

    p = sub.add_parser("eval", help="decode and score the held-out split of a train run")
    p.add_argument("--run", required=True, help="directory written by train")
    p.add_argument("--metric", choices=("mF1", "mED"), default=None)
    _add_common(p)

    p = sub.add_parser("reproduce", help="run every applicable variant and check orderings")
    p.add_argument("tag", choices=tuple(REPRODUCE_VARIANTS))
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--data", type=str, default="")
    _add_common(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "gen":
            out = _fresh_dir(args.out or ".")
            spec = tasks.TaskSpec(task=args.task, n=args.n, seed=args.seed or 0)
            ds = tasks.generate(spec)
            path = os.path.join(out, f"{args.task}.jsonl")
            save_dataset(ds, path)
            _write_json(os.path.join(out, f"{args.task}.manifest.json"), {
                "version": __version__,
                "task": args.task,
                "n": args.n,
                "seed": args.seed or 0,
                "samples": len(ds),
            })
            print(path)
            return 0
        if args.cmd == "import":
            out = _fresh_dir(args.out or ".")
            ds = tasks.load_multilabel(args.data, n_features=args.features,
                                       universe=args.universe)
            path = os.path.join(out, "imported.jsonl")
            save_dataset(ds, path)
            print(path)
            return 0
        if args.cmd == "train":
            cfg = _merged_config(args, required=("task", "variant"))
            dataset = load_dataset(args.dataset) if args.dataset else None
            out = args.out or "run"
            train_run(cfg, dataset=dataset, out=out)
            print(out)
            return 0
        if args.cmd == "eval":
            art = load_run(args.run)
            if args.threads:
                art.cfg = replace(art.cfg, threads=args.threads)
            out = args.out or os.path.join(args.run, "eval")
            report = eval_run(art, out=out, metric=args.metric)
            print(f"{report.metric}={report.aggregate:.6f}")
            return 0
        if args.cmd == "reproduce":
            out = args.out or f"reproduce-{args.tag}"
            _, ok = reproduce(args.tag, out, n=args.n, seed=args.seed or 7,
                              epochs=args.epochs, data=args.data,
                              threads=args.threads or 1)
            return 0 if ok else 3
        raise ValidationError(f"unknown command {args.cmd!r}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
