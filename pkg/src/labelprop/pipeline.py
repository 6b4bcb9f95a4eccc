"""End-to-end orchestration: synth -> train -> label -> eval.

Every step reads and writes plain files so a human can edit annotations in
between (the revision stage) and re-run ``eval``.
"""

from __future__ import annotations

import hashlib
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping

import numpy as np

from . import jsonio
from .annotations import (
    Annotation,
    AnnotationError,
    AnnotationSet,
    annotations_from_store,
    perturb_proposals,
    save_annotations,
)
from .ensemble import EnsemblePredictor, ensemble_scores, load_ensemble, save_manifest
from .hopfield import Hyperparams, init_head, save_head
from .metrics import EvalReport, Prediction, evaluate, render_complexity_table, render_table
from .savings import RetrievalCounts, SavingsReport, TimeModel, compute_savings, count_retrieved, render_savings_table
from .scores import ScoreVector
from .store import EmbeddingStore, StoreError, load_store, save_store, split_assign
from .synth import SyntheticConfig, synth_generate
from .training import TrainReport, train_head

log = logging.getLogger(__name__)

MANIFEST_NAME = "ensemble.json"


class PipelineError(ValueError):
    pass


@dataclass
class PipelineConfig:
    seed: int = 0
    store: str = "out/store.jsonl"
    heads: str = "out/heads"
    output: str = "out"
    spaces: list[str] | None = None
    synth: dict = field(default_factory=dict)
    split_fractions: dict | None = None
    head: dict = field(default_factory=lambda: {"p": 16, "m": 4, "beta": None})
    hyperparams: dict = field(default_factory=dict)
    head_hyperparams: dict = field(default_factory=dict)
    ensemble: bool = True
    label_split: str = "validation"
    drop_rate: float = 0.0
    relabel_noise: float = 0.0
    time_model: dict | None = None
    workers: int = 1

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PipelineConfig":
        d = dict(d)
        paths = d.pop("paths", {}) or {}
        perturb = d.pop("perturb", {}) or {}
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise PipelineError(f"unknown config key(s): {sorted(unknown)}")
        for key in ("store", "heads", "output"):
            if key in paths:
                d[key] = paths[key]
        if "drop_rate" in perturb:
            d["drop_rate"] = perturb["drop_rate"]
        if "relabel_noise" in perturb:
            d["relabel_noise"] = perturb["relabel_noise"]
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(jsonio.read_json(path))

    def validate(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise PipelineError("seed must be an unsigned 64-bit integer")
        if not 0.0 <= self.drop_rate <= 1.0 or not 0.0 <= self.relabel_noise <= 1.0:
            raise PipelineError("perturbation rates must lie in [0, 1]")
        if self.workers < 1:
            raise PipelineError("workers must be positive")

    def override(self, **kw) -> "PipelineConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        cfg.validate()
        return cfg

    def synth_config(self) -> SyntheticConfig:
        return SyntheticConfig.from_dict({**self.synth, "seed": self.synth.get("seed", self.seed)})

    def hyperparams_for(self, space: str) -> Hyperparams:
        merged = {"seed": self.seed, **self.hyperparams, **self.head_hyperparams.get(space, {})}
        unknown = set(merged) - {f.name for f in fields(Hyperparams)}
        if unknown:
            raise PipelineError(f"unknown hyperparameter(s): {sorted(unknown)}")
        return Hyperparams(**merged)

    def resolve_spaces(self, store: EmbeddingStore) -> list[str]:
        spaces = list(self.spaces) if self.spaces else list(store.spaces)
        missing = [s for s in spaces if s not in store.spaces]
        if missing:
            raise PipelineError(f"configured space(s) {missing} not in store")
        return spaces

    def path(self, *parts: str) -> str:
        return os.path.join(self.output, *parts)


def file_sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _ensure_parent(path) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


# ------------------------------------------------------------------ synth


def cmd_synth(cfg: PipelineConfig) -> dict:
    store = synth_generate(cfg.synth_config())
    if cfg.split_fractions is not None:
        store = split_assign(store, cfg.split_fractions, cfg.seed)
    _ensure_parent(cfg.store)
    save_store(store, cfg.store)
    return {"store": cfg.store, "sha256": file_sha256(cfg.store), **store.summary()}


# ------------------------------------------------------------------ train


def _train_one(store: EmbeddingStore, space: str, cfg: PipelineConfig):
    hp = cfg.hyperparams_for(space)
    head = init_head(
        store, space, p=int(cfg.head.get("p", 16)), m=int(cfg.head.get("m", 4)), beta=cfg.head.get("beta"), seed=hp.seed
    )
    return train_head(head, store, "train", hp)


def cmd_train(cfg: PipelineConfig, store: EmbeddingStore | None = None) -> dict[str, TrainReport]:
    store = store if store is not None else load_store(cfg.store)
    spaces = cfg.resolve_spaces(store)
    for split in ("representative", "train"):
        if not store.splits[split]:
            raise PipelineError(f"store has an empty {split!r} split")
    # heads share no state, so spaces may train concurrently; results are merged by space name
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = {s: pool.submit(_train_one, store, s, cfg) for s in spaces}
        results = {s: futures[s].result() for s in sorted(spaces)}
    os.makedirs(cfg.heads, exist_ok=True)
    head_paths = {}
    reports = {}
    for space, (head, report) in results.items():
        name = f"{space}.json"
        save_head(head, os.path.join(cfg.heads, name))
        jsonio.write_json(os.path.join(cfg.heads, f"{space}.report.json"), report.to_json())
        log.info("trained %s: final acc %.3f loss %.5f in %.2fs", space, report.final.accuracy, report.final.total, report.wall_time)
        head_paths[space] = name
        reports[space] = report
    save_manifest(os.path.join(cfg.heads, MANIFEST_NAME), head_paths, store.registry)
    return reports


# ------------------------------------------------------------------ label


def _record_index(store: EmbeddingStore, space: str) -> dict[str, np.ndarray]:
    return {r.id: r.vector for r in store.records(space)}


def label_annotations(ens: EnsemblePredictor, proposals: AnnotationSet, store: EmbeddingStore) -> AnnotationSet:
    """Fill class_id, confidence and the full score vector for every proposal."""
    if not proposals.annotations:
        return proposals
    queries = {}
    for space in ens.spaces:
        index = _record_index(store, space)
        missing = [a.id for a in proposals.annotations if a.id not in index]
        if missing:
            raise PipelineError(f"proposal(s) without an embedding in space {space!r}: {missing[:5]}")
        queries[space] = np.stack([index[a.id] for a in proposals.annotations])
    S = ensemble_scores(ens, queries)
    out = []
    for a, row in zip(proposals.annotations, S):
        sv = ScoreVector(row)
        out.append(replace(a, class_id=sv.predicted, confidence=sv.confidence, scores=tuple(row.tolist())))
    return proposals.with_annotations(out)


def cmd_label(cfg: PipelineConfig, proposals: AnnotationSet | None = None, store: EmbeddingStore | None = None,
              out_path: str | None = None) -> AnnotationSet:
    store = store if store is not None else load_store(cfg.store)
    if proposals is None:
        proposals = annotations_from_store(store, cfg.label_split, with_labels=False)
    spaces = cfg.resolve_spaces(store)
    if not cfg.ensemble:
        spaces = spaces[:1]
    ens = load_ensemble(os.path.join(cfg.heads, MANIFEST_NAME), store.registry, spaces)
    labeled = label_annotations(ens, proposals, store)
    out_path = out_path or cfg.path("labeled.json")
    _ensure_parent(out_path)
    save_annotations(labeled, out_path)
    return labeled


# ---------------------------------------------------------------- perturb


def cmd_perturb(cfg: PipelineConfig, annotations: AnnotationSet | None = None, store: EmbeddingStore | None = None,
                out_path: str | None = None) -> AnnotationSet:
    if annotations is None:
        store = store if store is not None else load_store(cfg.store)
        annotations = annotations_from_store(store, cfg.label_split, with_labels=False)
    result = perturb_proposals(annotations, cfg.drop_rate, cfg.seed, cfg.relabel_noise)
    out_path = out_path or cfg.path("proposals.json")
    _ensure_parent(out_path)
    save_annotations(result, out_path)
    return result


# ------------------------------------------------------------------- eval


def _scores_of(a: Annotation, num_classes: int) -> np.ndarray:
    if a.scores is not None:
        s = np.array(a.scores, dtype=np.float64)
        if s.shape != (num_classes,):
            raise PipelineError(f"annotation {a.id!r} has {s.shape[0]} scores, expected {num_classes}")
        return s
    # no distribution stored: spread the remaining mass evenly
    conf = 1.0 if a.confidence is None else float(a.confidence)
    s = np.full(num_classes, (1.0 - conf) / max(num_classes - 1, 1))
    s[a.class_id] = conf
    return s


def join_predictions(labeled: AnnotationSet, truth: AnnotationSet) -> tuple[list[Prediction], list]:
    """Predictions for labeled annotations plus the complexity of every unmatched truth."""
    registry = truth.categories
    if labeled.categories.checksum() != registry.checksum():
        raise PipelineError("labeled and truth annotation sets use different categories")
    truths = truth.by_id()
    unknown = [a.id for a in labeled.annotations if a.id not in truths]
    if unknown:
        raise PipelineError(f"labeled annotation(s) missing from truth: {unknown[:5]}")
    unlabeled = [a.id for a in labeled.annotations if a.class_id is None]
    if unlabeled:
        raise PipelineError(f"annotation(s) without a predicted class: {unlabeled[:5]}")
    no_truth = [t.id for t in truth.annotations if t.class_id is None]
    if no_truth:
        raise PipelineError(f"truth annotation(s) without class_id: {no_truth[:5]}")
    C = len(registry)
    preds = []
    for a in labeled.annotations:
        t = truths[a.id]
        complexity = t.complexity or registry.complexity_of(t.class_id)
        preds.append(Prediction(a.id, ScoreVector(_scores_of(a, C)), int(t.class_id), complexity))
    matched = {a.id for a in labeled.annotations}
    unmatched = [t.complexity or registry.complexity_of(t.class_id) for t in truth.annotations if t.id not in matched]
    return preds, unmatched


@dataclass
class EvalOutputs:
    report: EvalReport | None
    savings: SavingsReport
    text: str


def cmd_eval(cfg: PipelineConfig, labeled: AnnotationSet, truth: AnnotationSet, label: str = "Ensemble") -> EvalOutputs:
    preds, unmatched = join_predictions(labeled, truth)
    report = evaluate(preds, truth.categories) if preds else None
    counts: RetrievalCounts = count_retrieved(preds, unmatched)
    tm = TimeModel(cfg.time_model) if cfg.time_model else TimeModel()
    savings = compute_savings(counts, tm)
    parts = []
    if report is not None:
        parts += [render_table({label: report}), "", render_complexity_table({label: report}), ""]
    else:
        parts += ["no matched predictions", ""]
    parts.append(render_savings_table({label: savings}))
    text = "\n".join(parts) + "\n"
    os.makedirs(cfg.output, exist_ok=True)
    jsonio.write_json(cfg.path("eval.json"), {"eval": report.to_json() if report else None, "unmatched_truth": len(unmatched)})
    jsonio.write_json(cfg.path("savings.json"), savings.to_json())
    with open(cfg.path("report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    return EvalOutputs(report, savings, text)


# --------------------------------------------------------- report-savings


def cmd_report_savings(rows: Mapping[str, RetrievalCounts], tm: TimeModel | None = None,
                       out_path: str | None = None) -> tuple[dict[str, SavingsReport], str]:
    reports = {name: compute_savings(c, tm) for name, c in rows.items()}
    text = render_savings_table(reports) + "\n"
    if out_path:
        _ensure_parent(out_path)
        jsonio.write_json(out_path, {name: r.to_json() for name, r in reports.items()})
    return reports, text


def load_counts(path) -> dict[str, RetrievalCounts]:
    """Counts file: ``{"<row label>": {"Simple": {"retrieved": r, "ground_truth": g}, ...}, ...}``."""
    obj = jsonio.read_json(path)
    if not isinstance(obj, dict) or not obj:
        raise PipelineError(f"{path}: expected a non-empty object of rows")
    if set(obj) <= {"Simple", "Medium", "Complex"}:
        obj = {"-": obj}
    return {name: RetrievalCounts.from_json(v) for name, v in obj.items()}


def run_all(cfg: PipelineConfig) -> EvalOutputs:
    """synth -> train -> perturb -> label -> eval with the files under ``cfg.output``."""
    cmd_synth(cfg)
    store = load_store(cfg.store)
    cmd_train(cfg, store)
    proposals = cmd_perturb(cfg, store=store)
    labeled = cmd_label(cfg, proposals, store)
    truth = annotations_from_store(store, cfg.label_split, with_labels=True)
    return cmd_eval(cfg, labeled, truth)


__all__ = [
    "PipelineConfig",
    "PipelineError",
    "cmd_synth",
    "cmd_train",
    "cmd_label",
    "cmd_perturb",
    "cmd_eval",
    "cmd_report_savings",
    "label_annotations",
    "join_predictions",
    "load_counts",
    "run_all",
    "AnnotationError",
    "StoreError",
]
