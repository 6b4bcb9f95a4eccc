"""Crop-level classification metrics: accuracy, P/R/F1, AP and mAP."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .scores import ScoreVector
from .store import COMPLEXITIES, ClassRegistry, Complexity, StoreError


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Prediction:
    record_id: str
    scores: ScoreVector
    truth: int
    complexity: Complexity | None = None

    @property
    def predicted(self) -> int:
        return self.scores.predicted

    @property
    def correct(self) -> bool:
        return self.predicted == self.truth


def average_precision(ranked: Iterable[tuple[float, bool]]) -> float:
    """Non-interpolated AP of a scored list with binary relevance.

    Items are ranked by descending score; equal scores keep their input
    order.  AP is the sum of precision@k over the ranks k of relevant items,
    divided by the number of relevant items.
    """
    items = list(ranked)
    scores = np.array([s for s, _ in items], dtype=np.float64)
    rel = np.array([bool(r) for _, r in items], dtype=bool)
    n_rel = int(rel.sum())
    if n_rel == 0:
        raise EvaluationError("average precision needs at least one relevant item")
    order = np.argsort(-scores, kind="stable")
    rel = rel[order]
    hits = np.cumsum(rel)
    ranks = np.arange(1, len(rel) + 1)
    return math.fsum((hits[rel] / ranks[rel]).tolist()) / n_rel


@dataclass
class EvalReport:
    n: int
    correct: int
    accuracy: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class: dict[int, dict] = field(default_factory=dict)
    per_class_ap: dict[int, float] = field(default_factory=dict)
    map: float = float("nan")
    excluded_classes: list[int] = field(default_factory=list)  # zero support
    stratified: dict[str, "EvalReport"] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "micro": {"precision": self.micro_precision, "recall": self.micro_recall, "f1": self.micro_f1},
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall, "f1": self.macro_f1},
            "map": None if math.isnan(self.map) else self.map,
            "per_class": {str(c): v for c, v in self.per_class.items()},
            "per_class_ap": {str(c): v for c, v in self.per_class_ap.items()},
            "excluded_classes": self.excluded_classes,
            "stratified": {k: v.to_json() for k, v in self.stratified.items()},
        }


def _safe_div(a: float, b: float) -> float:
    return a / b if b else 0.0


def _evaluate_flat(preds: Sequence[Prediction], num_classes: int) -> EvalReport:
    n = len(preds)
    truth = np.array([p.truth for p in preds])
    pred = np.array([p.predicted for p in preds])
    S = np.stack([p.scores.scores for p in preds])
    if S.shape[1] != num_classes:
        raise EvaluationError(f"score vectors have {S.shape[1]} entries, registry has {num_classes} classes")
    if truth.min() < 0 or truth.max() >= num_classes:
        raise EvaluationError("truth class id outside the registry")
    correct = int((truth == pred).sum())
    fp = fn = n - correct  # single-label closed set: every miss is one FP and one FN

    per_class: dict[int, dict] = {}
    per_class_ap: dict[int, float] = {}
    excluded = []
    for c in range(num_classes):
        support = int((truth == c).sum())
        if support == 0:
            excluded.append(c)
            continue
        tp_c = int(((truth == c) & (pred == c)).sum())
        predicted_c = int((pred == c).sum())
        prec = _safe_div(tp_c, predicted_c)
        rec = tp_c / support
        f1 = _safe_div(2 * tp_c, predicted_c + support)
        per_class[c] = {"support": support, "precision": prec, "recall": rec, "f1": f1}
        per_class_ap[c] = average_precision(zip(S[:, c].tolist(), (truth == c).tolist()))

    def macro(key):
        return float(np.mean([v[key] for v in per_class.values()]))

    return EvalReport(
        n=n,
        correct=correct,
        accuracy=correct / n,
        micro_precision=correct / (correct + fp),
        micro_recall=correct / (correct + fn),
        micro_f1=(2 * correct) / (2 * correct + fp + fn),
        macro_precision=macro("precision"),
        macro_recall=macro("recall"),
        macro_f1=macro("f1"),
        per_class=per_class,
        per_class_ap=per_class_ap,
        map=float(np.mean(list(per_class_ap.values()))),
        excluded_classes=excluded,
    )


def evaluate(preds: Sequence[Prediction], registry: ClassRegistry, stratified: bool = True) -> EvalReport:
    """Metrics over ``preds``; when tags are present, also one report per complexity."""
    if not preds:
        raise EvaluationError("empty prediction list")
    report = _evaluate_flat(preds, len(registry))
    if stratified and all(p.complexity is not None for p in preds):
        report.stratified = {c.value: _evaluate_flat(b, len(registry)) for c, b in stratify(preds).items()}
    return report


def stratify(preds: Sequence[Prediction]) -> dict[Complexity, list[Prediction]]:
    buckets: dict[Complexity, list[Prediction]] = {}
    for p in preds:
        if p.complexity is None:
            raise EvaluationError(f"prediction {p.record_id!r} has no complexity tag")
        buckets.setdefault(p.complexity, []).append(p)
    return {c: buckets[c] for c in COMPLEXITIES if c in buckets}


def predictions_from_scores(
    record_ids: Sequence[str], scores: np.ndarray, truths: Sequence[int], registry: ClassRegistry
) -> list[Prediction]:
    """Wrap an ``N x C`` score matrix; complexity comes from the truth class."""
    if len(record_ids) != scores.shape[0] or len(truths) != scores.shape[0]:
        raise EvaluationError("ids, scores and truths must have matching lengths")
    out = []
    for rid, row, t in zip(record_ids, scores, truths):
        if t not in registry:
            raise StoreError(f"record {rid!r}: truth {t} not in registry")
        out.append(Prediction(rid, ScoreVector(row), int(t), registry.complexity_of(int(t))))
    return out


# ------------------------------------------------------------- rendering


def render_table(rows: dict[str, EvalReport]) -> str:
    """Model-by-metric table: mAP, accuracy, then macro and micro P/R/F1."""
    header = f"{'Model':<12}{'mAP':>8}{'Acc':>8}{'P':>8}{'R':>8}{'F1':>8}{'P(mi)':>8}{'R(mi)':>8}{'F1(mi)':>8}"
    lines = [header, "-" * len(header)]
    for name, r in rows.items():
        lines.append(
            f"{name:<12}{r.map:>8.3f}{r.accuracy:>8.3f}{r.macro_precision:>8.3f}{r.macro_recall:>8.3f}"
            f"{r.macro_f1:>8.3f}{r.micro_precision:>8.3f}{r.micro_recall:>8.3f}{r.micro_f1:>8.3f}"
        )
    return "\n".join(lines)


def render_complexity_table(rows: dict[str, EvalReport]) -> str:
    """mAP per complexity stratum plus the unstratified value, one row per model."""
    header = f"{'Model':<12}{'S':>8}{'M':>8}{'C':>8}{'All':>8}"
    lines = [header, "-" * len(header)]
    for name, r in rows.items():
        cells = []
        for c in COMPLEXITIES:
            sub = r.stratified.get(c.value)
            cells.append(f"{sub.map:>8.3f}" if sub is not None else f"{'-':>8}")
        lines.append(f"{name:<12}{''.join(cells)}{r.map:>8.3f}")
    return "\n".join(lines)
