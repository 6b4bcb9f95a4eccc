"""Annotation-time accounting: objects taken over by the labeler and time saved."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .metrics import Prediction
from .store import COMPLEXITIES, Complexity, parse_complexity

# seconds per object, measured per shape-complexity class
DEFAULT_SECONDS = {Complexity.SIMPLE: 2.27, Complexity.MEDIUM: 2.44, Complexity.COMPLEX: 2.82}


@dataclass(frozen=True)
class TimeModel:
    per_object_seconds: Mapping[Complexity, float] = field(default_factory=lambda: dict(DEFAULT_SECONDS))

    def __post_init__(self):
        secs = {parse_complexity(k): float(v) for k, v in self.per_object_seconds.items()}
        missing = [c.value for c in COMPLEXITIES if c not in secs]
        if missing:
            raise ValueError(f"time model lacks complexity class(es) {missing}")
        if any(not v > 0 for v in secs.values()):
            raise ValueError("per-object times must be positive")
        object.__setattr__(self, "per_object_seconds", secs)

    def __getitem__(self, c: Complexity) -> float:
        return self.per_object_seconds[c]


@dataclass(frozen=True)
class RetrievalCounts:
    """Per complexity: (objects auto-labeled correctly, objects in ground truth)."""

    counts: Mapping[Complexity, tuple[int, int]]

    def __post_init__(self):
        counts = {}
        for k, (r, g) in self.counts.items():
            c = parse_complexity(k)
            r, g = int(r), int(g)
            if r < 0 or g < 0:
                raise ValueError("counts must be non-negative")
            if r > g:
                raise ValueError(f"{c.value}: retrieved {r} exceeds ground-truth total {g}")
            counts[c] = (r, g)
        for c in COMPLEXITIES:
            counts.setdefault(c, (0, 0))
        object.__setattr__(self, "counts", {c: counts[c] for c in COMPLEXITIES})

    def retrieved(self, c: Complexity) -> int:
        return self.counts[c][0]

    def ground_truth(self, c: Complexity) -> int:
        return self.counts[c][1]

    def to_json(self) -> dict:
        return {c.value: {"retrieved": r, "ground_truth": g} for c, (r, g) in self.counts.items()}

    @classmethod
    def from_json(cls, obj: Mapping) -> "RetrievalCounts":
        return cls({k: (v["retrieved"], v["ground_truth"]) for k, v in obj.items()})


@dataclass(frozen=True)
class SavingsReport:
    saved: Mapping[Complexity, float]
    gt_time: Mapping[Complexity, float]
    counts: RetrievalCounts

    @property
    def total_saved(self) -> float:
        return math.fsum(self.saved.values())

    @property
    def total_gt(self) -> float:
        return math.fsum(self.gt_time.values())

    @property
    def percent_saved(self) -> float:
        return 100.0 * self.total_saved / self.total_gt if self.total_gt else 0.0

    def to_json(self) -> dict:
        return {
            "counts": self.counts.to_json(),
            "time_saved_seconds": {c.value: v for c, v in self.saved.items()},
            "gt_time_seconds": {c.value: v for c, v in self.gt_time.items()},
            "total_saved_seconds": self.total_saved,
            "total_gt_seconds": self.total_gt,
            "percent_saved": self.percent_saved,
        }


def count_retrieved(preds: Iterable[Prediction], unmatched: Iterable[Complexity] = ()) -> RetrievalCounts:
    """Correct predictions per complexity; ``unmatched`` adds ground-truth objects that got no prediction."""
    tally = {c: [0, 0] for c in COMPLEXITIES}
    for p in preds:
        if p.complexity is None:
            raise ValueError(f"prediction {p.record_id!r} has no complexity tag")
        tally[p.complexity][1] += 1
        if p.correct:
            tally[p.complexity][0] += 1
    for c in unmatched:
        tally[parse_complexity(c)][1] += 1
    return RetrievalCounts({c: tuple(v) for c, v in tally.items()})


def compute_savings(counts: RetrievalCounts, tm: TimeModel | None = None) -> SavingsReport:
    tm = tm or TimeModel()
    return SavingsReport(
        saved={c: counts.retrieved(c) * tm[c] for c in COMPLEXITIES},
        gt_time={c: counts.ground_truth(c) * tm[c] for c in COMPLEXITIES},
        counts=counts,
    )


def format_hms(seconds: float) -> str:
    """``H:MM:SS`` with fractional seconds truncated."""
    if seconds < 0:
        raise ValueError("negative duration")
    s = int(seconds)
    return f"{s // 3600}:{s % 3600 // 60:02d}:{s % 60:02d}"


def parse_hms(text: str) -> int:
    h, m, s = (int(x) for x in text.split(":"))
    return 3600 * h + 60 * m + s


def savings_cells(report: SavingsReport) -> list[str]:
    """Table cells in column order: retrieved (of GT) per class, time saved (of GT) per class, total, % saved."""
    cells = [f"{report.counts.retrieved(c)} ({report.counts.ground_truth(c)})" for c in COMPLEXITIES]
    cells += [f"{format_hms(report.saved[c])} ({format_hms(report.gt_time[c])})" for c in COMPLEXITIES]
    cells.append(f"{format_hms(report.total_saved)} ({format_hms(report.total_gt)})")
    cells.append(f"{report.percent_saved:.1f}%")
    return cells


def render_savings_table(rows: Mapping[str, SavingsReport]) -> str:
    cols = ["Dataset", "Simple", "Medium", "Complex", "Simple", "Medium", "Complex", "Total", "% Saved"]
    body = [[label] + savings_cells(r) for label, r in rows.items()]
    widths = [max(len(x) for x in col) for col in zip(cols, *body)]

    def fmt(cells):
        return "  ".join(v.ljust(w) if i == 0 else v.rjust(w) for i, (v, w) in enumerate(zip(cells, widths)))

    retrieved_w = sum(widths[1:4]) + 4
    banner = " " * (widths[0] + 2) + "Objects Retrieved (of GT)".ljust(retrieved_w + 2) + "Time Saved (of GT)"
    head = fmt(cols)
    return "\n".join([banner, head, "-" * len(head)] + [fmt(b) for b in body])


def render_savings(report: SavingsReport, label: str = "-") -> str:
    return render_savings_table({label: report})
