from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Per-class confidences for one query, indexed by class id."""

    scores: np.ndarray

    def __post_init__(self):
        s = np.array(self.scores, dtype=np.float64)
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    @property
    def predicted(self) -> int:
        # np.argmax returns the first maximum: ties go to the lowest class id
        return int(np.argmax(self.scores))

    @property
    def confidence(self) -> float:
        return float(self.scores[self.predicted])

    def __len__(self) -> int:
        return len(self.scores)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScoreVector):
            return NotImplemented
        return self.scores.shape == other.scores.shape and np.array_equal(self.scores, other.scores)

    __hash__ = None


def stable_mean(stack: np.ndarray) -> np.ndarray:
    """Mean over axis 0 that returns the common value exactly when all slices agree."""
    first = stack[0]
    if stack.shape[0] == 1:
        return first.copy()
    return first + (stack[1:] - first).sum(axis=0) / stack.shape[0]
