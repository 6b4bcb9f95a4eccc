"""Untrained mean-of-scores ensemble over per-space heads."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import jsonio
from .hopfield import HopfieldHead, forward_scores, load_head
from .scores import ScoreVector, stable_mean
from .store import ClassRegistry

MANIFEST_FORMAT = "ensemble/1"


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True)
class EnsemblePredictor:
    heads: tuple[HopfieldHead, ...]
    registry: ClassRegistry

    def __post_init__(self):
        heads = tuple(self.heads)
        if not heads:
            raise EnsembleError("ensemble needs at least one head")
        spaces = [h.space for h in heads]
        if len(set(spaces)) != len(spaces):
            raise EnsembleError(f"duplicate spaces in ensemble: {spaces}")
        for h in heads:
            if h.num_classes != len(self.registry):
                raise EnsembleError(
                    f"head {h.space!r} has {h.num_classes} classes, registry has {len(self.registry)}"
                )
        # canonical order keeps the floating-point sum independent of list order
        object.__setattr__(self, "heads", tuple(sorted(heads, key=lambda h: h.space)))

    @property
    def spaces(self) -> list[str]:
        return [h.space for h in self.heads]


def ensemble_scores(ens: EnsemblePredictor, queries: Mapping[str, np.ndarray]) -> np.ndarray:
    """``N x C`` mean of the heads' score matrices."""
    per_head = []
    for h in ens.heads:
        if h.space not in queries:
            raise EnsembleError(f"missing query embedding for space {h.space!r}")
        X = np.atleast_2d(np.asarray(queries[h.space], dtype=np.float64))
        if X.shape[1] != h.d:
            raise EnsembleError(f"space {h.space!r}: query width {X.shape[1]} does not match head dimension {h.d}")
        per_head.append(forward_scores(h, X))
    if len({s.shape[0] for s in per_head}) != 1:
        raise EnsembleError("spaces were given different numbers of queries")
    return stable_mean(np.stack(per_head))


def ensemble_predict(ens: EnsemblePredictor, queries: Mapping[str, np.ndarray]) -> ScoreVector:
    for space, q in queries.items():
        if np.asarray(q).ndim != 1:
            raise EnsembleError(f"space {space!r}: expected a single vector")
    return ScoreVector(ensemble_scores(ens, queries)[0])


def save_manifest(path, head_paths: Mapping[str, str], registry: ClassRegistry) -> None:
    jsonio.write_json(
        path,
        {
            "format": MANIFEST_FORMAT,
            "registry_checksum": registry.checksum(),
            "heads": [{"space": s, "path": head_paths[s]} for s in sorted(head_paths)],
        },
    )


def load_ensemble(path, registry: ClassRegistry, spaces: Sequence[str] | None = None) -> EnsemblePredictor:
    """Load the heads listed in a manifest; relative head paths resolve against the manifest."""
    obj = jsonio.read_json(path)
    if obj.get("format") != MANIFEST_FORMAT:
        raise EnsembleError(f"{path}: expected format {MANIFEST_FORMAT!r}")
    if obj.get("registry_checksum") != registry.checksum():
        raise EnsembleError(f"{path}: registry checksum does not match the store's class registry")
    base = os.path.dirname(os.path.abspath(path))
    heads = []
    for entry in obj["heads"]:
        if spaces is not None and entry["space"] not in spaces:
            continue
        head = load_head(os.path.join(base, entry["path"]))
        if head.space != entry["space"]:
            raise EnsembleError(f"{entry['path']}: head space {head.space!r} != manifest entry {entry['space']!r}")
        heads.append(head)
    if spaces is not None:
        missing = set(spaces) - {h.space for h in heads}
        if missing:
            raise EnsembleError(f"manifest has no head for space(s) {sorted(missing)}")
    return EnsemblePredictor(tuple(heads), registry)
