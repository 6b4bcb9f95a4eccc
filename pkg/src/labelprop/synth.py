"""Seeded Gaussian-cluster embeddings standing in for foundation-model output.

Each space gets its own class centers; listed class pairs are pulled toward
their midpoint in one space only, so different spaces confuse different
classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Mapping, Sequence

import numpy as np

from .rng import CENTERS, SAMPLES, make_rng
from .store import SPLIT_NAMES, ClassRegistry, EmbeddingRecord, EmbeddingStore, Space, StoreError

IMAGES_PER_GROUP = 8  # crops sharing one synthetic image_id


@dataclass(frozen=True)
class SyntheticConfig:
    seed: int = 0
    num_classes: int = 10
    dim: int = 32
    spaces: tuple[str, ...] = ("space_a", "space_b", "space_c")
    samples_per_class_per_split: Mapping[str, int] = field(
        default_factory=lambda: {"representative": 5, "train": 40, "validation": 40}
    )
    cluster_sigma: float = 0.1
    center_scale: float = 1.0
    confusion_pairs: Mapping[str, Sequence[tuple[int, int]]] = field(default_factory=dict)
    confusion_blend: float = 0.0
    class_names: Sequence[str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "spaces", tuple(self.spaces))
        object.__setattr__(
            self,
            "confusion_pairs",
            {str(s): tuple((int(a), int(b)) for a, b in pairs) for s, pairs in dict(self.confusion_pairs).items()},
        )
        self.validate()

    def validate(self) -> None:
        if not (0 <= self.seed < 2**64):
            raise StoreError("seed must be an unsigned 64-bit integer")
        if self.num_classes <= 0 or self.dim <= 0:
            raise StoreError("num_classes and dim must be positive")
        if not self.spaces or len(set(self.spaces)) != len(self.spaces):
            raise StoreError("spaces must be a non-empty list of distinct names")
        for split, n in self.samples_per_class_per_split.items():
            if split not in SPLIT_NAMES:
                raise StoreError(f"unknown split {split!r}")
            if int(n) <= 0:
                raise StoreError(f"samples for split {split!r} must be positive")
        if self.cluster_sigma <= 0 or self.center_scale <= 0:
            raise StoreError("cluster_sigma and center_scale must be positive")
        if not 0.0 <= self.confusion_blend <= 1.0:
            raise StoreError("confusion_blend must lie in [0, 1]")
        owner: dict[frozenset, str] = {}
        for space, pairs in self.confusion_pairs.items():
            if space not in self.spaces:
                raise StoreError(f"confusion pairs reference unknown space {space!r}")
            for a, b in pairs:
                if not (0 <= a < self.num_classes and 0 <= b < self.num_classes) or a == b:
                    raise StoreError(f"invalid confusion pair ({a}, {b})")
                key = frozenset((a, b))
                if key in owner:
                    raise StoreError(f"confusion pair ({a}, {b}) appears in both {owner[key]!r} and {space!r}")
                owner[key] = space
        if self.class_names is not None and len(self.class_names) != self.num_classes:
            raise StoreError("class_names length must equal num_classes")

    @classmethod
    def from_dict(cls, d: Mapping) -> "SyntheticConfig":
        d = dict(d)
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise StoreError(f"unknown synth key(s): {sorted(unknown)}")
        if "confusion_pairs" in d:
            d["confusion_pairs"] = {k: [tuple(p) for p in v] for k, v in d["confusion_pairs"].items()}
        if "spaces" in d:
            d["spaces"] = tuple(d["spaces"])
        return cls(**d)

    def registry(self) -> ClassRegistry:
        names = self.class_names or [f"class_{c:02d}" for c in range(self.num_classes)]
        return ClassRegistry.from_names(names)


def synth_centers(config: SyntheticConfig, blended: bool = True) -> dict[str, np.ndarray]:
    """Per-space ``C x dim`` class centers, after confusion blending if asked."""
    out = {}
    for si, space in enumerate(config.spaces):
        rng = make_rng(config.seed, CENTERS, si)
        mu = config.center_scale * rng.standard_normal((config.num_classes, config.dim))
        if blended:
            b = config.confusion_blend
            for c1, c2 in config.confusion_pairs.get(space, ()):
                mid = 0.5 * (mu[c1] + mu[c2])
                mu[c1] = (1.0 - b) * mu[c1] + b * mid
                mu[c2] = (1.0 - b) * mu[c2] + b * mid
        out[space] = mu
    return out


def synth_generate(config: SyntheticConfig) -> EmbeddingStore:
    registry = config.registry()
    centers = synth_centers(config)

    # crop ids are shared across spaces; split order is canonical
    crops: list[tuple[str, str, int]] = []
    for split in SPLIT_NAMES:
        n = int(config.samples_per_class_per_split.get(split, 0))
        for c in range(config.num_classes):
            for i in range(n):
                crops.append((f"{split[:3]}-{c:03d}-{i:04d}", split, c))

    spaces = {}
    for si, space in enumerate(config.spaces):
        rng = make_rng(config.seed, SAMPLES, si)
        noise = rng.standard_normal((len(crops), config.dim))
        labels = np.array([c for _, _, c in crops], dtype=np.int64)
        X = centers[space][labels] + config.cluster_sigma * noise
        recs = tuple(
            EmbeddingRecord(
                id=rid,
                space=space,
                vector=X[j],
                class_id=c,
                image_id=f"img-{split[:3]}-{j // IMAGES_PER_GROUP:05d}",
                complexity=registry.complexity_of(c),
            )
            for j, (rid, split, c) in enumerate(crops)
        )
        spaces[space] = Space(config.dim, recs)

    splits = {s: tuple(rid for rid, split, _ in crops if split == s) for s in SPLIT_NAMES}
    return EmbeddingStore(spaces, registry, splits)
