"""Annotation sets: images, proposals with opaque geometry, category registry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

from . import jsonio
from .rng import PERTURB, make_rng
from .store import ClassRegistry, Complexity, EmbeddingStore, parse_complexity

ANNOTATION_FORMAT = "annoset/1"
SYNTHETIC_IMAGE_SIZE = 224


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class Image:
    id: str
    width: int
    height: int

    def to_json(self) -> dict:
        return {"id": self.id, "width": self.width, "height": self.height}


@dataclass(frozen=True)
class Annotation:
    id: str
    image_id: str
    class_id: int | None = None
    confidence: float | None = None
    complexity: Complexity | None = None
    geometry: Any = None
    scores: tuple[float, ...] | None = None  # full class distribution, written by the labeler

    def to_json(self) -> dict:
        out: dict = {"id": self.id, "image_id": self.image_id}
        if self.class_id is not None:
            out["class_id"] = self.class_id
        if self.confidence is not None:
            out["confidence"] = self.confidence
        if self.complexity is not None:
            out["complexity"] = self.complexity.value
        out["geometry"] = self.geometry
        if self.scores is not None:
            out["scores"] = list(self.scores)
        return out


@dataclass(frozen=True)
class AnnotationSet:
    images: tuple[Image, ...]
    annotations: tuple[Annotation, ...]
    categories: ClassRegistry
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        image_ids = {im.id for im in self.images}
        if len(image_ids) != len(self.images):
            raise AnnotationError("duplicate image ids")
        seen = set()
        for a in self.annotations:
            if a.id in seen:
                raise AnnotationError(f"duplicate annotation id {a.id!r}")
            seen.add(a.id)
            if a.image_id not in image_ids:
                raise AnnotationError(f"annotation {a.id!r} references unknown image {a.image_id!r}")
            if a.class_id is not None and a.class_id not in self.categories:
                raise AnnotationError(f"annotation {a.id!r} has unknown class_id {a.class_id}")

    def by_id(self) -> dict[str, Annotation]:
        return {a.id: a for a in self.annotations}

    def with_annotations(self, annotations: Sequence[Annotation]) -> "AnnotationSet":
        return AnnotationSet(self.images, tuple(annotations), self.categories)

    def to_json(self) -> dict:
        return {
            "format": ANNOTATION_FORMAT,
            "images": [im.to_json() for im in self.images],
            "annotations": [a.to_json() for a in self.annotations],
            "categories": self.categories.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AnnotationSet":
        if obj.get("format") != ANNOTATION_FORMAT:
            raise AnnotationError(f"expected format {ANNOTATION_FORMAT!r}, got {obj.get('format')!r}")
        try:
            images = tuple(Image(str(im["id"]), int(im["width"]), int(im["height"])) for im in obj["images"])
            anns = tuple(
                Annotation(
                    id=str(a["id"]),
                    image_id=str(a["image_id"]),
                    class_id=a.get("class_id"),
                    confidence=a.get("confidence"),
                    complexity=parse_complexity(a["complexity"]) if a.get("complexity") is not None else None,
                    geometry=a.get("geometry"),
                    scores=tuple(a["scores"]) if a.get("scores") is not None else None,
                )
                for a in obj["annotations"]
            )
            categories = ClassRegistry.from_json(obj["categories"])
        except (KeyError, TypeError, ValueError) as exc:
            raise AnnotationError(f"malformed annotation set: {exc}") from None
        return cls(images, anns, categories)


def save_annotations(annset: AnnotationSet, path) -> None:
    jsonio.write_json(path, annset.to_json())


def load_annotations(path) -> AnnotationSet:
    return AnnotationSet.from_json(jsonio.read_json(path))


def annotations_from_store(store: EmbeddingStore, split: str, with_labels: bool = True) -> AnnotationSet:
    """One annotation per crop of ``split``; ground truth or class-free proposals.

    Crop geometry is out of scope, so each annotation carries a placeholder
    geometry that only names its crop.
    """
    first_space = next(iter(store.spaces))
    recs = store.records(first_space, split)
    images: dict[str, Image] = {}
    anns = []
    for r in recs:
        image_id = r.image_id or f"img-{r.id}"
        images.setdefault(image_id, Image(image_id, SYNTHETIC_IMAGE_SIZE, SYNTHETIC_IMAGE_SIZE))
        complexity = r.complexity
        if complexity is None and r.class_id is not None:
            complexity = store.registry.complexity_of(r.class_id)
        anns.append(
            Annotation(
                id=r.id,
                image_id=image_id,
                class_id=r.class_id if with_labels else None,
                complexity=complexity if with_labels else None,
                geometry={"type": "crop", "ref": r.id},
            )
        )
    return AnnotationSet(tuple(images.values()), tuple(anns), store.registry)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def perturb_proposals(
    annotations: AnnotationSet, drop_rate: float, seed: int, relabel_noise: float = 0.0
) -> AnnotationSet:
    """Drop ``round(drop_rate * n)`` proposals uniformly at random.

    Dropped proposals are a prefix of one seeded permutation, so for a fixed
    seed a higher rate always drops a superset.  ``relabel_noise`` optionally
    moves that fraction of the surviving labeled annotations to a different
    class.  Images are never removed.
    """
    if not 0.0 <= drop_rate <= 1.0:
        raise AnnotationError("drop_rate must lie in [0, 1]")
    if not 0.0 <= relabel_noise <= 1.0:
        raise AnnotationError("relabel_noise must lie in [0, 1]")
    anns = list(annotations.annotations)
    n = len(anns)
    perm = make_rng(seed, PERTURB, 0).permutation(n)
    dropped = set(perm[: _round_half_up(drop_rate * n)].tolist())
    kept = [a for i, a in enumerate(anns) if i not in dropped]

    C = len(annotations.categories)
    if relabel_noise > 0 and C > 1:
        labeled = [i for i, a in enumerate(kept) if a.class_id is not None]
        rng = make_rng(seed, PERTURB, 1)
        k = _round_half_up(relabel_noise * len(labeled))
        for j in rng.permutation(len(labeled))[:k]:
            a = kept[labeled[j]]
            shift = int(rng.integers(1, C))
            kept[labeled[j]] = replace(a, class_id=(a.class_id + shift) % C, scores=None)
    return annotations.with_annotations(kept)
