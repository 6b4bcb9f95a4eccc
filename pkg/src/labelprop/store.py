"""Embedding store: class registry, per-space records, splits and file I/O."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import jsonio
from .rng import SPLITS, make_rng

STORE_FORMAT = "embstore/1"
SPLIT_NAMES = ("representative", "train", "validation")


class StoreError(ValueError):
    pass


class Complexity(str, Enum):
    SIMPLE = "Simple"
    MEDIUM = "Medium"
    COMPLEX = "Complex"

    def __str__(self) -> str:
        return self.value


COMPLEXITIES = (Complexity.SIMPLE, Complexity.MEDIUM, Complexity.COMPLEX)


def parse_complexity(value) -> Complexity:
    try:
        return Complexity(value)
    except ValueError:
        raise StoreError(f"unknown complexity {value!r}") from None


@dataclass(frozen=True)
class ClassInfo:
    id: int
    name: str
    complexity: Complexity


@dataclass(frozen=True)
class ClassRegistry:
    """Canonical, ordered class list shared by every head and space."""

    classes: tuple[ClassInfo, ...]

    def __post_init__(self):
        if not self.classes:
            raise StoreError("registry is empty")
        names = set()
        for i, info in enumerate(self.classes):
            if info.id != i:
                raise StoreError(f"class ids must be contiguous from 0; position {i} has id {info.id}")
            if not info.name:
                raise StoreError(f"class {i} has an empty name")
            if info.name in names:
                raise StoreError(f"duplicate class name {info.name!r}")
            names.add(info.name)

    @classmethod
    def from_names(cls, names: Sequence[str], complexities: Sequence | None = None) -> "ClassRegistry":
        if complexities is None:
            complexities = [COMPLEXITIES[i % 3] for i in range(len(names))]
        return cls(tuple(ClassInfo(i, n, parse_complexity(c)) for i, (n, c) in enumerate(zip(names, complexities))))

    def __len__(self) -> int:
        return len(self.classes)

    def __contains__(self, class_id) -> bool:
        return isinstance(class_id, (int, np.integer)) and 0 <= class_id < len(self.classes)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.classes]

    def id_of(self, name: str) -> int:
        for c in self.classes:
            if c.name == name:
                return c.id
        raise StoreError(f"unknown class name {name!r}")

    def complexity_of(self, class_id: int) -> Complexity:
        return self.classes[class_id].complexity

    def to_json(self) -> list[dict]:
        return [{"id": c.id, "name": c.name, "complexity": c.complexity.value} for c in self.classes]

    @classmethod
    def from_json(cls, items: Iterable[Mapping]) -> "ClassRegistry":
        try:
            return cls(tuple(ClassInfo(int(it["id"]), str(it["name"]), parse_complexity(it["complexity"])) for it in items))
        except (KeyError, TypeError) as exc:
            raise StoreError(f"malformed registry entry: {exc}") from None

    def checksum(self) -> str:
        return hashlib.sha256(jsonio.dumps(self.to_json()).encode()).hexdigest()

    def permuted(self, order: Sequence[int]) -> "ClassRegistry":
        """Registry whose class ``i`` is the old class ``order[i]``."""
        return ClassRegistry(
            tuple(ClassInfo(i, self.classes[j].name, self.classes[j].complexity) for i, j in enumerate(order))
        )


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    id: str
    space: str
    vector: np.ndarray
    class_id: int | None = None
    image_id: str | None = None
    complexity: Complexity | None = None

    def __post_init__(self):
        v = np.array(self.vector, dtype=np.float64)
        if v.ndim != 1:
            raise StoreError(f"record {self.id!r}: vector must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise StoreError(f"record {self.id!r}: vector has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)
        if self.complexity is not None and not isinstance(self.complexity, Complexity):
            object.__setattr__(self, "complexity", parse_complexity(self.complexity))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            (self.id, self.space, self.class_id, self.image_id, self.complexity)
            == (other.id, other.space, other.class_id, other.image_id, other.complexity)
            and self.vector.shape == other.vector.shape
            and np.array_equal(self.vector, other.vector)
        )

    __hash__ = None

    def to_json(self) -> dict:
        out: dict = {"id": self.id, "space": self.space, "vector": self.vector}
        if self.class_id is not None:
            out["class_id"] = self.class_id
        if self.image_id is not None:
            out["image_id"] = self.image_id
        if self.complexity is not None:
            out["complexity"] = self.complexity.value
        return out


@dataclass(frozen=True)
class Space:
    dim: int
    records: tuple[EmbeddingRecord, ...] = ()


@dataclass(frozen=True)
class EmbeddingStore:
    """Immutable collection of embedding spaces sharing a class registry.

    ``splits`` maps each of :data:`SPLIT_NAMES` to a tuple of record ids.  Ids
    name crops, not vectors: the same id appears once in every space that
    embeds that crop, and belongs to at most one split.
    """

    spaces: Mapping[str, Space]
    registry: ClassRegistry
    splits: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        spaces = {name: sp for name, sp in self.spaces.items()}
        splits = {name: tuple(self.splits.get(name, ())) for name in SPLIT_NAMES}
        unknown = set(self.splits) - set(SPLIT_NAMES)
        if unknown:
            raise StoreError(f"unknown split name(s): {sorted(unknown)}")
        object.__setattr__(self, "spaces", spaces)
        object.__setattr__(self, "splits", splits)
        self.validate()

    def validate(self) -> None:
        known_ids: set[str] = set()
        for name, sp in self.spaces.items():
            if sp.dim <= 0:
                raise StoreError(f"space {name!r} has non-positive dim {sp.dim}")
            seen: set[str] = set()
            for r in sp.records:
                if r.space != name:
                    raise StoreError(f"record {r.id!r} claims space {r.space!r} but is stored under {name!r}")
                if r.vector.shape[0] != sp.dim:
                    raise StoreError(
                        f"dimension mismatch: record {r.id!r} has length {r.vector.shape[0]}, space {name!r} declares {sp.dim}"
                    )
                if r.id in seen:
                    raise StoreError(f"duplicate record id {r.id!r} in space {name!r}")
                if r.class_id is not None and r.class_id not in self.registry:
                    raise StoreError(f"record {r.id!r} has unknown class_id {r.class_id}")
                seen.add(r.id)
            known_ids |= seen
        owner: dict[str, str] = {}
        for split, ids in self.splits.items():
            for rid in ids:
                if rid in owner:
                    raise StoreError(f"record id {rid!r} is in both {owner[rid]!r} and {split!r} splits")
                if rid not in known_ids:
                    raise StoreError(f"split {split!r} references unknown record id {rid!r}")
                owner[rid] = split

    def dim(self, space: str) -> int:
        return self._space(space).dim

    def _space(self, space: str) -> Space:
        try:
            return self.spaces[space]
        except KeyError:
            raise StoreError(f"unknown space {space!r}") from None

    def split_of(self, record_id: str) -> str | None:
        for split, ids in self.splits.items():
            if record_id in ids:
                return split
        return None

    def records(self, space: str, split: str | None = None) -> list[EmbeddingRecord]:
        recs = self._space(space).records
        if split is None:
            return list(recs)
        if split not in SPLIT_NAMES:
            raise StoreError(f"unknown split {split!r}")
        ids = set(self.splits[split])
        return [r for r in recs if r.id in ids]

    def labeled(self, space: str, split: str | None = None) -> tuple[list[str], np.ndarray, np.ndarray]:
        """Ids, ``N x d`` matrix and labels of the labeled records of a space/split."""
        recs = [r for r in self.records(space, split) if r.class_id is not None]
        X = np.array([r.vector for r in recs], dtype=np.float64).reshape(len(recs), self.dim(space))
        y = np.array([r.class_id for r in recs], dtype=np.int64)
        return [r.id for r in recs], X, y

    def with_splits(self, splits: Mapping[str, Sequence[str]]) -> "EmbeddingStore":
        return EmbeddingStore(self.spaces, self.registry, {k: tuple(v) for k, v in splits.items()})

    def class_ids_by_record(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for name, sp in self.spaces.items():
            for r in sp.records:
                if r.class_id is None:
                    continue
                prev = out.setdefault(r.id, r.class_id)
                if prev != r.class_id:
                    raise StoreError(f"record {r.id!r} has class {prev} in one space and {r.class_id} in {name!r}")
        return out

    def summary(self) -> dict:
        return {
            "classes": len(self.registry),
            "spaces": {name: {"dim": sp.dim, "records": len(sp.records)} for name, sp in self.spaces.items()},
            "splits": {name: len(ids) for name, ids in self.splits.items()},
        }


# ---------------------------------------------------------------- file I/O


def save_store(store: EmbeddingStore, path) -> None:
    header = {
        "format": STORE_FORMAT,
        "registry": store.registry.to_json(),
        "spaces": {name: sp.dim for name, sp in store.spaces.items()},
        "splits": {name: list(store.splits[name]) for name in SPLIT_NAMES},
    }
    lines = [jsonio.dumps(header)]
    for sp in store.spaces.values():
        lines.extend(jsonio.dumps(r.to_json()) for r in sp.records)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise StoreError(f"cannot write store to {path}: {exc.strerror or exc}") from exc


def load_store(path) -> EmbeddingStore:
    with open(path, encoding="utf-8") as fh:
        raw_lines = fh.read().splitlines()
    numbered = [(i + 1, ln) for i, ln in enumerate(raw_lines) if ln.strip()]
    if not numbered:
        raise StoreError("no records")
    header = _parse_line(*numbered[0])
    if header.get("format") != STORE_FORMAT:
        raise StoreError(f"line {numbered[0][0]}: expected format {STORE_FORMAT!r}, got {header.get('format')!r}")
    if len(numbered) == 1:
        raise StoreError("no records")
    try:
        registry = ClassRegistry.from_json(header["registry"])
        dims = {str(k): int(v) for k, v in header["spaces"].items()}
    except (KeyError, AttributeError, TypeError, ValueError) as exc:
        raise StoreError(f"line {numbered[0][0]}: malformed header ({exc})") from None
    by_space: dict[str, list[EmbeddingRecord]] = {name: [] for name in dims}
    seen: dict[str, set[str]] = {name: set() for name in dims}
    for lineno, text in numbered[1:]:
        obj = _parse_line(lineno, text)
        try:
            rid = str(obj["id"])
            space = str(obj["space"])
            vector = obj["vector"]
        except KeyError as exc:
            raise StoreError(f"line {lineno}: missing field {exc}") from None
        if space not in dims:
            raise StoreError(f"line {lineno}: record {rid!r} uses undeclared space {space!r}")
        if not isinstance(vector, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in vector):
            raise StoreError(f"line {lineno}: record {rid!r} has a malformed vector")
        if len(vector) != dims[space]:
            raise StoreError(
                f"line {lineno}: dimension mismatch: record {rid!r} has length {len(vector)}, space {space!r} declares {dims[space]}"
            )
        if rid in seen[space]:
            raise StoreError(f"line {lineno}: duplicate record id {rid!r} in space {space!r}")
        seen[space].add(rid)
        class_id = obj.get("class_id")
        if "class" in obj and class_id is None:
            class_id = registry.id_of(str(obj["class"]))
        if class_id is not None and (isinstance(class_id, bool) or class_id not in registry):
            raise StoreError(f"line {lineno}: record {rid!r} has unknown class_id {class_id!r}")
        try:
            rec = EmbeddingRecord(
                id=rid,
                space=space,
                vector=np.array(vector, dtype=np.float64),
                class_id=class_id,
                image_id=obj.get("image_id"),
                complexity=obj.get("complexity"),
            )
        except StoreError as exc:
            raise StoreError(f"line {lineno}: {exc}") from None
        by_space[space].append(rec)
    splits = header.get("splits", {}) or {}
    if not isinstance(splits, dict):
        raise StoreError(f"line {numbered[0][0]}: splits must be an object")
    return EmbeddingStore(
        {name: Space(dims[name], tuple(recs)) for name, recs in by_space.items()},
        registry,
        {str(k): tuple(str(x) for x in v) for k, v in splits.items()},
    )


def _parse_line(lineno: int, text: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StoreError(f"line {lineno}: malformed JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise StoreError(f"line {lineno}: expected a JSON object")
    return obj


# ------------------------------------------------------------------ splits


def split_assign(store: EmbeddingStore, fractions: Mapping[str, float], seed: int) -> EmbeddingStore:
    """Stratified, seeded assignment of every labeled crop to a split.

    Per class, counts are ``n * fraction`` rounded by largest remainder; the
    representative split always receives at least one crop per class.
    Unlabeled records stay unassigned.
    """
    unknown = set(fractions) - set(SPLIT_NAMES)
    if unknown:
        raise StoreError(f"unknown split name(s): {sorted(unknown)}")
    if any(f < 0 for f in fractions.values()):
        raise StoreError("split fractions must be non-negative")
    total = math.fsum(fractions.values())
    if abs(total - 1.0) > 1e-9:
        raise StoreError(f"split fractions must sum to 1, got {total!r}")

    for name in store.spaces:
        present = {r.class_id for r in store.records(name) if r.class_id is not None}
        missing = [c for c in range(len(store.registry)) if c not in present]
        if missing:
            raise StoreError(
                f"class {missing[0]} has too few records in space {name!r} to satisfy the representative minimum"
            )

    labels = store.class_ids_by_record()
    by_class: dict[int, list[str]] = {c: [] for c in range(len(store.registry))}
    order: list[str] = []
    seen: set[str] = set()
    for sp in store.spaces.values():
        for r in sp.records:
            if r.id in labels and r.id not in seen:
                seen.add(r.id)
                order.append(r.id)
    for rid in order:
        by_class[labels[rid]].append(rid)

    rng = make_rng(seed, SPLITS)
    assigned: dict[str, set[str]] = {name: set() for name in SPLIT_NAMES}
    for c in range(len(store.registry)):
        ids = by_class[c]
        perm = rng.permutation(len(ids))
        counts = _largest_remainder(len(ids), [fractions.get(s, 0.0) for s in SPLIT_NAMES])
        if counts[0] == 0:
            donor = int(np.argmax(counts))
            counts[donor] -= 1
            counts[0] += 1
        start = 0
        for s, k in zip(SPLIT_NAMES, counts):
            assigned[s].update(ids[j] for j in perm[start : start + k])
            start += k
    splits = {s: tuple(rid for rid in order if rid in assigned[s]) for s in SPLIT_NAMES}
    return store.with_splits(splits)


def _largest_remainder(n: int, fractions: list[float]) -> list[int]:
    raw = [n * f for f in fractions]
    counts = [int(math.floor(x)) for x in raw]
    rest = n - sum(counts)
    by_remainder = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in by_remainder[:rest]:
        counts[i] += 1
    return counts
