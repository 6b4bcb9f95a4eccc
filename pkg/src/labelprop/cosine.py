"""Fixed-prototype cosine classifier (the non-learned baseline)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import jsonio
from .rng import PROTOTYPES, make_rng
from .scores import ScoreVector
from .store import EmbeddingStore, StoreError

BANK_FORMAT = "protobank/1"
DEFAULT_K = 5


@dataclass(frozen=True, eq=False)
class PrototypeBank:
    space: str
    prototypes: Mapping[int, np.ndarray]  # class_id -> (n_c, d), unit rows
    k: int = DEFAULT_K

    def __post_init__(self):
        protos = {}
        for c in sorted(self.prototypes):
            P = np.array(self.prototypes[c], dtype=np.float64)
            if P.ndim != 2 or not 1 <= P.shape[0] <= self.k:
                raise StoreError(f"class {c} must have between 1 and k={self.k} prototypes")
            if np.any(np.abs(np.linalg.norm(P, axis=1) - 1.0) > 1e-9):
                raise StoreError(f"class {c} has prototypes that are not unit-norm")
            P.setflags(write=False)
            protos[int(c)] = P
        if not protos:
            raise StoreError("prototype bank is empty")
        dims = {P.shape[1] for P in protos.values()}
        if len(dims) != 1:
            raise StoreError("prototypes have inconsistent dimensions")
        object.__setattr__(self, "prototypes", protos)
        # flat view for vectorised scoring
        owners = np.concatenate([np.full(P.shape[0], c) for c, P in protos.items()])
        object.__setattr__(self, "_flat", np.concatenate(list(protos.values()), axis=0))
        object.__setattr__(self, "_owners", owners)

    @property
    def dim(self) -> int:
        return self._flat.shape[1]

    @property
    def num_classes(self) -> int:
        return max(self.prototypes) + 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, PrototypeBank):
            return NotImplemented
        return (
            self.space == other.space
            and self.k == other.k
            and self.prototypes.keys() == other.prototypes.keys()
            and all(np.array_equal(self.prototypes[c], other.prototypes[c]) for c in self.prototypes)
        )

    __hash__ = None


def _normalize_rows(X: np.ndarray) -> np.ndarray:
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def build_prototypes(store: EmbeddingStore, space: str, k: int = DEFAULT_K, seed: int = 0) -> PrototypeBank:
    """Pick up to ``k`` prototypes per class from the representative split.

    Classes without representative records fall back to the train split.
    Whenever more candidates exist than ``k``, a seeded uniform subset is
    taken; the chosen rows keep their store order.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    _, Xr, yr = store.labeled(space, "representative")
    _, Xt, yt = store.labeled(space, "train")
    protos = {}
    for c in range(len(store.registry)):
        X = Xr[yr == c]
        source = 0
        if X.shape[0] == 0:
            X = Xt[yt == c]
            source = 1
        if X.shape[0] == 0:
            raise StoreError(f"class {c} has no labeled records in space {space!r}")
        if X.shape[0] > k:
            rng = make_rng(seed, PROTOTYPES, c, source)
            X = X[np.sort(rng.choice(X.shape[0], size=k, replace=False))]
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms == 0):
            raise StoreError(f"class {c} has a zero-norm embedding in space {space!r}")
        protos[c] = _normalize_rows(X)
    return PrototypeBank(space, protos, k)


def cosine_scores(bank: PrototypeBank, queries: np.ndarray) -> np.ndarray:
    """``N x C`` matrix of max-over-prototypes cosine similarities."""
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if Q.shape[1] != bank.dim:
        raise ValueError(f"query width {Q.shape[1]} does not match bank dimension {bank.dim}")
    norms = np.linalg.norm(Q, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("zero-norm query")
    sims = np.clip((Q / norms) @ bank._flat.T, -1.0, 1.0)
    out = np.full((Q.shape[0], bank.num_classes), -np.inf)
    for c in bank.prototypes:
        out[:, c] = sims[:, bank._owners == c].max(axis=1)
    return out


def classify_cosine(bank: PrototypeBank, query: np.ndarray) -> ScoreVector:
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1:
        raise ValueError("query must be a single vector")
    return ScoreVector(cosine_scores(bank, q)[0])


# ------------------------------------------------------------------ I/O


def save_bank(bank: PrototypeBank, path) -> None:
    lines = [jsonio.dumps({"format": BANK_FORMAT, "space": bank.space, "k": bank.k, "dim": bank.dim})]
    for c, P in bank.prototypes.items():
        lines.extend(jsonio.dumps({"class_id": c, "vector": row}) for row in P)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_bank(path) -> PrototypeBank:
    with open(path, encoding="utf-8") as fh:
        rows = [json.loads(ln) for ln in fh if ln.strip()]
    if not rows or rows[0].get("format") != BANK_FORMAT:
        raise StoreError(f"{path}: not a {BANK_FORMAT} file")
    header = rows[0]
    protos: dict[int, list] = {}
    for r in rows[1:]:
        protos.setdefault(int(r["class_id"]), []).append(r["vector"])
    return PrototypeBank(header["space"], {c: np.array(v) for c, v in protos.items()}, int(header["k"]))
