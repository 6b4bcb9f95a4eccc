"""Banked Hopfield-memory classification head.

A head holds ``m`` banks.  Bank ``b`` owns query/key projections
``W_Q[b], W_K[b]`` (``d x p``) and a memory ``Y[b]`` with one representative
row per class (``C x d``).  For queries ``R`` (``N x d``)::

    scores_b = softmax(beta * (R W_Q[b]) (Y[b] W_K[b])^T)      row-wise
    scores   = mean_b scores_b

Training minimises the mean squared error to one-hot targets plus two
regularisers on the representatives:

* intra: mean over banks of the mean pairwise squared distance between the
  bank's L2-normalised representatives;
* inter: mean over classes of the mean squared cosine between the same
  class's representatives in different banks.

Parameters are stored stacked over banks (``W_Q``: ``m x d x p`` and so on);
:attr:`HopfieldHead.banks` gives per-bank views.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import jsonio
from .rng import HEAD_INIT, make_rng
from .scores import ScoreVector, stable_mean
from .store import EmbeddingStore, StoreError

HEAD_FORMAT = "hopfield-head/1"
DEFAULT_BANKS = 4


_OPTIMIZER_ALIASES = {"adamlike": "adam", "plainsgd": "sgd"}


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 0.001
    epochs: int = 20
    batch_size: int = 16
    lambda_inter: float = 0.01
    lambda_intra: float = 0.1
    seed: int = 0
    optimizer: str = "adam"  # "adam" (alias AdamLike) or "sgd" (alias PlainSGD)
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")
        if self.lambda_inter < 0 or self.lambda_intra < 0:
            raise ValueError("regulariser weights must be non-negative")
        object.__setattr__(self, "optimizer", _OPTIMIZER_ALIASES.get(self.optimizer.lower(), self.optimizer))
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class Bank:
    W_Q: np.ndarray
    W_K: np.ndarray
    Y: np.ndarray


@dataclass(frozen=True, eq=False)
class HopfieldHead:
    space: str
    beta: float
    W_Q: np.ndarray  # (m, d, p)
    W_K: np.ndarray  # (m, d, p)
    Y: np.ndarray  # (m, C, d)

    def __post_init__(self):
        arrays = {}
        for name in ("W_Q", "W_K", "Y"):
            a = np.array(getattr(self, name), dtype=np.float64)
            if a.ndim != 3:
                raise ValueError(f"{name} must be stacked over banks (3-d), got shape {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} has non-finite entries")
            a.setflags(write=False)
            arrays[name] = a
        m, d, p = arrays["W_Q"].shape
        if arrays["W_K"].shape != (m, d, p):
            raise ValueError("W_Q and W_K shapes differ")
        if arrays["Y"].shape[0] != m or arrays["Y"].shape[2] != d:
            raise ValueError(f"Y must have shape (m={m}, C, d={d}), got {arrays['Y'].shape}")
        if m < 1 or p < 1 or arrays["Y"].shape[1] < 1:
            raise ValueError("need at least one bank, one projection dim and one class")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        for name, a in arrays.items():
            object.__setattr__(self, name, a)
        object.__setattr__(self, "beta", float(self.beta))

    @classmethod
    def from_banks(cls, space: str, beta: float, banks) -> "HopfieldHead":
        banks = list(banks)
        return cls(space, beta, np.stack([b.W_Q for b in banks]), np.stack([b.W_K for b in banks]),
                   np.stack([b.Y for b in banks]))

    @property
    def m(self) -> int:
        return self.W_Q.shape[0]

    @property
    def d(self) -> int:
        return self.W_Q.shape[1]

    @property
    def p(self) -> int:
        return self.W_Q.shape[2]

    @property
    def num_classes(self) -> int:
        return self.Y.shape[1]

    @property
    def banks(self) -> list[Bank]:
        return [Bank(self.W_Q[b], self.W_K[b], self.Y[b]) for b in range(self.m)]

    def params(self) -> dict[str, np.ndarray]:
        return {"W_Q": self.W_Q, "W_K": self.W_K, "Y": self.Y}

    def replace(self, **params) -> "HopfieldHead":
        merged = {**self.params(), **params}
        return HopfieldHead(self.space, self.beta, merged["W_Q"], merged["W_K"], merged["Y"])

    def __eq__(self, other) -> bool:
        if not isinstance(other, HopfieldHead):
            return NotImplemented
        return (self.space, self.beta) == (other.space, other.beta) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.params().values(), other.params().values())
        )

    __hash__ = None


@dataclass(frozen=True)
class Gradients:
    dW_Q: np.ndarray
    dW_K: np.ndarray
    dY: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"W_Q": self.dW_Q, "W_K": self.dW_K, "Y": self.dY}

    def bank(self, b: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.dW_Q[b], self.dW_K[b], self.dY[b]


@dataclass(frozen=True)
class LossTerms:
    total: float
    mse: float
    intra: float
    inter: float


# ----------------------------------------------------------------- init


def init_head(
    store: EmbeddingStore,
    space: str,
    p: int,
    m: int = DEFAULT_BANKS,
    beta: float | None = None,
    seed: int = 0,
    noise_scale: float = 0.01,
) -> HopfieldHead:
    """Build an untrained head from the representative split of ``space``.

    Every bank's row ``c`` of ``Y`` starts at the mean of class ``c``'s
    representative embeddings plus Gaussian noise with standard deviation
    ``noise_scale * ||mean||`` (drawn per bank).  Projections are Gaussian
    with standard deviation ``1/sqrt(d)``; ``beta`` defaults to ``1/sqrt(p)``.
    """
    if p < 1 or m < 1:
        raise ValueError("p and m must be positive")
    _, X, y = store.labeled(space, "representative")
    C = len(store.registry)
    d = store.dim(space)
    means = np.empty((C, d))
    for c in range(C):
        rows = X[y == c]
        if rows.shape[0] == 0:
            raise StoreError(f"class {c} ({store.registry.classes[c].name}) has no representative embeddings in space {space!r}")
        means[c] = rows.mean(axis=0)
    scale = noise_scale * np.linalg.norm(means, axis=1, keepdims=True)
    WQ = np.empty((m, d, p))
    WK = np.empty((m, d, p))
    Y = np.empty((m, C, d))
    for b in range(m):
        rng = make_rng(seed, HEAD_INIT, b)
        WQ[b] = rng.standard_normal((d, p)) / math.sqrt(d)
        WK[b] = rng.standard_normal((d, p)) / math.sqrt(d)
        noise = rng.standard_normal((C, d))
        Y[b] = means + scale * noise if noise_scale else means
    return HopfieldHead(space, 1.0 / math.sqrt(p) if beta is None else beta, WQ, WK, Y)


# -------------------------------------------------------------- forward


def _softmax(L: np.ndarray) -> np.ndarray:
    Z = np.exp(L - L.max(axis=-1, keepdims=True))
    return Z / Z.sum(axis=-1, keepdims=True)


def _check_queries(head: HopfieldHead, queries) -> np.ndarray:
    X = np.asarray(queries, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != head.d:
        raise ValueError(f"queries must have shape (N, {head.d}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("queries have non-finite entries")
    return X


def _bank_forward(head: HopfieldHead, X: np.ndarray):
    A = np.einsum("nd,mdp->mnp", X, head.W_Q)  # projected queries
    K = np.einsum("mcd,mdp->mcp", head.Y, head.W_K)  # projected representatives
    S = _softmax(head.beta * np.einsum("mnp,mcp->mnc", A, K))
    return A, K, S


def bank_scores(head: HopfieldHead, queries) -> np.ndarray:
    """Per-bank score matrices, shape ``m x N x C``."""
    return _bank_forward(head, _check_queries(head, queries))[2]


def forward_scores(head: HopfieldHead, queries) -> np.ndarray:
    """``N x C`` class scores: bank-averaged softmax attention over representatives."""
    return stable_mean(bank_scores(head, queries))


def predict(head: HopfieldHead, query) -> ScoreVector:
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1:
        raise ValueError("query must be a single vector")
    return ScoreVector(forward_scores(head, q[None, :])[0])


# ----------------------------------------------------------- objective


def _check_batch(head: HopfieldHead, queries, labels) -> tuple[np.ndarray, np.ndarray]:
    X = _check_queries(head, queries)
    y = np.asarray(labels, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if y.shape != (X.shape[0],):
        raise ValueError("labels must be a vector with one entry per query")
    if y.min() < 0 or y.max() >= head.num_classes:
        raise ValueError("labels out of range for this head")
    return X, y


def _intra(Y: np.ndarray) -> tuple[float, np.ndarray]:
    """Intra-bank term and its gradient w.r.t. ``Y``."""
    m, C, _ = Y.shape
    if C < 2:
        return 0.0, np.zeros_like(Y)
    norms = np.linalg.norm(Y, axis=2, keepdims=True)
    U = Y / norms
    pairs = C * (C - 1) / 2
    s = U.sum(axis=1, keepdims=True)  # (m, 1, d)
    # sum_{c<c'} |u_c - u_c'|^2 = C*C - |sum_c u_c|^2 for unit rows
    per_bank = (C * C - (s**2).sum(axis=(1, 2))) / pairs
    dU = np.broadcast_to(-2.0 * s / pairs, U.shape) / m
    return float(per_bank.mean()), _through_normalize(U, norms, dU)


def _inter(Y: np.ndarray) -> tuple[float, np.ndarray]:
    """Inter-bank term and its gradient w.r.t. ``Y``."""
    m, C, _ = Y.shape
    if m < 2:
        return 0.0, np.zeros_like(Y)
    norms = np.linalg.norm(Y, axis=2, keepdims=True)
    U = Y / norms
    G = np.einsum("bcd,ecd->cbe", U, U)  # per-class bank-by-bank cosines
    pairs = m * (m - 1) / 2
    off = G**2
    idx = np.arange(m)
    off[:, idx, idx] = 0.0
    value = off.sum(axis=(1, 2)) / 2 / pairs  # per class
    Goff = G.copy()
    Goff[:, idx, idx] = 0.0
    dU = 2.0 * np.einsum("cbe,ecd->bcd", Goff, U) / pairs / C
    return float(value.mean()), _through_normalize(U, norms, dU)


def _through_normalize(U: np.ndarray, norms: np.ndarray, dU: np.ndarray) -> np.ndarray:
    return (dU - U * (dU * U).sum(axis=2, keepdims=True)) / norms


def _mse_and_grad(head: HopfieldHead, X: np.ndarray, y: np.ndarray, want_grad: bool):
    A, K, Sb = _bank_forward(head, X)
    S = stable_mean(Sb)
    N, C = S.shape
    T = np.zeros_like(S)
    T[np.arange(N), y] = 1.0
    R = S - T
    mse = float((R**2).sum() / (N * C))
    if not want_grad:
        return mse, None
    dS = 2.0 * R / (N * C) / head.m  # same upstream gradient for every bank
    dL = Sb * (dS - (dS * Sb).sum(axis=2, keepdims=True))  # softmax backward, (m, N, C)
    dA = head.beta * np.einsum("mnc,mcp->mnp", dL, K)
    dK = head.beta * np.einsum("mnc,mnp->mcp", dL, A)
    dWQ = np.einsum("nd,mnp->mdp", X, dA)
    dWK = np.einsum("mcd,mcp->mdp", head.Y, dK)
    dY = np.einsum("mcp,mdp->mcd", dK, head.W_K)
    return mse, (dWQ, dWK, dY)


def loss(head: HopfieldHead, batch, hp: Hyperparams) -> LossTerms:
    X, y = _check_batch(head, *batch)
    mse, _ = _mse_and_grad(head, X, y, want_grad=False)
    intra, _ = _intra(head.Y)
    inter, _ = _inter(head.Y)
    return LossTerms(mse + hp.lambda_intra * intra + hp.lambda_inter * inter, mse, intra, inter)


def gradients(head: HopfieldHead, batch, hp: Hyperparams) -> Gradients:
    X, y = _check_batch(head, *batch)
    _, (dWQ, dWK, dY) = _mse_and_grad(head, X, y, want_grad=True)
    if hp.lambda_intra:
        dY = dY + hp.lambda_intra * _intra(head.Y)[1]
    if hp.lambda_inter:
        dY = dY + hp.lambda_inter * _inter(head.Y)[1]
    return Gradients(dWQ, dWK, dY)


def loss_and_gradients(head: HopfieldHead, batch, hp: Hyperparams) -> tuple[LossTerms, Gradients]:
    X, y = _check_batch(head, *batch)
    mse, (dWQ, dWK, dY) = _mse_and_grad(head, X, y, want_grad=True)
    intra, g_intra = _intra(head.Y)
    inter, g_inter = _inter(head.Y)
    terms = LossTerms(mse + hp.lambda_intra * intra + hp.lambda_inter * inter, mse, intra, inter)
    return terms, Gradients(dWQ, dWK, dY + hp.lambda_intra * g_intra + hp.lambda_inter * g_inter)


# ------------------------------------------------------------------ I/O


def head_to_json(head: HopfieldHead) -> dict:
    return {
        "format": HEAD_FORMAT,
        "space": head.space,
        "d": head.d,
        "p": head.p,
        "m": head.m,
        "beta": head.beta,
        "banks": [{"W_Q": b.W_Q, "W_K": b.W_K, "Y": b.Y} for b in head.banks],
    }


def head_from_json(obj: dict) -> HopfieldHead:
    if obj.get("format") != HEAD_FORMAT:
        raise ValueError(f"expected format {HEAD_FORMAT!r}, got {obj.get('format')!r}")
    head = HopfieldHead.from_banks(
        obj["space"], obj["beta"], [Bank(np.array(b["W_Q"]), np.array(b["W_K"]), np.array(b["Y"])) for b in obj["banks"]]
    )
    if (head.d, head.p, head.m) != (obj["d"], obj["p"], obj["m"]):
        raise ValueError("declared d/p/m do not match the stored matrices")
    return head


def save_head(head: HopfieldHead, path) -> None:
    jsonio.write_json(path, head_to_json(head))


def load_head(path) -> HopfieldHead:
    return head_from_json(jsonio.read_json(path))
