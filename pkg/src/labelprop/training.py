"""Mini-batch training of a Hopfield head."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .hopfield import HopfieldHead, Hyperparams, LossTerms, forward_scores, loss, loss_and_gradients
from .rng import SHUFFLE, make_rng
from .store import EmbeddingStore, StoreError


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for k in params:
            params[k] -= self.lr * grads[k]


class Adam:
    def __init__(self, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k in params:
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            params[k] -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


def make_optimizer(hp: Hyperparams):
    if hp.optimizer == "sgd":
        return SGD(hp.learning_rate)
    return Adam(hp.learning_rate, hp.adam_beta1, hp.adam_beta2, hp.adam_eps)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    total: float
    mse: float
    intra: float
    inter: float
    accuracy: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TrainReport:
    space: str
    initial: EpochStats
    epochs: list[EpochStats] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def final(self) -> EpochStats:
        return self.epochs[-1]

    def to_json(self, include_timing: bool = False) -> dict:
        # wall time is excluded by default so persisted reports stay reproducible
        out = {"space": self.space, "initial": self.initial.to_json(), "epochs": [e.to_json() for e in self.epochs]}
        if include_timing:
            out["wall_time"] = self.wall_time
        return out


def _epoch_stats(epoch: int, head: HopfieldHead, X: np.ndarray, y: np.ndarray, hp: Hyperparams) -> EpochStats:
    terms: LossTerms = loss(head, (X, y), hp)
    acc = float(np.mean(np.argmax(forward_scores(head, X), axis=1) == y))
    return EpochStats(epoch, terms.total, terms.mse, terms.intra, terms.inter, acc)


def train_head(
    head: HopfieldHead, store: EmbeddingStore, split: str, hp: Hyperparams
) -> tuple[HopfieldHead, TrainReport]:
    """Train on the labeled records of ``split`` in ``head.space``.

    The split is reshuffled every epoch from a stream keyed by ``hp.seed`` and
    the epoch index; the last batch of an epoch may be short.  Loss and
    accuracy in the report are measured on the whole split after each epoch.
    """
    _, X, y = store.labeled(head.space, split)
    if X.shape[0] == 0:
        raise StoreError(f"split {split!r} has no labeled records in space {head.space!r}")
    if X.shape[1] != head.d:
        raise ValueError(f"store space {head.space!r} has dim {X.shape[1]}, head expects {head.d}")
    if y.max() >= head.num_classes:
        raise ValueError("store labels exceed the head's class count")

    start = time.perf_counter()
    report = TrainReport(head.space, _epoch_stats(0, head, X, y, hp))
    params = {k: v.copy() for k, v in head.params().items()}
    opt = make_optimizer(hp)
    n = X.shape[0]
    for epoch in range(1, hp.epochs + 1):
        order = make_rng(hp.seed, SHUFFLE, epoch).permutation(n)
        for lo in range(0, n, hp.batch_size):
            idx = order[lo : lo + hp.batch_size]
            _, grads = loss_and_gradients(head.replace(**params), (X[idx], y[idx]), hp)
            opt.step(params, grads.as_dict())
        head_now = head.replace(**params)
        report.epochs.append(_epoch_stats(epoch, head_now, X, y, hp))
    report.wall_time = time.perf_counter() - start
    return head.replace(**params), report
