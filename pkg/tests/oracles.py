"""Independent reference computations used to freeze and cross-check expected values."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def central_difference(f, params: dict[str, np.ndarray], step: float = 1e-5) -> dict[str, np.ndarray]:
    """Numerical gradient of scalar ``f(params)`` by central differences, one coordinate at a time."""
    out = {}
    for name, P in params.items():
        G = np.zeros_like(P)
        for idx in np.ndindex(P.shape):
            plus = {k: v.copy() for k, v in params.items()}
            minus = {k: v.copy() for k, v in params.items()}
            plus[name][idx] += step
            minus[name][idx] -= step
            G[idx] = (f(plus) - f(minus)) / (2 * step)
        out[name] = G
    return out


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def precision_at_k_ap(relevance_by_rank: list[bool]) -> float:
    """AP from explicit precision@k at each relevant rank; the sum is exact before one final rounding."""
    n_rel = sum(relevance_by_rank)
    terms = []
    for k in range(1, len(relevance_by_rank) + 1):
        if relevance_by_rank[k - 1]:
            hits = sum(1 for r in relevance_by_rank[:k] if r)
            terms.append(hits / k)
    return float(sum((Fraction(t) for t in terms), Fraction(0))) / n_rel


def nearest_center_predict(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    preds = []
    for x in X:
        best, best_d = 0, math.inf
        for c, mu in enumerate(centers):
            d = float(np.sum((x - mu) ** 2))
            if d < best_d:
                best, best_d = c, d
        preds.append(best)
    return np.array(preds)


def brute_force_cosine(prototypes: dict[int, np.ndarray], query: np.ndarray) -> int:
    qn = math.sqrt(sum(float(v) ** 2 for v in query))
    best_c, best_s = None, -math.inf
    for c in sorted(prototypes):
        for p in prototypes[c]:
            pn = math.sqrt(sum(float(v) ** 2 for v in p))
            s = sum(float(a) * float(b) for a, b in zip(query, p)) / (qn * pn)
            if s > best_s + 1e-12:
                best_c, best_s = c, s
    return best_c


def softmax_rows(L: np.ndarray) -> np.ndarray:
    out = np.empty_like(L)
    for i, row in enumerate(L):
        e = [math.exp(v) for v in row]
        z = sum(e)
        out[i] = [v / z for v in e]
    return out


def loop_forward(W_Q, W_K, Y, beta, X) -> np.ndarray:
    """Bank-averaged attention scores with explicit per-bank loops."""
    m = W_Q.shape[0]
    acc = 0
    for b in range(m):
        logits = beta * (X @ W_Q[b]) @ (Y[b] @ W_K[b]).T
        acc = acc + softmax_rows(logits)
    return acc / m
