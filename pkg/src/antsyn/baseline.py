"""Direct baseline: k-means pivots over raw difference vectors, no distillation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .embeddings import EmbeddingTable, cosine, ensure_words
from .lexicon import LabeledPair


class BaselineError(ValueError):
    pass


@dataclass
class PivotSet:
    pivots: np.ndarray  # (k, d)
    inertia_trace: list[float] = field(default_factory=list)
    n_iter: int = 0

    @property
    def k(self) -> int:
        return self.pivots.shape[0]


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centers = [X[int(rng.integers(n))]]
    closest = _sq_dists(X, centers[0][None, :])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # all points coincide with a chosen center; fall back to uniform picks
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(X[idx])
        closest = np.minimum(closest, _sq_dists(X, X[idx][None, :])[:, 0])
    return np.vstack(centers)


def kmeans(X: np.ndarray, k: int, seed: int = 0, max_iter: int = 300) -> PivotSet:
    """Lloyd iterations from k-means++ seeds until assignments stop changing."""
    X = np.asarray(X, dtype=np.float64)
    if k < 1:
        raise BaselineError(f"k must be >= 1, got {k}")
    if k > len(X):
        raise BaselineError(f"k={k} exceeds the number of samples ({len(X)})")
    rng = np.random.default_rng(seed)
    C = kmeans_pp_init(X, k, rng)
    labels = None
    trace: list[float] = []
    it = 0
    for it in range(1, max_iter + 1):
        D = _sq_dists(X, C)
        new_labels = np.argmin(D, axis=1)
        trace.append(float(D[np.arange(len(X)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = X[labels == j]
            if len(members):
                C[j] = members.mean(axis=0)
            # an emptied cluster keeps its previous center
    return PivotSet(C, trace, it)


def difference_matrix(pairs: Sequence[LabeledPair], table: EmbeddingTable) -> np.ndarray:
    return np.vstack([table.vector(p.word_a) - table.vector(p.word_b) for p in pairs])


def fit_pivots(
    train_pairs: Sequence[LabeledPair],
    table: EmbeddingTable,
    k: int = 10,
    seed: int = 0,
    rng: np.random.Generator | None = None,
) -> PivotSet:
    """Cluster ``vec(a) - vec(b)`` over synonym and antonym pairs jointly."""
    if k > len(train_pairs):
        raise BaselineError(f"k={k} exceeds the number of training pairs ({len(train_pairs)})")
    ensure_words(table, (w for p in train_pairs for w in (p.word_a, p.word_b)), rng or np.random.default_rng(seed))
    return kmeans(difference_matrix(train_pairs, table), k, seed)


def baseline_features(pair: LabeledPair | tuple[str, str], table: EmbeddingTable, pivots: PivotSet) -> np.ndarray:
    """``[cos(a, b), ||diff - pivot_j|| for each j, diff]`` with ``diff = vec(a) - vec(b)``."""
    a, b = (pair.word_a, pair.word_b) if isinstance(pair, LabeledPair) else pair
    va, vb = table.vector(a), table.vector(b)
    if pivots.pivots.shape[1] != table.dim:
        raise BaselineError(f"pivot dim {pivots.pivots.shape[1]} != embedding dim {table.dim}")
    diff = va - vb
    dists = np.linalg.norm(pivots.pivots - diff[None, :], axis=1)
    return np.concatenate([[cosine(va, vb)], dists, diff])


def baseline_matrix(
    pairs: Sequence[LabeledPair],
    table: EmbeddingTable,
    pivots: PivotSet,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    ensure_words(table, (w for p in pairs for w in (p.word_a, p.word_b)), rng or np.random.default_rng(0))
    return np.vstack([baseline_features(p, table, pivots) for p in pairs])
