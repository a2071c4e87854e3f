"""Phase-II classifiers over pair features.

:class:`BoostedForest` is second-order gradient boosting on multinomial
log-loss. Each round grows one depth-limited tree whose leaves carry a margin
per class, using histogram split search over quantile bins (exact when a
feature has at most ``max_bins`` distinct values). A round that would raise
training log-loss has its leaves halved until it does not.

:class:`LogisticModel` is a multinomial logistic regression with the same
surface, for when tree training is unwanted.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .features import FeatureMask, PairFeatures

FOREST_FORMAT = "antsyn-forest"
FOREST_VERSION = 1
LOGISTIC_FORMAT = "antsyn-logistic"


class ClassifierError(ValueError):
    pass


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_loss(y: np.ndarray, margins: np.ndarray) -> float:
    z = margins - margins.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(lse - z[np.arange(len(y)), y]))


def _check_xy(X, y, n_classes):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ClassifierError(f"X of shape {X.shape} does not match {len(y)} labels")
    if not np.all(np.isfinite(X)):
        raise ClassifierError("non-finite feature values")
    present = np.unique(y)
    if len(present) < 2:
        raise ClassifierError(f"need at least 2 classes, got {present.tolist()}")
    C = n_classes if n_classes is not None else int(y.max()) + 1
    if y.min() < 0 or y.max() >= C:
        raise ClassifierError(f"labels must lie in [0, {C})")
    return X, y, C


# --------------------------------------------------------------------------
# Trees
# --------------------------------------------------------------------------


@dataclass
class Tree:
    """Flat binary tree. ``feature[i] == -1`` marks a leaf; go left when ``x <= threshold``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, C)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[node]
            internal = f >= 0
            if not internal.any():
                break
            idx = np.nonzero(internal)[0]
            go_left = X[idx, f[idx]] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
        return self.value[node]

    def depth(self) -> int:
        def rec(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(rec(self.left[i]), rec(self.right[i]))

        return rec(0)


@dataclass
class BoostParams:
    n_trees: int = 200
    max_depth: int = 4
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    min_child_weight: float = 1e-3
    max_bins: int = 255
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 0 or self.max_depth < 1 or not self.learning_rate > 0:
            raise ClassifierError(f"invalid boosting parameters: {self}")


def _bin_edges(col: np.ndarray, max_bins: int) -> np.ndarray:
    u = np.unique(col)
    if len(u) <= 1:
        return np.zeros(0)
    if len(u) <= max_bins:
        return (u[:-1] + u[1:]) / 2.0
    qs = np.quantile(col, np.linspace(0, 1, max_bins + 1)[1:-1])
    return np.unique(qs)


class _TreeBuilder:
    def __init__(self, Xb, edges, n_bins, params: BoostParams):
        self.Xb = Xb
        self.edges = edges
        self.nb = n_bins
        self.p = params
        F = Xb.shape[1]
        self.offsets = (np.arange(F) * n_bins)[None, :]
        self.valid = np.zeros((F, n_bins), dtype=bool)
        for f, e in enumerate(edges):
            self.valid[f, : len(e)] = True

    def build(self, g: np.ndarray, h: np.ndarray) -> Tree:
        feature, threshold, left, right, value = [], [], [], [], []
        lam = self.p.reg_lambda

        def new_node():
            for lst, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1)):
                lst.append(v)
            value.append(None)
            return len(feature) - 1

        root = new_node()
        stack = [(root, np.arange(len(g)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            G = g[idx].sum(axis=0)
            H = h[idx].sum(axis=0)
            value[node] = -G / (H + lam)
            if depth >= self.p.max_depth or len(idx) < 2:
                continue
            split = self._best_split(idx, g, h, G, H)
            if split is None:
                continue
            f, k = split
            mask = self.Xb[idx, f] <= k
            li, ri = new_node(), new_node()
            feature[node], threshold[node] = f, float(self.edges[f][k])
            left[node], right[node] = li, ri
            # right first so the left subtree is numbered first
            stack.append((ri, idx[~mask], depth + 1))
            stack.append((li, idx[mask], depth + 1))
        return Tree(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.vstack(value),
        )

    def _best_split(self, idx, g, h, G, H):
        F, nb = self.Xb.shape[1], self.nb
        C = g.shape[1]
        flat = (self.Xb[idx] + self.offsets).ravel()
        size = F * nb
        GL = np.empty((F, nb, C))
        HL = np.empty((F, nb, C))
        for c in range(C):
            GL[:, :, c] = np.bincount(flat, weights=np.repeat(g[idx, c], F), minlength=size).reshape(F, nb)
            HL[:, :, c] = np.bincount(flat, weights=np.repeat(h[idx, c], F), minlength=size).reshape(F, nb)
        GL = np.cumsum(GL, axis=1)
        HL = np.cumsum(HL, axis=1)
        GR = G - GL
        HR = H - HL
        lam = self.p.reg_lambda
        parent = np.sum(G * G / (H + lam))
        gain = np.sum(GL * GL / (HL + lam), axis=2) + np.sum(GR * GR / (HR + lam), axis=2) - parent
        ok = (
            self.valid
            & (HL.sum(axis=2) >= self.p.min_child_weight)
            & (HR.sum(axis=2) >= self.p.min_child_weight)
        )
        gain = np.where(ok, gain, -np.inf)
        best = int(np.argmax(gain))
        if not gain.flat[best] > 1e-12:
            return None
        return divmod(best, nb)


@dataclass
class BoostedForest:
    n_classes: int
    n_features: int
    learning_rate: float
    max_depth: int
    trees: list[Tree] = field(default_factory=list)
    mask: FeatureMask | None = None
    train_loss: list[float] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ClassifierError(f"expected {self.n_features} features, got shape {X.shape}")
        out = np.zeros((len(X), self.n_classes))
        for t in self.trees:
            out += t.predict(X)
        return out

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _softmax(self.decision_function(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision_function(X), axis=1)


def fit(
    X: np.ndarray,
    y: Sequence[int],
    params: BoostParams = BoostParams(),
    mask: FeatureMask | None = None,
    n_classes: int | None = None,
) -> BoostedForest:
    X, y, C = _check_xy(X, y, n_classes)
    n, F = X.shape
    edges = [_bin_edges(X[:, f], params.max_bins) for f in range(F)]
    n_bins = max(1, max(len(e) for e in edges) + 1)
    Xb = np.column_stack([np.searchsorted(edges[f], X[:, f], side="left") for f in range(F)]).astype(np.int64)
    builder = _TreeBuilder(Xb, edges, n_bins, params)

    forest = BoostedForest(C, F, params.learning_rate, params.max_depth, mask=mask, params=dataclasses.asdict(params))
    Y = np.eye(C)[y]
    margins = np.zeros((n, C))
    loss = log_loss(y, margins)
    forest.train_loss.append(loss)
    for _ in range(params.n_trees):
        p = _softmax(margins)
        g = p - Y
        h = np.maximum(p * (1.0 - p), 1e-16)
        tree = builder.build(g, h)
        tree.value *= params.learning_rate
        step = tree.predict(X)
        new_loss = log_loss(y, margins + step)
        halvings = 0
        while new_loss > loss and halvings < 30:
            tree.value *= 0.5
            step *= 0.5
            new_loss = log_loss(y, margins + step)
            halvings += 1
        if new_loss > loss:
            break
        forest.trees.append(tree)
        margins += step
        loss = new_loss
        forest.train_loss.append(loss)
    return forest


def _check_mask(clf, mask: FeatureMask | None) -> None:
    if clf.mask != mask:
        raise ClassifierError(
            f"feature mask {mask.label() if mask else None} does not match the training mask "
            f"{clf.mask.label() if clf.mask else None}"
        )


def predict(clf, features: PairFeatures, mask: FeatureMask | None) -> tuple[int, np.ndarray]:
    """Class index and probability vector for one pair."""
    _check_mask(clf, mask)
    proba = clf.predict_proba(features.as_array()[None, :])[0]
    return int(np.argmax(proba)), proba


def predict_matrix(clf, X: np.ndarray, mask: FeatureMask | None) -> tuple[np.ndarray, np.ndarray]:
    _check_mask(clf, mask)
    proba = clf.predict_proba(X)
    return np.argmax(proba, axis=1), proba


# --------------------------------------------------------------------------
# Logistic fallback
# --------------------------------------------------------------------------


@dataclass
class LogisticModel:
    W: np.ndarray  # (C, F)
    b: np.ndarray  # (C,)
    mask: FeatureMask | None = None
    l2: float = 1e-3

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    @property
    def n_features(self) -> int:
        return self.W.shape[1]

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ClassifierError(f"expected {self.n_features} features, got shape {X.shape}")
        return X @ self.W.T + self.b

    def predict_proba(self, X):
        return _softmax(self.decision_function(X))

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)


def fit_logistic(X, y, l2: float = 1e-3, mask: FeatureMask | None = None, n_classes: int | None = None) -> LogisticModel:
    X, y, C = _check_xy(X, y, n_classes)
    n, F = X.shape
    Y = np.eye(C)[y]

    def objective(theta):
        W = theta[: C * F].reshape(C, F)
        b = theta[C * F:]
        z = X @ W.T + b
        loss = log_loss(y, z) + 0.5 * l2 * np.sum(W * W)
        d = (_softmax(z) - Y) / n
        grad = np.concatenate([(d.T @ X + l2 * W).ravel(), d.sum(axis=0)])
        return loss, grad

    res = minimize(objective, np.zeros(C * F + C), jac=True, method="L-BFGS-B")
    return LogisticModel(res.x[: C * F].reshape(C, F).copy(), res.x[C * F:].copy(), mask, l2)


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------


def _mask_token(mask: FeatureMask | None) -> str:
    return mask.label() if mask is not None else "none"


def _parse_mask(token: str) -> FeatureMask | None:
    return None if token == "none" else FeatureMask.from_names(token.split("+"))


def _r(x: float) -> str:
    return repr(float(x))


def save_forest(forest: BoostedForest, path: str | Path, provenance: dict | None = None) -> None:
    """Versioned line-oriented text; floats use ``repr`` so the round-trip is exact."""
    lines = [
        f"{FOREST_FORMAT} {FOREST_VERSION}",
        f"n_classes {forest.n_classes}",
        f"n_features {forest.n_features}",
        f"learning_rate {_r(forest.learning_rate)}",
        f"max_depth {forest.max_depth}",
        f"mask {_mask_token(forest.mask)}",
        f"params {json.dumps(forest.params, sort_keys=True)}",
        f"provenance {json.dumps(provenance or {}, sort_keys=True)}",
        "train_loss " + " ".join(_r(v) for v in forest.train_loss),
        f"n_trees {len(forest.trees)}",
    ]
    for ti, t in enumerate(forest.trees):
        lines.append(f"tree {ti} {len(t.feature)}")
        for i in range(len(t.feature)):
            vals = " ".join(_r(v) for v in t.value[i])
            lines.append(f"{i} {t.feature[i]} {_r(t.threshold[i])} {t.left[i]} {t.right[i]} {vals}")
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_forest(path: str | Path) -> BoostedForest:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    try:
        head = lines[0].split()
        if head[0] != FOREST_FORMAT:
            raise ClassifierError("not a forest file")
        if int(head[1]) != FOREST_VERSION:
            raise ClassifierError(f"forest format version {head[1]} unsupported")
        kv = {}
        for ln in lines[1:10]:
            key, _, rest = ln.partition(" ")
            kv[key] = rest
        C = int(kv["n_classes"])
        forest = BoostedForest(
            n_classes=C,
            n_features=int(kv["n_features"]),
            learning_rate=float(kv["learning_rate"]),
            max_depth=int(kv["max_depth"]),
            mask=_parse_mask(kv["mask"]),
            params=json.loads(kv["params"]),
            train_loss=[float(v) for v in kv["train_loss"].split()],
        )
        pos = 10
        for _ in range(int(kv["n_trees"])):
            tag, _ti, n_nodes = lines[pos].split()
            if tag != "tree":
                raise ClassifierError(f"line {pos + 1}: expected tree header")
            rows = [lines[pos + 1 + i].split() for i in range(int(n_nodes))]
            pos += 1 + int(n_nodes)
            if any(len(r) != 5 + C for r in rows):
                raise ClassifierError("node row has wrong width")
            forest.trees.append(
                Tree(
                    np.array([int(r[1]) for r in rows], dtype=np.int64),
                    np.array([float(r[2]) for r in rows]),
                    np.array([int(r[3]) for r in rows], dtype=np.int64),
                    np.array([int(r[4]) for r in rows], dtype=np.int64),
                    np.array([[float(v) for v in r[5:]] for r in rows]).reshape(len(rows), C),
                )
            )
        if lines[pos] != "end":
            raise ClassifierError("missing end marker")
    except ClassifierError as exc:
        raise ClassifierError(f"{path}: {exc}") from None
    except (IndexError, KeyError, ValueError) as exc:
        raise ClassifierError(f"{path}: corrupt forest file ({exc})") from None
    for t in forest.trees:
        internal = t.feature >= 0
        if np.any(t.feature[internal] >= forest.n_features):
            raise ClassifierError(f"{path}: split feature out of range")
    return forest


def provenance_of(path: str | Path) -> dict:
    for ln in Path(path).read_text(encoding="utf-8").splitlines()[:12]:
        if ln.startswith("provenance "):
            return json.loads(ln.partition(" ")[2])
    return {}


def save_logistic(model: LogisticModel, path: str | Path) -> None:
    doc = {
        "format": LOGISTIC_FORMAT,
        "version": 1,
        "W": [[_r(v) for v in row] for row in model.W],
        "b": [_r(v) for v in model.b],
        "mask": _mask_token(model.mask),
        "l2": model.l2,
    }
    Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")


def load_logistic(path: str | Path) -> LogisticModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != LOGISTIC_FORMAT or doc.get("version") != 1:
        raise ClassifierError(f"{path}: not a version-1 logistic model")
    W = np.array([[float(v) for v in row] for row in doc["W"]])
    b = np.array([float(v) for v in doc["b"]])
    return LogisticModel(W, b, _parse_mask(doc["mask"]), doc["l2"])
