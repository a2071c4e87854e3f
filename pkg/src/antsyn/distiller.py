"""Phase-I model: two sigmoid encoders trained on hinge + cross-entropy losses.

``enc_S`` maps a pre-trained vector into the synonym sub-space, ``enc_A`` into
the antonym sub-space. Synonym pairs are scored with ``tanh(<S(a), S(b)>)``,
antonym pairs across spaces with ``tanh(<A(a), S(b)>)``. A two-feature softmax
head over the cosine-based synonymy/antonymy scores adds a cross-entropy term.

Gradients are derived by hand; everything runs in float64.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embeddings import COSINE_EPS, EmbeddingTable, ensure_words
from .lexicon import (
    CLASS_INDEX,
    DatasetSplit,
    LabeledPair,
    Relation,
    augment_antonym_symmetry,
    corrupt_negatives,
    pair_vocab,
)

logger = logging.getLogger(__name__)

MODEL_FORMAT = "antsyn-distiller"
MODEL_VERSION = 1

PARAM_NAMES = (
    "enc_S.W1", "enc_S.b1", "enc_S.W2", "enc_S.b2",
    "enc_A.W1", "enc_A.b1", "enc_A.W2", "enc_A.b2",
    "head.W", "head.b",
)


class DistillerError(ValueError):
    pass


class TrainingDivergedError(RuntimeError):
    pass


class GradientCheckError(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


# --------------------------------------------------------------------------
# Parameters
# --------------------------------------------------------------------------


def sigmoid(x: np.ndarray) -> np.ndarray:
    # branch-free and overflow-safe for large |x|
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


@dataclass
class EncoderParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @classmethod
    def glorot(cls, d: int, h1: int, m: int, rng: np.random.Generator) -> "EncoderParams":
        """Glorot-uniform weights, zero hidden bias, output bias at ``logit(1/sqrt(m))``.

        Sigmoid outputs are positive, so with a zero output bias two
        projections start with an inner product near ``m/4`` and ``tanh``
        saturates. The negative bias puts it near 1 instead.
        """
        r1 = math.sqrt(6.0 / (d + h1))
        r2 = math.sqrt(6.0 / (h1 + m))
        z0 = 1.0 / math.sqrt(m)
        return cls(
            W1=rng.uniform(-r1, r1, size=(h1, d)),
            b1=np.zeros(h1),
            W2=rng.uniform(-r2, r2, size=(m, h1)),
            b2=np.full(m, math.log(z0 / (1.0 - z0))),
        )

    @classmethod
    def zeros(cls, d: int, h1: int, m: int) -> "EncoderParams":
        return cls(np.zeros((h1, d)), np.zeros(h1), np.zeros((m, h1)), np.zeros(m))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.W1.shape[1], self.W1.shape[0], self.W2.shape[0]

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())


@dataclass
class SoftmaxHead:
    W: np.ndarray  # (C, 2)
    b: np.ndarray  # (C,)

    @classmethod
    def oriented(cls, n_classes: int = 2) -> "SoftmaxHead":
        """Synonym logit rises with the synonymy score, antonym logit with the antonymy score.

        Cross-entropy alone does not care which sign the two scores carry; a
        random head lets the antonym space come out inverted once the
        hinge terms have gone flat. Irrelevant (third class) dislikes both.
        """
        rows = [[1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]][:n_classes]
        return cls(np.array(rows), np.zeros(n_classes))

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    def copy(self) -> "SoftmaxHead":
        return SoftmaxHead(self.W.copy(), self.b.copy())


@dataclass(frozen=True)
class ModelConfig:
    d: int
    h1: int = 80
    m: int = 60
    n_classes: int = 2
    seed: int = 0

    def __post_init__(self):
        if min(self.d, self.h1, self.m) <= 0:
            raise DistillerError(f"layer sizes must be positive: {self}")
        if self.n_classes not in (2, 3):
            raise DistillerError(f"n_classes must be 2 or 3, got {self.n_classes}")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 200
    k_negatives: int = 5
    margin: float = 1.0
    seed: int = 0
    patience: int = 20
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise DistillerError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1 or self.k_negatives < 1:
            raise DistillerError("batch_size and k_negatives must be >= 1")
        if self.epochs < 0 or self.patience < 0:
            raise DistillerError("epochs and patience must be >= 0")


@dataclass
class DistillerModel:
    enc_S: EncoderParams
    enc_A: EncoderParams
    head: SoftmaxHead
    config: ModelConfig
    train_config: dict = field(default_factory=dict)

    @classmethod
    def init(cls, config: ModelConfig) -> "DistillerModel":
        rng = np.random.default_rng(config.seed)
        d, h1, m = config.d, config.h1, config.m
        enc_S = EncoderParams.glorot(d, h1, m, rng)
        enc_A = EncoderParams.glorot(d, h1, m, rng)
        return cls(enc_S, enc_A, SoftmaxHead.oriented(config.n_classes), config)

    def params(self) -> dict[str, np.ndarray]:
        """Live references to every trainable array, keyed by :data:`PARAM_NAMES`."""
        out = {}
        for enc_name in ("enc_S", "enc_A"):
            enc = getattr(self, enc_name)
            for f in ("W1", "b1", "W2", "b2"):
                out[f"{enc_name}.{f}"] = getattr(enc, f)
        out["head.W"] = self.head.W
        out["head.b"] = self.head.b
        return out

    def copy(self) -> "DistillerModel":
        return DistillerModel(
            self.enc_S.copy(), self.enc_A.copy(), self.head.copy(), self.config, dict(self.train_config)
        )


# --------------------------------------------------------------------------
# Forward pieces
# --------------------------------------------------------------------------


def _check_dim(params: EncoderParams, v: np.ndarray) -> None:
    if v.shape[-1] != params.W1.shape[1]:
        raise DistillerError(f"input dimension {v.shape[-1]} != encoder input {params.W1.shape[1]}")


def encode(params: EncoderParams, v: np.ndarray) -> np.ndarray:
    """``sigmoid(W2 sigmoid(W1 v + b1) + b2)`` for a vector or a row-stacked matrix."""
    v = np.asarray(v, dtype=np.float64)
    _check_dim(params, v)
    h = sigmoid(v @ params.W1.T + params.b1)
    return sigmoid(h @ params.W2.T + params.b2)


def _encode_cache(params: EncoderParams, X: np.ndarray):
    H = sigmoid(X @ params.W1.T + params.b1)
    Z = sigmoid(H @ params.W2.T + params.b2)
    return H, Z


def _encode_backward(params: EncoderParams, X, H, Z, dZ) -> dict[str, np.ndarray]:
    d2 = dZ * Z * (1.0 - Z)
    dW2 = d2.T @ H
    db2 = d2.sum(axis=0)
    d1 = (d2 @ params.W2) * H * (1.0 - H)
    dW1 = d1.T @ X
    db1 = d1.sum(axis=0)
    return {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}


def _rowwise_cosine(U: np.ndarray, V: np.ndarray):
    """Row-aligned cosines with the norms, and a mask of degenerate rows."""
    dots = np.sum(U * V, axis=-1)
    nu = np.sqrt(np.sum(U * U, axis=-1))
    nv = np.sqrt(np.sum(V * V, axis=-1))
    ok = (nu >= COSINE_EPS) & (nv >= COSINE_EPS)
    # min*max keeps the denominator identical under argument swap
    denom = np.where(ok, np.minimum(nu, nv) * np.maximum(nu, nv), 1.0)
    cos = np.where(ok, dots / denom, 0.0)
    return np.clip(cos, -1.0, 1.0), nu, nv, ok


def _cosine_backward(U, V, cos, nu, nv, ok, dcos):
    safe_u = np.where(ok, nu, 1.0)[:, None]
    safe_v = np.where(ok, nv, 1.0)[:, None]
    g = np.where(ok, dcos, 0.0)[:, None]
    dU = g * (V / (safe_u * safe_v) - cos[:, None] * U / safe_u**2)
    dV = g * (U / (safe_u * safe_v) - cos[:, None] * V / safe_v**2)
    return dU, dV


def syn_logit(model: DistillerModel, a: np.ndarray, b: np.ndarray) -> float:
    """``tanh(<enc_S(a), enc_S(b)>)``, symmetric in its arguments."""
    sa = encode(model.enc_S, a)
    sb = encode(model.enc_S, b)
    return float(np.tanh(np.dot(sa, sb)))


def ant_logit(model: DistillerModel, a: np.ndarray, b: np.ndarray) -> float:
    """``tanh(<enc_A(a), enc_S(b)>)``; not symmetric."""
    return float(np.tanh(np.dot(encode(model.enc_A, a), encode(model.enc_S, b))))


def score_arrays(ZS_a, ZA_a, ZS_b, ZA_b) -> tuple[np.ndarray, np.ndarray]:
    """Synonymy and antonymy scores for row-aligned projections."""
    syn = _rowwise_cosine(ZS_a, ZS_b)[0]
    c1 = _rowwise_cosine(ZA_a, ZS_b)[0]
    c2 = _rowwise_cosine(ZA_b, ZS_a)[0]
    return syn, np.maximum(c1, c2)


def scores(model: DistillerModel, a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """``(cos(S a, S b), max(cos(A a, S b), cos(A b, S a)))``."""
    A = np.atleast_2d(np.asarray(a, dtype=np.float64))
    B = np.atleast_2d(np.asarray(b, dtype=np.float64))
    syn, ant = score_arrays(encode(model.enc_S, A), encode(model.enc_A, A), encode(model.enc_S, B), encode(model.enc_A, B))
    return float(syn[0]), float(ant[0])


def score_pairs(model: DistillerModel, Xa: np.ndarray, Xb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`scores` over row-aligned input matrices."""
    return score_arrays(encode(model.enc_S, Xa), encode(model.enc_A, Xa), encode(model.enc_S, Xb), encode(model.enc_A, Xb))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# --------------------------------------------------------------------------
# Batches and losses
# --------------------------------------------------------------------------


@dataclass
class Batch:
    """Index pairs into the rows of ``X``.

    ``syn_pos``/``syn_neg``/``ant_pos``/``ant_neg``/``labeled`` are int arrays
    of shape ``(n, 2)``; ``labels`` holds class indices for ``labeled``.
    """

    X: np.ndarray
    syn_pos: np.ndarray
    syn_neg: np.ndarray
    ant_pos: np.ndarray
    ant_neg: np.ndarray
    labeled: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_words(
        cls,
        table: EmbeddingTable,
        syn_pos: Sequence[tuple[str, str]] = (),
        syn_neg: Sequence[tuple[str, str]] = (),
        ant_pos: Sequence[tuple[str, str]] = (),
        ant_neg: Sequence[tuple[str, str]] = (),
        labeled: Sequence[tuple[str, str]] = (),
        labels: Sequence[int] = (),
    ) -> "Batch":
        groups = [syn_pos, syn_neg, ant_pos, ant_neg, labeled]
        local: dict[str, int] = {}
        for g in groups:
            for a, b in g:
                local.setdefault(a, len(local))
                local.setdefault(b, len(local))
        rows = np.array([table.vocab[w] for w in local], dtype=np.int64)
        X = table.vectors[rows] if len(rows) else np.zeros((0, table.dim))

        def idx(g):
            return np.array([[local[a], local[b]] for a, b in g], dtype=np.int64).reshape(-1, 2)

        return cls(X, *(idx(g) for g in groups), np.asarray(labels, dtype=np.int64))

    @classmethod
    def from_vector_pairs(cls, **groups) -> "Batch":
        """Build from explicit ``(vec_a, vec_b)`` pairs, e.g. ``syn_pos=[(u, v)]``."""
        names = ("syn_pos", "syn_neg", "ant_pos", "ant_neg", "labeled")
        rows: list[np.ndarray] = []
        idx = {}
        for n in names:
            pairs = groups.get(n, ())
            arr = []
            for a, b in pairs:
                rows.append(np.asarray(a, dtype=np.float64))
                rows.append(np.asarray(b, dtype=np.float64))
                arr.append([len(rows) - 2, len(rows) - 1])
            idx[n] = np.array(arr, dtype=np.int64).reshape(-1, 2)
        if not rows:
            raise DistillerError("batch holds no pairs")
        return cls(np.vstack(rows), **idx, labels=np.asarray(groups.get("labels", ()), dtype=np.int64))


@dataclass
class LossTerms:
    L_S: float
    L_A: float
    L_M: float

    @property
    def total(self) -> float:
        return self.L_S + self.L_A + self.L_M


def _hinge_block(Zl, Zr, pairs, target, margin):
    """Hinge terms ``relu(margin - target * tanh(<Zl[i], Zr[j]>))``.

    Returns loss, kink distances, and per-pair d loss / d inner product.
    """
    i, j = pairs[:, 0], pairs[:, 1]
    s = np.sum(Zl[i] * Zr[j], axis=1)
    f = np.tanh(s)
    arg = margin - target * f
    active = arg > 0
    loss = float(np.sum(np.where(active, arg, 0.0)))
    ds = np.where(active, -target, 0.0) * (1.0 - f * f)
    return loss, arg, ds


def _scatter_pair_grad(dZl, dZr, Zl, Zr, pairs, ds):
    i, j = pairs[:, 0], pairs[:, 1]
    np.add.at(dZl, i, ds[:, None] * Zr[j])
    np.add.at(dZr, j, ds[:, None] * Zl[i])


def _forward_backward(model: DistillerModel, batch: Batch, margin: float, need_grad: bool = True):
    X = batch.X
    HS, ZS = _encode_cache(model.enc_S, X)
    HA, ZA = _encode_cache(model.enc_A, X)
    dZS = np.zeros_like(ZS)
    dZA = np.zeros_like(ZA)
    kinks: list[np.ndarray] = []

    L_S = 0.0
    for pairs, target in ((batch.syn_pos, 1.0), (batch.syn_neg, -1.0)):
        if len(pairs):
            loss, arg, ds = _hinge_block(ZS, ZS, pairs, target, margin)
            L_S += loss
            kinks.append(np.abs(arg))
            if need_grad:
                _scatter_pair_grad(dZS, dZS, ZS, ZS, pairs, ds)

    L_A = 0.0
    for pairs, target in ((batch.ant_pos, 1.0), (batch.ant_neg, -1.0)):
        if len(pairs):
            loss, arg, ds = _hinge_block(ZA, ZS, pairs, target, margin)
            L_A += loss
            kinks.append(np.abs(arg))
            if need_grad:
                _scatter_pair_grad(dZA, dZS, ZA, ZS, pairs, ds)

    grads: dict[str, np.ndarray] = {}
    L_M = 0.0
    if len(batch.labeled):
        i, j = batch.labeled[:, 0], batch.labeled[:, 1]
        syn, n_si, n_sj, ok_s = _rowwise_cosine(ZS[i], ZS[j])
        c1, n1a, n1b, ok1 = _rowwise_cosine(ZA[i], ZS[j])
        c2, n2a, n2b, ok2 = _rowwise_cosine(ZA[j], ZS[i])
        first = c1 >= c2  # ties route to the first argument
        ant = np.where(first, c1, c2)
        kinks.append(np.abs(c1 - c2))
        x = np.stack([syn, ant], axis=1)
        logits = x @ model.head.W.T + model.head.b
        p = softmax(logits)
        n = len(batch.labels)
        y = batch.labels
        L_M = float(-np.mean(np.log(np.maximum(p[np.arange(n), y], 1e-300))))
        if need_grad:
            dlog = p.copy()
            dlog[np.arange(n), y] -= 1.0
            dlog /= n
            grads["head.W"] = dlog.T @ x
            grads["head.b"] = dlog.sum(axis=0)
            dx = dlog @ model.head.W
            dU, dV = _cosine_backward(ZS[i], ZS[j], syn, n_si, n_sj, ok_s, dx[:, 0])
            np.add.at(dZS, i, dU)
            np.add.at(dZS, j, dV)
            dant = dx[:, 1]
            dU, dV = _cosine_backward(ZA[i], ZS[j], c1, n1a, n1b, ok1, np.where(first, dant, 0.0))
            np.add.at(dZA, i, dU)
            np.add.at(dZS, j, dV)
            dU, dV = _cosine_backward(ZA[j], ZS[i], c2, n2a, n2b, ok2, np.where(first, 0.0, dant))
            np.add.at(dZA, j, dU)
            np.add.at(dZS, i, dV)
    elif need_grad:
        grads["head.W"] = np.zeros_like(model.head.W)
        grads["head.b"] = np.zeros_like(model.head.b)

    if need_grad:
        for name, (enc, H, Z, dZ) in {
            "enc_S": (model.enc_S, HS, ZS, dZS),
            "enc_A": (model.enc_A, HA, ZA, dZA),
        }.items():
            for k, g in _encode_backward(enc, X, H, Z, dZ).items():
                grads[f"{name}.{k}"] = g

    kink = float(np.min(np.concatenate(kinks))) if kinks else math.inf
    return LossTerms(L_S, L_A, L_M), grads, kink


def loss_and_grads(model: DistillerModel, batch: Batch, margin: float = 1.0) -> tuple[LossTerms, dict[str, np.ndarray]]:
    """All three loss terms and the gradient of their sum w.r.t. every parameter."""
    terms, grads, _ = _forward_backward(model, batch, margin)
    return terms, grads


def total_loss(model: DistillerModel, batch: Batch, margin: float = 1.0) -> LossTerms:
    return _forward_backward(model, batch, margin, need_grad=False)[0]


def loss_syn(model: DistillerModel, positives, negatives, margin: float = 1.0) -> float:
    """Summed synonym hinge loss over ``(vec_a, vec_b)`` pairs."""
    if not len(positives) and not len(negatives):
        return 0.0
    batch = Batch.from_vector_pairs(syn_pos=positives, syn_neg=negatives)
    return total_loss(model, batch, margin).L_S


def loss_ant(model: DistillerModel, positives, negatives, margin: float = 1.0) -> float:
    """Summed antonym hinge loss over ``(vec_a, vec_b)`` pairs."""
    if not len(positives) and not len(negatives):
        return 0.0
    batch = Batch.from_vector_pairs(ant_pos=positives, ant_neg=negatives)
    return total_loss(model, batch, margin).L_A


def loss_classifier(model: DistillerModel, pairs, labels: Sequence[int]) -> float:
    """Mean cross-entropy of the softmax head over labeled vector pairs."""
    if not len(pairs):
        raise DistillerError("empty batch")
    if len(pairs) != len(labels):
        raise DistillerError("pairs and labels differ in length")
    batch = Batch.from_vector_pairs(labeled=pairs, labels=labels)
    return total_loss(model, batch).L_M


def head_predict(model: DistillerModel, Xa: np.ndarray, Xb: np.ndarray) -> np.ndarray:
    syn, ant = score_pairs(model, Xa, Xb)
    logits = np.stack([syn, ant], axis=1) @ model.head.W.T + model.head.b
    return np.argmax(logits, axis=1)


# --------------------------------------------------------------------------
# Gradient check
# --------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param: dict[str, float]
    attempts: int
    passed: bool
    analytic: dict[str, np.ndarray] = field(repr=False, default_factory=dict)
    numeric: dict[str, np.ndarray] = field(repr=False, default_factory=dict)


def gradient_check(
    model: DistillerModel,
    batch: Batch,
    epsilon: float = 1e-5,
    tolerance: float = 1e-4,
    margin: float = 1.0,
    rng: np.random.Generator | None = None,
    params: Iterable[str] | None = None,
    max_attempts: int = 100,
    rel_floor: float = 1e-6,
) -> GradCheckReport:
    """Compare analytic gradients with central differences.

    Hinge and max terms are non-differentiable at their kinks; while any term
    sits within ``10 * epsilon`` of one, the input vectors are jittered and
    the check retried. Relative error per entry is
    ``|a - n| / max(|a|, |n|, rel_floor)``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    names = list(params) if params is not None else list(PARAM_NAMES)
    attempt = 0
    while True:
        attempt += 1
        _, grads, kink = _forward_backward(model, batch, margin)
        if kink > 10 * epsilon:
            break
        if attempt >= max_attempts:
            raise GradientCheckError(f"no kink-free batch after {max_attempts} attempts")
        batch = dataclasses.replace(batch, X=batch.X + rng.normal(scale=1e-2, size=batch.X.shape))

    live = model.params()
    per_param: dict[str, float] = {}
    numeric: dict[str, np.ndarray] = {}
    for name in names:
        arr = live[name]
        num = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = arr[ix]
            arr[ix] = orig + epsilon
            lp = total_loss(model, batch, margin).total
            arr[ix] = orig - epsilon
            lm = total_loss(model, batch, margin).total
            arr[ix] = orig
            num[ix] = (lp - lm) / (2 * epsilon)
        ana = grads[name]
        denom = np.maximum(np.maximum(np.abs(ana), np.abs(num)), rel_floor)
        per_param[name] = float(np.max(np.abs(ana - num) / denom)) if arr.size else 0.0
        numeric[name] = num
    worst = max(per_param.values()) if per_param else 0.0
    return GradCheckReport(
        worst, per_param, attempt, worst <= tolerance, {n: grads[n] for n in names}, numeric
    )


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            p -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


@dataclass
class EpochRecord:
    epoch: int
    L_S: float
    L_A: float
    L_M: float
    dev_P: float
    dev_R: float
    dev_F1: float

    @property
    def total(self) -> float:
        return self.L_S + self.L_A + self.L_M


TRACE_COLUMNS = ("epoch", "L_S", "L_A", "L_M", "dev_P", "dev_R", "dev_F1")


def write_trace(trace: Sequence[EpochRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace:
            w.writerow([r.epoch] + [repr(float(getattr(r, c))) for c in TRACE_COLUMNS[1:]])


def read_trace(path: str | Path) -> list[EpochRecord]:
    with Path(path).open(encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh, delimiter="\t"))
    return [EpochRecord(int(r["epoch"]), *(float(r[c]) for c in TRACE_COLUMNS[1:])) for r in rows]


def _macro_prf(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> tuple[float, float, float]:
    ps, rs, fs = [], [], []
    for c in range(n_classes):
        tp = np.sum((y_pred == c) & (y_true == c))
        fp = np.sum((y_pred == c) & (y_true != c))
        fn = np.sum((y_pred != c) & (y_true == c))
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        ps.append(p)
        rs.append(r)
        fs.append(2 * p * r / (p + r) if p + r else 0.0)
    return float(np.mean(ps)), float(np.mean(rs)), float(np.mean(fs))


def _cyclic(perm: np.ndarray, start: int, size: int) -> np.ndarray:
    if not len(perm):
        return perm
    return perm[(start + np.arange(size)) % len(perm)]


def train(
    table: EmbeddingTable,
    data: DatasetSplit,
    cfg: TrainConfig,
    model_config: ModelConfig | None = None,
    init_model: DistillerModel | None = None,
) -> tuple[DistillerModel, list[EpochRecord]]:
    """Mini-batch Adam on ``L_S + L_A + L_M``; returns the best-dev-epoch model.

    Each step takes ``batch_size`` synonym and ``batch_size`` (swap-augmented)
    antonym positives, their ``k_negatives`` fresh corruptions each, and the
    same positives as the labeled batch for the head. The shorter relation
    list is cycled so both appear in every step. Model selection uses
    macro-F1 of the head on ``data.dev`` (on train when dev is empty).
    """
    ss = np.random.SeedSequence(cfg.seed)
    oov_rng, sample_rng = (np.random.default_rng(s) for s in ss.spawn(2))

    train_pairs = [p for p in data.train if p.relation is not Relation.IRRELEVANT]
    ensure_words(table, _ordered_words(data.all_pairs()), oov_rng)

    if init_model is not None:
        model = init_model.copy()
    else:
        mc = model_config or ModelConfig(d=table.dim, seed=cfg.seed)
        if mc.d != table.dim:
            raise DistillerError(f"model input dim {mc.d} != embedding dim {table.dim}")
        model = DistillerModel.init(mc)
    model.train_config = dataclasses.asdict(cfg)
    trace: list[EpochRecord] = []
    if cfg.epochs == 0:
        return model, trace

    syn = [p for p in train_pairs if p.relation is Relation.SYNONYM]
    ant = augment_antonym_symmetry([p for p in train_pairs if p.relation is Relation.ANTONYM])
    vocab = pair_vocab(train_pairs)

    sel_pairs = [p for p in data.dev if p.relation is not Relation.IRRELEVANT] or train_pairs
    sel_xa = np.vstack([table.vector(p.word_a) for p in sel_pairs])
    sel_xb = np.vstack([table.vector(p.word_b) for p in sel_pairs])
    sel_y = np.array([CLASS_INDEX[p.relation] for p in sel_pairs])

    params = model.params()
    opt = Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    B, k = cfg.batch_size, cfg.k_negatives
    best_f1, best_model, stale = -math.inf, model.copy(), 0
    n_batches = max(1, math.ceil(max(len(syn), len(ant)) / B))

    for epoch in range(1, cfg.epochs + 1):
        syn_neg = corrupt_negatives(syn, vocab, k, sample_rng) if syn else []
        ant_neg = corrupt_negatives(ant, vocab, k, sample_rng) if ant else []
        syn_perm = sample_rng.permutation(len(syn))
        ant_perm = sample_rng.permutation(len(ant))
        sums = np.zeros(3)
        for bi in range(n_batches):
            s_idx = _cyclic(syn_perm, bi * B, min(B, len(syn)))
            a_idx = _cyclic(ant_perm, bi * B, min(B, len(ant)))
            sp = [(syn[i].word_a, syn[i].word_b) for i in s_idx]
            sn = [syn_neg[i * k + r] for i in s_idx for r in range(k)]
            ap = [(ant[i].word_a, ant[i].word_b) for i in a_idx]
            an = [ant_neg[i * k + r] for i in a_idx for r in range(k)]
            labels = [CLASS_INDEX[Relation.SYNONYM]] * len(sp) + [CLASS_INDEX[Relation.ANTONYM]] * len(ap)
            batch = Batch.from_words(table, sp, sn, ap, an, sp + ap, labels)
            terms, grads = loss_and_grads(model, batch, cfg.margin)
            for name, val in (("L_S", terms.L_S), ("L_A", terms.L_A), ("L_M", terms.L_M)):
                if not math.isfinite(val):
                    raise TrainingDivergedError(f"non-finite {name}={val} at epoch {epoch}, batch {bi}")
            opt.step(params, grads)
            sums += (terms.L_S, terms.L_A, terms.L_M)
        means = sums / n_batches
        pred = head_predict(model, sel_xa, sel_xb)
        P, R, F1 = _macro_prf(sel_y, pred, 2)
        trace.append(EpochRecord(epoch, *map(float, means), P, R, F1))
        logger.debug("epoch %d loss %.6f dev F1 %.4f", epoch, means.sum(), F1)
        if F1 >= best_f1:
            best_f1, best_model, stale = F1, model.copy(), 0
        else:
            stale += 1
            if stale > cfg.patience:
                logger.info("early stop at epoch %d (best dev F1 %.4f)", epoch, best_f1)
                break
    best_model.train_config = model.train_config
    return best_model, trace


def _ordered_words(pairs: Iterable[LabeledPair]) -> list[str]:
    seen: dict[str, None] = {}
    for p in pairs:
        seen.setdefault(p.word_a)
        seen.setdefault(p.word_b)
    return list(seen)


def project(model: DistillerModel, X: np.ndarray, space: str) -> np.ndarray:
    space = space.upper()
    if space == "SYN":
        return encode(model.enc_S, X)
    if space == "ANT":
        return encode(model.enc_A, X)
    raise DistillerError(f"unknown space {space!r}")


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------


def save_model(model: DistillerModel, path: str | Path) -> None:
    """Write an ``.npz`` holding every parameter plus a JSON ``__meta__`` record."""
    meta = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": dataclasses.asdict(model.config),
        "train_config": model.train_config,
        "params": list(PARAM_NAMES),
    }
    arrays = {"__meta__": np.array(json.dumps(meta, sort_keys=True))}
    arrays.update((k, np.ascontiguousarray(v)) for k, v in model.params().items())
    buf = io.BytesIO()
    # hand-rolled npz: fixed entry timestamps keep reruns byte-identical
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            arr_buf = io.BytesIO()
            np.lib.format.write_array(arr_buf, arr, allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0)), arr_buf.getvalue())
    Path(path).write_bytes(buf.getvalue())


def load_model(path: str | Path) -> DistillerModel:
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["__meta__"]))
            arrays = {k: z[k].astype(np.float64) for k in PARAM_NAMES}
    except FileNotFoundError:
        raise
    except (zipfile.BadZipFile, EOFError, OSError, KeyError, ValueError) as exc:
        raise ModelFormatError(f"{path}: unreadable model file ({exc})") from None
    if meta.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: not a distiller model")
    if meta.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"{path}: format version {meta.get('version')} unsupported (want {MODEL_VERSION})")
    cfg = ModelConfig(**meta["config"])
    expected = {
        "W1": (cfg.h1, cfg.d), "b1": (cfg.h1,), "W2": (cfg.m, cfg.h1), "b2": (cfg.m,),
    }
    for enc in ("enc_S", "enc_A"):
        for f, shp in expected.items():
            if arrays[f"{enc}.{f}"].shape != shp:
                raise ModelFormatError(f"{path}: {enc}.{f} has shape {arrays[f'{enc}.{f}'].shape}, want {shp}")
    if arrays["head.W"].shape != (cfg.n_classes, 2) or arrays["head.b"].shape != (cfg.n_classes,):
        raise ModelFormatError(f"{path}: head shape mismatch")

    def enc(name):
        return EncoderParams(*(arrays[f"{name}.{f}"] for f in ("W1", "b1", "W2", "b2")))

    return DistillerModel(
        enc("enc_S"), enc("enc_A"), SoftmaxHead(arrays["head.W"], arrays["head.b"]), cfg, meta.get("train_config", {})
    )
