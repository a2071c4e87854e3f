"""Metrics, reports, and nearest-neighbour queries in the distilled spaces."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifier import predict_matrix
from .distiller import DistillerModel, project, _rowwise_cosine
from .embeddings import EmbeddingTable, lookup_or_init
from .features import FeatureMask, feature_matrix
from .lexicon import CLASS_INDEX, CLASS_ORDER, LabeledPair, Relation

logger = logging.getLogger(__name__)

REPORT_VERSION = 1


class EvaluationError(ValueError):
    pass


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class CategoryReport:
    classes: dict[str, ClassMetrics]
    macro: ClassMetrics
    confusion: list[list[int]]  # rows: true class, cols: predicted class
    n: int
    accuracy: float


@dataclass
class EvalReport:
    class_names: list[str]
    categories: dict[str, CategoryReport]
    primary_class: str = "antonym"
    metadata: dict = field(default_factory=dict)

    def primary(self, category: str = "all") -> ClassMetrics:
        return self.categories[category].classes[self.primary_class]

    def macro(self, category: str = "all") -> ClassMetrics:
        return self.categories[category].macro

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "class_names": self.class_names,
            "primary_class": self.primary_class,
            "metadata": self.metadata,
            "categories": {k: asdict(v) for k, v in self.categories.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        out = []
        header = f"{'category':<12} {'class':<11} {'P':>6} {'R':>6} {'F1':>6} {'support':>8}"
        out.append(header)
        out.append("-" * len(header))
        for cat, rep in self.categories.items():
            rows = [(c, m) for c, m in rep.classes.items()] + [("macro", rep.macro)]
            for name, m in rows:
                out.append(f"{cat:<12} {name:<11} {m.precision:6.3f} {m.recall:6.3f} {m.f1:6.3f} {m.support:8d}")
        return "\n".join(out) + "\n"

    def save(self, json_path: str | Path, text_path: str | Path | None = None) -> None:
        Path(json_path).write_text(self.to_json() + "\n", encoding="utf-8")
        if text_path is not None:
            Path(text_path).write_text(self.to_text(), encoding="utf-8")


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def metrics_from_confusion(cm: np.ndarray) -> list[ClassMetrics]:
    out = []
    for c in range(cm.shape[0]):
        tp = int(cm[c, c])
        pred = int(cm[:, c].sum())
        true = int(cm[c, :].sum())
        p = tp / pred if pred else 0.0
        r = tp / true if true else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        out.append(ClassMetrics(p, r, f1, true))
    return out


def _category_report(y_true, y_pred, class_names) -> CategoryReport:
    C = len(class_names)
    cm = confusion_matrix(y_true, y_pred, C)
    per = metrics_from_confusion(cm)
    macro = ClassMetrics(
        float(np.mean([m.precision for m in per])),
        float(np.mean([m.recall for m in per])),
        float(np.mean([m.f1 for m in per])),
        int(cm.sum()),
    )
    n = int(cm.sum())
    acc = float(np.trace(cm) / n) if n else 0.0
    return CategoryReport(dict(zip(class_names, per)), macro, cm.tolist(), n, acc)


def report_from_predictions(
    pairs: Sequence[LabeledPair],
    y_pred: Sequence[int],
    n_classes: int,
    primary_class: str = "antonym",
    metadata: dict | None = None,
) -> EvalReport:
    if not pairs:
        raise EvaluationError("empty test set")
    class_names = [r.value for r in CLASS_ORDER[:n_classes]]
    y_true = np.array([CLASS_INDEX[p.relation] for p in pairs])
    y_pred = np.asarray(y_pred)
    if y_true.max() >= n_classes:
        raise EvaluationError("test pairs carry labels outside the classifier's classes")
    cats: dict[str, CategoryReport] = {}
    names = sorted({p.category.value for p in pairs})
    for cat in names:
        sel = np.array([p.category.value == cat for p in pairs])
        cats[cat] = _category_report(y_true[sel], y_pred[sel], class_names)
    if len(names) > 1 or "all" not in cats:
        cats["all"] = _category_report(y_true, y_pred, class_names)
    return EvalReport(class_names, cats, primary_class, dict(metadata or {}))


def assert_disjoint(train_pairs: Sequence[LabeledPair], test_pairs: Sequence[LabeledPair]) -> None:
    overlap = {p.key for p in train_pairs} & {p.key for p in test_pairs}
    if overlap:
        raise EvaluationError(f"{len(overlap)} test pair(s) also occur in training, e.g. {sorted(next(iter(overlap)))}")


def evaluate(
    forest,
    model: DistillerModel,
    table: EmbeddingTable,
    test_pairs: Sequence[LabeledPair],
    mask: FeatureMask,
    train_pairs: Sequence[LabeledPair] = (),
    primary_class: str = "antonym",
    metadata: dict | None = None,
    rng: np.random.Generator | None = None,
) -> EvalReport:
    """Classify ``test_pairs`` with the Phase-II classifier and score per category."""
    if not test_pairs:
        raise EvaluationError("empty test set")
    assert_disjoint(train_pairs, test_pairs)
    X = feature_matrix(model, table, test_pairs, mask, rng)
    y_pred, _ = predict_matrix(forest, X, mask)
    meta = {"features": mask.label(), **(metadata or {})}
    return report_from_predictions(test_pairs, y_pred, forest.n_classes, primary_class, meta)


def neighbors(
    model: DistillerModel,
    table: EmbeddingTable,
    word: str,
    space: str = "SYN",
    top_k: int = 5,
    rng: np.random.Generator | None = None,
) -> list[tuple[str, float]]:
    """Exhaustive ranking of the vocabulary around ``word`` in one distilled space.

    SYN ranks by synonymy score, ANT by antonymy score. The query is excluded
    and ties break by word order.
    """
    if top_k < 1:
        raise EvaluationError("top_k must be >= 1")
    lookup_or_init(table, word, rng if rng is not None else np.random.default_rng(0))
    space = space.upper()
    X = table.vectors
    q = table.vocab[word]
    ZS = project(model, X, "SYN")
    if space == "SYN":
        s = _rowwise_cosine(np.broadcast_to(ZS[q], ZS.shape), ZS)[0]
    elif space == "ANT":
        ZA = project(model, X, "ANT")
        c1 = _rowwise_cosine(np.broadcast_to(ZA[q], ZA.shape), ZS)[0]
        c2 = _rowwise_cosine(ZA, np.broadcast_to(ZS[q], ZS.shape))[0]
        s = np.maximum(c1, c2)
    else:
        raise EvaluationError(f"unknown space {space!r}")
    words = table.words
    cands = sorted((i for i in range(len(words)) if i != q), key=lambda i: (-s[i], words[i]))
    if top_k > len(cands):
        logger.warning("top_k=%d exceeds %d candidates; list truncated", top_k, len(cands))
    return [(words[i], float(s[i])) for i in cands[:top_k]]
