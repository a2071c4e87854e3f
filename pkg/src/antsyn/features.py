"""Phase-II pair features: distilled scores, distributional cosine, negation prefix."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .distiller import DistillerModel, encode, score_arrays, scores
from .embeddings import EmbeddingTable, cosine, ensure_words, lookup_or_init
from .lexicon import LabeledPair

NEGATION_PREFIXES = (
    "de", "a", "un", "non", "in", "ir", "anti", "il", "dis", "counter", "im", "an", "sub", "ab",
)

FEATURE_GROUPS = ("distiller", "distributional", "prefix")
FEATURE_NAMES = ("synonymy", "antonymy", "distributional", "prefix")


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureMask:
    """Which feature groups are live; disabled columns are forced to 0."""

    distiller: bool = True
    distributional: bool = True
    prefix: bool = True

    def __post_init__(self):
        if not (self.distiller or self.distributional or self.prefix):
            raise FeatureError("feature mask enables no feature")

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "FeatureMask":
        names = set(names)
        unknown = names - set(FEATURE_GROUPS)
        if unknown:
            raise FeatureError(f"unknown feature group(s): {sorted(unknown)}")
        return cls(*(g in names for g in FEATURE_GROUPS))

    @property
    def names(self) -> list[str]:
        return [g for g in FEATURE_GROUPS if getattr(self, g)]

    def column_mask(self) -> np.ndarray:
        return np.array([self.distiller, self.distiller, self.distributional, self.prefix])

    def label(self) -> str:
        return "+".join(self.names)


@dataclass(frozen=True)
class PairFeatures:
    synonymy: float
    antonymy: float
    distributional: float
    prefix: int

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


def prefix_feature(a: str, b: str) -> int:
    """1 when one word is a negation prefix glued onto the other."""
    for p in NEGATION_PREFIXES:
        if a == p + b or b == p + a:
            return 1
    return 0


def build_features(
    model: DistillerModel,
    table: EmbeddingTable,
    a: str,
    b: str,
    mask: FeatureMask = FeatureMask(),
    rng: np.random.Generator | None = None,
) -> PairFeatures:
    """Features for one pair. Unknown words are seeded into ``table`` from ``rng``."""
    rng = rng if rng is not None else np.random.default_rng(0)
    va = lookup_or_init(table, a, rng)
    vb = lookup_or_init(table, b, rng)
    syn, ant = scores(model, va, vb) if mask.distiller else (0.0, 0.0)
    dist = cosine(va, vb) if mask.distributional else 0.0
    pre = prefix_feature(a, b) if mask.prefix else 0
    return PairFeatures(syn, ant, dist, pre)


def feature_matrix(
    model: DistillerModel,
    table: EmbeddingTable,
    pairs: Sequence[LabeledPair] | Sequence[tuple[str, str]],
    mask: FeatureMask = FeatureMask(),
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Vectorised :func:`build_features`; rows follow ``pairs``, columns :data:`FEATURE_NAMES`."""
    rng = rng if rng is not None else np.random.default_rng(0)
    ab = [(p.word_a, p.word_b) if isinstance(p, LabeledPair) else tuple(p) for p in pairs]
    ensure_words(table, (w for pair in ab for w in pair), rng)
    out = np.zeros((len(ab), 4))
    if not ab:
        return out
    # project each distinct word once so (a, b) and (b, a) see identical rows
    local = {w: i for i, w in enumerate(dict.fromkeys(w for pair in ab for w in pair))}
    X = table.vectors[[table.vocab[w] for w in local]]
    ia = np.array([local[a] for a, _ in ab])
    ib = np.array([local[b] for _, b in ab])
    Xa, Xb = X[ia], X[ib]
    if mask.distiller:
        ZS, ZA = encode(model.enc_S, X), encode(model.enc_A, X)
        out[:, 0], out[:, 1] = score_arrays(ZS[ia], ZA[ia], ZS[ib], ZA[ib])
    if mask.distributional:
        out[:, 2] = [cosine(x, y) for x, y in zip(Xa, Xb)]
    if mask.prefix:
        out[:, 3] = [prefix_feature(a, b) for a, b in ab]
    return out


def write_feature_dump(pairs: Sequence[LabeledPair], X: np.ndarray, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(("word_a", "word_b", *FEATURE_NAMES, "label"))
        for p, row in zip(pairs, X):
            w.writerow((p.word_a, p.word_b, *(repr(float(v)) for v in row[:3]), int(row[3]), p.relation.value))
