"""Labeled word pairs, dataset splits, and training-time augmentation."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    """Malformed pair files or impossible sampling requests."""


class Relation(str, enum.Enum):
    SYNONYM = "synonym"
    ANTONYM = "antonym"
    IRRELEVANT = "irrelevant"


class Category(str, enum.Enum):
    NOUN = "noun"
    VERB = "verb"
    ADJECTIVE = "adjective"
    UNSPECIFIED = "unspecified"


#: Class index used by every classifier in the package.
CLASS_INDEX = {Relation.SYNONYM: 0, Relation.ANTONYM: 1, Relation.IRRELEVANT: 2}
CLASS_ORDER = [Relation.SYNONYM, Relation.ANTONYM, Relation.IRRELEVANT]

_LABEL_TOKENS = {
    "synonym": Relation.SYNONYM,
    "syn": Relation.SYNONYM,
    "0": Relation.SYNONYM,
    "antonym": Relation.ANTONYM,
    "ant": Relation.ANTONYM,
    "1": Relation.ANTONYM,
    "irrelevant": Relation.IRRELEVANT,
}


@dataclass(frozen=True)
class LabeledPair:
    word_a: str
    word_b: str
    relation: Relation
    category: Category = Category.UNSPECIFIED

    def __post_init__(self):
        if self.word_a == self.word_b:
            raise DatasetError(f"pair words must differ, got {self.word_a!r} twice")
        object.__setattr__(self, "relation", Relation(self.relation))
        object.__setattr__(self, "category", Category(self.category))

    @property
    def key(self) -> frozenset:
        """Unordered identity of the pair."""
        return frozenset((self.word_a, self.word_b))

    def swapped(self) -> "LabeledPair":
        return LabeledPair(self.word_b, self.word_a, self.relation, self.category)


@dataclass
class DatasetSplit:
    train: list[LabeledPair]
    dev: list[LabeledPair] = field(default_factory=list)
    test: list[LabeledPair] = field(default_factory=list)

    def __post_init__(self):
        names = ("train", "dev", "test")
        keys = [{p.key for p in getattr(self, n)} for n in names]
        for i in range(3):
            for j in range(i + 1, 3):
                overlap = keys[i] & keys[j]
                if overlap:
                    example = sorted(next(iter(overlap)))
                    raise DatasetError(
                        f"{names[i]} and {names[j]} share {len(overlap)} pair(s), e.g. {example}"
                    )

    @property
    def vocab(self) -> set[str]:
        return pair_vocab(self.train)

    def all_pairs(self) -> list[LabeledPair]:
        return [*self.train, *self.dev, *self.test]


def pair_vocab(pairs: Iterable[LabeledPair]) -> set[str]:
    out: set[str] = set()
    for p in pairs:
        out.add(p.word_a)
        out.add(p.word_b)
    return out


def parse_label(token: str) -> Relation:
    try:
        return _LABEL_TOKENS[token.strip().lower()]
    except KeyError:
        raise DatasetError(f"unknown label {token!r}") from None


def load_pairs(path: str | Path, category: Category | str = Category.UNSPECIFIED) -> list[LabeledPair]:
    """Parse a ``word_a<TAB>word_b<TAB>label`` file, keeping file order."""
    pairs, _ = _read_tsv(path, Category(category), allow_split_column=False)
    return pairs


def load_pairs_with_splits(path: str | Path) -> dict[tuple[Category, str], list[LabeledPair]]:
    """Read a 5-column ``word_a word_b label category split`` file."""
    pairs, splits = _read_tsv(path, Category.UNSPECIFIED, allow_split_column=True)
    out: dict[tuple[Category, str], list[LabeledPair]] = {}
    for p, s in zip(pairs, splits):
        out.setdefault((p.category, s), []).append(p)
    return out


def _read_tsv(path, category, allow_split_column):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    pairs: list[LabeledPair] = []
    splits: list[str] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            cols = [c.strip() for c in line.split("\t")]
            if len(cols) < 3:
                raise DatasetError(f"{path}:{lineno}: expected at least 3 tab-separated fields, got {len(cols)}")
            try:
                rel = parse_label(cols[2])
                cat = category
                if len(cols) >= 5:
                    if not allow_split_column:
                        raise DatasetError("5-column rows need load_pairs_with_splits")
                    cat = Category(cols[3].lower())
                    splits.append(cols[4].lower())
                elif allow_split_column:
                    raise DatasetError("expected 5 columns (word_a, word_b, label, category, split)")
                pairs.append(LabeledPair(cols[0], cols[1], rel, cat))
            except (DatasetError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
    return pairs, splits


def write_pairs(pairs: Sequence[LabeledPair], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(f"{p.word_a}\t{p.word_b}\t{p.relation.value}\n")


def augment_antonym_symmetry(pairs: Sequence[LabeledPair]) -> list[LabeledPair]:
    """Append ``(b, a)`` for each antonym ``(a, b)`` not already present."""
    out = list(pairs)
    present = {(p.word_a, p.word_b, p.relation) for p in pairs}
    for p in pairs:
        if p.relation is not Relation.ANTONYM:
            continue
        s = p.swapped()
        ident = (s.word_a, s.word_b, s.relation)
        if ident not in present:
            present.add(ident)
            out.append(s)
    return out


def corrupt_negatives(
    pairs: Sequence[LabeledPair] | Sequence[tuple[str, str]],
    vocab: Iterable[str],
    k: int,
    rng: np.random.Generator,
) -> list[tuple[str, str]]:
    """``k`` corruptions per pair, each replacing one randomly chosen side.

    A replacement is redrawn while it reproduces the original pair or makes
    both sides equal. Output is pair-major: the ``k`` negatives of pair ``i``
    occupy ``[i*k, (i+1)*k)``.
    """
    if k < 1:
        raise DatasetError(f"k must be >= 1, got {k}")
    words = sorted(set(vocab))
    if len(words) < 3:
        raise DatasetError(f"vocabulary of {len(words)} words is too small for corruption")
    out: list[tuple[str, str]] = []
    n = len(words)
    for p in pairs:
        a, b = (p.word_a, p.word_b) if isinstance(p, LabeledPair) else p
        for _ in range(k):
            side = int(rng.integers(2))
            while True:
                w = words[int(rng.integers(n))]
                cand = (w, b) if side == 0 else (a, w)
                if cand[0] != cand[1] and cand != (a, b):
                    break
            out.append(cand)
    return out


def synthesize_irrelevant(
    pairs: Sequence[LabeledPair],
    vocab: Iterable[str],
    rng: np.random.Generator,
    exclude: Iterable[LabeledPair] = (),
) -> list[LabeledPair]:
    """Draw ``len(pairs)`` random word pairs labeled irrelevant.

    No output collides, in either order, with an input pair, a pair in
    ``exclude``, or another output pair. Category is inherited round-robin
    from the input so per-category evaluation stays balanced.
    """
    if not pairs:
        raise DatasetError("cannot synthesize irrelevant pairs for an empty pair list")
    words = sorted(set(vocab))
    n_target = len(pairs)
    taken = {p.key for p in pairs} | {p.key for p in exclude}
    budget = 100 * n_target
    out: list[LabeledPair] = []
    draws = 0
    while len(out) < n_target:
        if draws >= budget or len(words) < 2:
            raise DatasetError(
                f"could only synthesize {len(out)} of {n_target} irrelevant pairs from {len(words)} words"
            )
        draws += 1
        i, j = rng.integers(len(words), size=2)
        if i == j:
            continue
        key = frozenset((words[i], words[j]))
        if key in taken:
            continue
        taken.add(key)
        cat = pairs[len(out) % len(pairs)].category
        out.append(LabeledPair(words[i], words[j], Relation.IRRELEVANT, cat))
    return out
