"""Pre-trained word vectors: loading, OOV seeding, random control tables."""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Iterable

import numpy as np

logger = logging.getLogger(__name__)

#: Norm below which a vector is treated as degenerate by :func:`cosine`.
COSINE_EPS = 1e-12


class EmbeddingError(ValueError):
    """Raised for malformed embedding files or invalid table operations."""


class EmbeddingTable:
    """Vocabulary plus a dense ``|V| x d`` float64 matrix.

    Rows may be appended by :func:`lookup_or_init`; nothing else mutates the
    table after construction.
    """

    def __init__(self, words: Iterable[str], vectors: np.ndarray, seed: int | None = None):
        vectors = np.array(vectors, dtype=np.float64, copy=True)
        if vectors.ndim != 2 or vectors.shape[1] == 0:
            raise EmbeddingError(f"vectors must be a non-empty 2-d matrix, got shape {vectors.shape}")
        words = list(words)
        if len(words) != vectors.shape[0]:
            raise EmbeddingError(f"{len(words)} words but {vectors.shape[0]} rows")
        if not np.all(np.isfinite(vectors)):
            raise EmbeddingError("non-finite entries in embedding matrix")
        self.vocab: dict[str, int] = {}
        for w in words:
            if w in self.vocab:
                raise EmbeddingError(f"duplicate word {w!r}")
            self.vocab[w] = len(self.vocab)
        self.dim = vectors.shape[1]
        self.seed = seed
        self.oov_seeded: set[str] = set()
        self._rows = vectors
        self._extra: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, word: str) -> bool:
        return word in self.vocab

    @property
    def words(self) -> list[str]:
        return list(self.vocab)

    @property
    def vectors(self) -> np.ndarray:
        if self._extra:
            self._rows = np.vstack([self._rows, *self._extra])
            self._extra = []
        return self._rows

    def vector(self, word: str) -> np.ndarray:
        return self.vectors[self.vocab[word]]

    def _append(self, word: str, vec: np.ndarray) -> None:
        self.vocab[word] = len(self.vocab)
        self._extra.append(vec[None, :])


def _parse_floats(tokens: list[str], lineno: int) -> np.ndarray:
    try:
        vec = np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError as exc:
        raise EmbeddingError(f"line {lineno}: {exc}") from None
    if not np.all(np.isfinite(vec)):
        raise EmbeddingError(f"line {lineno}: non-finite value")
    return vec


def _is_header(tokens: list[str]) -> bool:
    return len(tokens) == 2 and all(t.isdigit() for t in tokens)


def load_embeddings(
    path: str | Path,
    expected_dim: int | None = None,
    restrict_to: set[str] | None = None,
) -> EmbeddingTable:
    """Read a GloVe/word2vec-text embedding file.

    A first line made of exactly two integers is taken as an ``N d`` header.
    Duplicate words keep their first row. ``restrict_to`` drops every word
    outside the given set, which keeps memory bounded for large dumps; the
    dimension check still runs on every line.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    words: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    dim = expected_dim
    first = True
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            tokens = line.split()
            if first:
                first = False
                if _is_header(tokens):
                    hdim = int(tokens[1])
                    if dim is not None and hdim != dim:
                        raise EmbeddingError(f"line {lineno}: header dim {hdim} != expected {dim}")
                    dim = hdim
                    continue
            word, values = tokens[0], tokens[1:]
            if dim is None:
                if not values:
                    raise EmbeddingError(f"line {lineno}: no vector components")
                dim = len(values)
            if len(values) != dim:
                raise EmbeddingError(f"line {lineno}: expected {dim} components, got {len(values)}")
            if restrict_to is not None and word not in restrict_to:
                continue
            if word in seen:
                logger.warning("duplicate word %r at line %d ignored", word, lineno)
                continue
            rows.append(_parse_floats(values, lineno))
            words.append(word)
            seen.add(word)
    if dim is None:
        raise EmbeddingError(f"{path}: no embedding records")
    if not rows:
        # only reachable through restrict_to; OOV seeding fills the table later
        if restrict_to is None:
            raise EmbeddingError(f"{path}: no embedding records")
        return EmbeddingTable([], np.zeros((0, dim)))
    return EmbeddingTable(words, np.vstack(rows))


def _uniform_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    bound = 0.5 / d
    return rng.uniform(-bound, bound, size=(n, d))


def lookup_or_init(table: EmbeddingTable, word: str, rng: np.random.Generator) -> np.ndarray:
    """Return the row for ``word``; unseen words get a fresh U[-0.5/d, 0.5/d] row."""
    idx = table.vocab.get(word)
    if idx is not None:
        return table.vectors[idx]
    vec = _uniform_rows(rng, 1, table.dim)[0]
    table._append(word, vec)
    table.oov_seeded.add(word)
    return vec


def ensure_words(table: EmbeddingTable, words: Iterable[str], rng: np.random.Generator) -> None:
    """Seed every missing word, in the order given."""
    for w in words:
        if w not in table.vocab:
            lookup_or_init(table, w, rng)


def make_random_table(words: list[str], d: int, seed: int) -> EmbeddingTable:
    """Control condition: i.i.d. uniform vectors in place of pre-trained ones."""
    if not words:
        raise EmbeddingError("word list is empty")
    if d <= 0:
        raise EmbeddingError(f"dimension must be positive, got {d}")
    unique = list(dict.fromkeys(words))
    rng = np.random.default_rng(seed)
    return EmbeddingTable(unique, _uniform_rows(rng, len(unique), d), seed=seed)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; 0.0 when either vector has norm below 1e-12."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise EmbeddingError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu < COSINE_EPS or nv < COSINE_EPS:
        return 0.0
    # dot is commutative bitwise for IEEE multiply; the norm product is
    # ordered canonically so swapping arguments cannot change the result.
    lo, hi = (nu, nv) if nu <= nv else (nv, nu)
    return float(np.clip(np.dot(u, v) / (lo * hi), -1.0, 1.0))


def save_table(table: EmbeddingTable, path: str | Path) -> None:
    """Write the table in the input text format plus a ``.meta.json`` sidecar."""
    path = Path(path)
    vecs = table.vectors
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for word, idx in table.vocab.items():
            fh.write(word + " " + " ".join(repr(float(x)) for x in vecs[idx]) + "\n")
    meta = {
        "dim": table.dim,
        "seed": table.seed,
        "oov_seeded": sorted(table.oov_seeded),
    }
    meta_path(path).write_text(json.dumps(meta, indent=2), encoding="utf-8")


def meta_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def load_table(path: str | Path) -> EmbeddingTable:
    """Inverse of :func:`save_table`; the sidecar is optional."""
    table = load_embeddings(path)
    mp = meta_path(path)
    if mp.exists():
        meta = json.loads(mp.read_text(encoding="utf-8"))
        if meta.get("dim") != table.dim:
            raise EmbeddingError(f"{mp}: dim {meta.get('dim')} does not match file dim {table.dim}")
        table.seed = meta.get("seed")
        table.oov_seeded = set(meta.get("oov_seeded", []))
    return table
