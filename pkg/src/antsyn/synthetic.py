"""Planted-relation fixtures: clustered vocabularies with known synonym/antonym structure."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingTable, save_table
from .lexicon import Category, DatasetSplit, LabeledPair, Relation, write_pairs


@dataclass
class PlantedTask:
    table: EmbeddingTable
    split: DatasetSplit
    clusters: list[list[str]]
    antonym_clusters: list[tuple[int, int]]

    def cluster_of(self) -> dict[str, int]:
        return {w: ci for ci, ws in enumerate(self.clusters) for w in ws}

    def is_antonym(self, a: str, b: str) -> bool:
        c = self.cluster_of()
        pair = tuple(sorted((c[a], c[b])))
        return pair in {tuple(sorted(x)) for x in self.antonym_clusters}


def planted_task(
    n_clusters: int = 10,
    cluster_size: int = 6,
    dim: int = 50,
    test_frac: float = 0.2,
    dev_frac: float = 0.1,
    seed: int = 0,
    category: Category = Category.UNSPECIFIED,
) -> PlantedTask:
    """Synonyms are all within-cluster pairs; antonyms link cluster ``2i`` with ``2i+1``.

    Input vectors are i.i.d. standard normal, so any structure the model
    recovers comes from the labeled pairs alone. Pairs are shuffled and cut
    into train/dev/test by ``dev_frac`` and ``test_frac``.
    """
    if n_clusters % 2:
        raise ValueError("n_clusters must be even so every cluster has an antonym partner")
    rng = np.random.default_rng(seed)
    width = len(str(n_clusters * cluster_size - 1))
    clusters = [
        [f"w{ci * cluster_size + j:0{width}d}" for j in range(cluster_size)] for ci in range(n_clusters)
    ]
    links = [(2 * i, 2 * i + 1) for i in range(n_clusters // 2)]
    pairs: list[LabeledPair] = []
    for ws in clusters:
        for a, b in itertools.combinations(ws, 2):
            pairs.append(LabeledPair(a, b, Relation.SYNONYM, category))
    for ci, cj in links:
        for a in clusters[ci]:
            for b in clusters[cj]:
                pairs.append(LabeledPair(a, b, Relation.ANTONYM, category))
    order = rng.permutation(len(pairs))
    # randomise orientation too, so antonym pairs do not all point one way
    pairs = [pairs[i] if rng.random() < 0.5 else pairs[i].swapped() for i in order]
    n_test = int(round(test_frac * len(pairs)))
    n_dev = int(round(dev_frac * len(pairs)))
    test, dev, train = pairs[:n_test], pairs[n_test:n_test + n_dev], pairs[n_test + n_dev:]
    words = [w for ws in clusters for w in ws]
    table = EmbeddingTable(words, rng.standard_normal((len(words), dim)), seed=seed)
    return PlantedTask(table, DatasetSplit(train, dev, test), clusters, links)


def write_fixture(task: PlantedTask, out_dir: str | Path, category: str = "adjective") -> Path:
    """Write ``embeddings.txt`` and ``pairs/<category>_<split>.tsv`` under ``out_dir``."""
    out_dir = Path(out_dir)
    pairs_dir = out_dir / "pairs"
    pairs_dir.mkdir(parents=True, exist_ok=True)
    save_table(task.table, out_dir / "embeddings.txt")
    for split in ("train", "dev", "test"):
        write_pairs(getattr(task.split, split), pairs_dir / f"{category}_{split}.tsv")
    return out_dir


def toy_fixture_dir() -> Path:
    """The bundled 40-word fixture (8 clusters of 5, 20-d inputs, adjective split)."""
    return Path(__file__).parent / "data" / "toy"
