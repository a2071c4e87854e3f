"""End-to-end training: Distiller, then the Phase-II classifier on the same train pairs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import classifier as clf_mod
from .baseline import PivotSet, baseline_matrix, fit_pivots
from .distiller import DistillerModel, EpochRecord, ModelConfig, TrainConfig, train
from .embeddings import EmbeddingTable
from .evaluation import EvalReport, evaluate, report_from_predictions
from .features import FeatureMask, feature_matrix
from .lexicon import CLASS_INDEX, DatasetSplit, Relation, pair_vocab, synthesize_irrelevant


@dataclass
class PipelineResult:
    model: DistillerModel
    forest: clf_mod.BoostedForest
    trace: list[EpochRecord]
    mask: FeatureMask
    split: DatasetSplit
    report: EvalReport | None = None


def with_irrelevant(split: DatasetSplit, seed: int) -> DatasetSplit:
    """Add one irrelevant pair per labeled pair to every split.

    Each split samples from its own word set; no synthesized pair collides
    with a labeled pair of any split.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    labeled = [p for p in split.all_pairs() if p.relation is not Relation.IRRELEVANT]
    out = {}
    made = []
    for name in ("train", "dev", "test"):
        pairs = [p for p in getattr(split, name) if p.relation is not Relation.IRRELEVANT]
        if not pairs:
            out[name] = list(pairs)
            continue
        extra = synthesize_irrelevant(pairs, pair_vocab(pairs), rng, exclude=labeled + made)
        made.extend(extra)
        out[name] = pairs + extra
    return DatasetSplit(**out)


def run_pipeline(
    table: EmbeddingTable,
    split: DatasetSplit,
    train_cfg: TrainConfig = TrainConfig(),
    boost: clf_mod.BoostParams = clf_mod.BoostParams(),
    mask: FeatureMask = FeatureMask(),
    n_classes: int = 2,
    h1: int = 80,
    m: int = 60,
    evaluate_test: bool = True,
    metadata: dict | None = None,
) -> PipelineResult:
    if n_classes == 3:
        split = with_irrelevant(split, train_cfg.seed)
    elif n_classes != 2:
        raise ValueError(f"n_classes must be 2 or 3, got {n_classes}")
    model, trace = train(table, split, train_cfg, ModelConfig(d=table.dim, h1=h1, m=m, seed=train_cfg.seed))
    X = feature_matrix(model, table, split.train, mask)
    y = np.array([CLASS_INDEX[p.relation] for p in split.train])
    forest = clf_mod.fit(X, y, boost, mask=mask, n_classes=n_classes)
    report = None
    if evaluate_test and split.test:
        report = evaluate(forest, model, table, split.test, mask, split.train, metadata=metadata)
    return PipelineResult(model, forest, trace, mask, split, report)


@dataclass
class BaselineResult:
    pivots: PivotSet
    forest: clf_mod.BoostedForest
    report: EvalReport | None = None
    extra: dict = field(default_factory=dict)


def run_baseline(
    table: EmbeddingTable,
    split: DatasetSplit,
    k: int = 10,
    boost: clf_mod.BoostParams = clf_mod.BoostParams(),
    seed: int = 0,
    metadata: dict | None = None,
) -> BaselineResult:
    train_pairs = [p for p in split.train if p.relation is not Relation.IRRELEVANT]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 5]))
    pivots = fit_pivots(train_pairs, table, k, seed, rng)
    X = baseline_matrix(train_pairs, table, pivots, rng)
    y = np.array([CLASS_INDEX[p.relation] for p in train_pairs])
    forest = clf_mod.fit(X, y, boost, mask=None, n_classes=2)
    report = None
    test = [p for p in split.test if p.relation is not Relation.IRRELEVANT]
    if test:
        Xt = baseline_matrix(test, table, pivots, rng)
        meta = {"model": "direct-baseline", "k_pivots": k, **(metadata or {})}
        report = report_from_predictions(test, forest.predict(Xt), 2, metadata=meta)
    return BaselineResult(pivots, forest, report)
