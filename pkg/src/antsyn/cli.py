"""Command-line entry point: ``antsyn {train,evaluate,score,neighbors,baseline,toy}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import BaselineError
from .classifier import BoostParams, ClassifierError, load_forest, predict, save_forest
from .distiller import (
    DistillerError,
    ModelFormatError,
    TrainConfig,
    load_model,
    save_model,
    write_trace,
)
from .embeddings import EmbeddingError, EmbeddingTable, load_embeddings, load_table, make_random_table, save_table
from .evaluation import EvaluationError, evaluate, neighbors
from .features import FEATURE_GROUPS, FeatureError, FeatureMask, build_features
from .lexicon import (
    CLASS_ORDER,
    Category,
    DatasetError,
    DatasetSplit,
    load_pairs,
    load_pairs_with_splits,
    pair_vocab,
)
from .pipeline import run_baseline, run_pipeline, with_irrelevant

logger = logging.getLogger("antsyn")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "embeddings": None,
    "pairs_dir": None,
    "category": "all",
    "features": list(FEATURE_GROUPS),
    "classes": 2,
    "seed": 0,
    "out": None,
    "dim": 60,
    "hidden": 80,
    "lr": 1e-3,
    "epochs": 200,
    "batch": 64,
    "k_neg": 5,
    "patience": 20,
    "k_pivots": 10,
    "n_trees": 200,
    "max_depth": 4,
    "tree_lr": 0.1,
}

_SPLIT_ALIASES = {"train": ("train",), "dev": ("dev", "val", "valid"), "test": ("test",)}
_CATEGORIES = ("adjective", "noun", "verb")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# Config handling
# --------------------------------------------------------------------------


def effective_config(args: argparse.Namespace) -> dict:
    """Flags beat the ``--config`` file, which beats :data:`DEFAULTS`."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        file_cfg = json.loads(path.read_text(encoding="utf-8"))
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config key(s) in {path}: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg["features"] = sorted(set(cfg["features"]), key=FEATURE_GROUPS.index)
    return cfg


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        learning_rate=cfg["lr"],
        batch_size=cfg["batch"],
        epochs=cfg["epochs"],
        k_negatives=cfg["k_neg"],
        seed=cfg["seed"],
        patience=cfg["patience"],
    )


def boost_params(cfg: dict) -> BoostParams:
    return BoostParams(n_trees=cfg["n_trees"], max_depth=cfg["max_depth"], learning_rate=cfg["tree_lr"], seed=cfg["seed"])


# --------------------------------------------------------------------------
# Data discovery
# --------------------------------------------------------------------------


def _find_split_file(pairs_dir: Path, category: str, split: str) -> Path | None:
    for alias in _SPLIT_ALIASES[split]:
        for name in (f"{category}_{alias}.tsv", f"{category}-pairs.{alias}", f"{category}.{alias}", f"{category}_{alias}.txt"):
            p = pairs_dir / name
            if p.exists():
                return p
    return None


def load_splits(pairs_dir: str | Path, category: str) -> dict[str, DatasetSplit]:
    """Per-category splits from ``<cat>_<split>.tsv`` files or one 5-column ``pairs.tsv``."""
    pairs_dir = Path(pairs_dir)
    if not pairs_dir.is_dir():
        raise UsageError(f"pairs directory not found: {pairs_dir}")
    wanted = _CATEGORIES if category == "all" else (category,)
    out: dict[str, DatasetSplit] = {}
    combined = pairs_dir / "pairs.tsv"
    if combined.exists():
        grouped = load_pairs_with_splits(combined)
        for cat in wanted:
            c = Category(cat)
            parts = {
                s: [p for alias in _SPLIT_ALIASES[s] for p in grouped.get((c, alias), [])]
                for s in _SPLIT_ALIASES
            }
            if parts["train"]:
                out[cat] = DatasetSplit(**parts)
    else:
        for cat in wanted:
            files = {s: _find_split_file(pairs_dir, cat, s) for s in _SPLIT_ALIASES}
            if files["train"] is None:
                continue
            out[cat] = DatasetSplit(**{s: load_pairs(f, cat) if f else [] for s, f in files.items()})
    if not out:
        raise UsageError(f"no training pairs for category {category!r} under {pairs_dir}")
    return out


def load_source_table(source: str, words: set[str], seed: int) -> EmbeddingTable:
    """``random:<d>`` gives the random-vector control; anything else is a file path."""
    if source.startswith("random:"):
        try:
            d = int(source.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad random source {source!r}, expected random:<dim>") from None
        return make_random_table(sorted(words), d, seed)
    path = Path(source)
    if not path.exists():
        raise UsageError(f"embedding file not found: {path}")
    return load_embeddings(path, restrict_to=words)


def _category_dir(out: Path, cat: str) -> Path:
    return out / cat


def _read_run_config(out: Path) -> dict:
    p = out / "config.json"
    if not p.exists():
        raise UsageError(f"no trained run under {out} (missing {p})")
    return json.loads(p.read_text(encoding="utf-8"))


def _run_categories(out: Path, run_cfg: dict, category: str | None) -> list[str]:
    cats = run_cfg["trained_categories"]
    if category in (None, "all"):
        return cats
    if category not in cats:
        raise UsageError(f"category {category!r} was not trained under {out}; have {cats}")
    return [category]


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = effective_config(args)
    if not cfg["embeddings"] or not cfg["pairs_dir"] or not cfg["out"]:
        raise UsageError("train needs --embeddings, --pairs-dir and --out")
    out = Path(cfg["out"])
    splits = load_splits(cfg["pairs_dir"], cfg["category"])
    all_words = set().union(*(pair_vocab(s.all_pairs()) for s in splits.values()))
    base_table = load_source_table(cfg["embeddings"], all_words, cfg["seed"])
    mask = FeatureMask.from_names(cfg["features"])
    out.mkdir(parents=True, exist_ok=True)
    cfg["trained_categories"] = list(splits)
    cfg["version"] = __version__
    for cat, split in splits.items():
        t0 = time.perf_counter()
        table = _clone_table(base_table)
        res = run_pipeline(
            table, split, train_config(cfg), boost_params(cfg), mask, cfg["classes"], h1=cfg["hidden"], m=cfg["dim"],
            evaluate_test=False,
        )
        cdir = _category_dir(out, cat)
        cdir.mkdir(parents=True, exist_ok=True)
        res.model.train_config["run"] = cfg
        save_model(res.model, cdir / "distiller.npz")
        save_forest(res.forest, cdir / "forest.txt", provenance=cfg)
        write_trace(res.trace, cdir / "trace.tsv")
        save_table(table, cdir / "embeddings.txt")
        print(f"{cat}: {len(res.trace)} epochs, {len(split.train)} train pairs, {time.perf_counter() - t0:.1f}s -> {cdir}")
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def _clone_table(t: EmbeddingTable) -> EmbeddingTable:
    c = EmbeddingTable(t.words, t.vectors, seed=t.seed)
    c.oov_seeded = set(t.oov_seeded)
    return c


def _load_category(out: Path, cat: str):
    cdir = _category_dir(out, cat)
    for name in ("distiller.npz", "forest.txt", "embeddings.txt"):
        if not (cdir / name).exists():
            raise UsageError(f"missing {cdir / name}")
    return load_model(cdir / "distiller.npz"), load_forest(cdir / "forest.txt"), load_table(cdir / "embeddings.txt")


def cmd_evaluate(args) -> int:
    out = Path(args.out)
    run_cfg = _read_run_config(out)
    pairs_dir = args.pairs_dir or run_cfg["pairs_dir"]
    cats = _run_categories(out, run_cfg, args.category)
    splits = load_splits(pairs_dir, "all")
    mask = FeatureMask.from_names(run_cfg["features"])
    for cat in cats:
        model, forest, table = _load_category(out, cat)
        split = splits[cat]
        if run_cfg["classes"] == 3:
            split = with_irrelevant(split, run_cfg["seed"])
        rng = np.random.default_rng(np.random.SeedSequence([run_cfg["seed"], 7]))
        meta = {"category": cat, "embeddings": run_cfg["embeddings"], "config": run_cfg}
        report = evaluate(forest, model, table, split.test, mask, split.train, metadata=meta, rng=rng)
        cdir = _category_dir(out, cat)
        report.save(cdir / "report.json", cdir / "report.txt")
        prim, mac = report.primary(), report.macro()
        print(
            f"{cat}: antonym P={prim.precision:.3f} R={prim.recall:.3f} F1={prim.f1:.3f} | "
            f"macro P={mac.precision:.3f} R={mac.recall:.3f} F1={mac.f1:.3f} (n={report.categories['all'].n})"
        )
    return EXIT_OK


def _single_category(out: Path, run_cfg: dict, category: str | None) -> str:
    cats = _run_categories(out, run_cfg, category)
    if len(cats) != 1:
        raise UsageError(f"several categories trained ({cats}); pick one with --category")
    return cats[0]


def cmd_score(args) -> int:
    out = Path(args.out)
    run_cfg = _read_run_config(out)
    cat = _single_category(out, run_cfg, args.category)
    model, forest, table = _load_category(out, cat)
    mask = FeatureMask.from_names(run_cfg["features"])
    rng = np.random.default_rng(np.random.SeedSequence([run_cfg["seed"], 7]))
    feats = build_features(model, table, args.word_a, args.word_b, mask, rng)
    label, proba = predict(forest, feats, mask)
    probs = " ".join(f"p({CLASS_ORDER[i].value})={proba[i]:.4f}" for i in range(len(proba)))
    print(
        f"{args.word_a}\t{args.word_b}\tsynonymy={feats.synonymy:.4f} antonymy={feats.antonymy:.4f} "
        f"distributional={feats.distributional:.4f} prefix={feats.prefix} label={CLASS_ORDER[label].value} {probs}"
    )
    return EXIT_OK


def cmd_neighbors(args) -> int:
    out = Path(args.out)
    run_cfg = _read_run_config(out)
    cat = _single_category(out, run_cfg, args.category)
    model, _, table = _load_category(out, cat)
    rng = np.random.default_rng(np.random.SeedSequence([run_cfg["seed"], 7]))
    for rank, (w, s) in enumerate(neighbors(model, table, args.word, args.space, args.k, rng), start=1):
        print(f"{rank}\t{w}\t{s:.6f}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = effective_config(args)
    if not cfg["embeddings"] or not cfg["pairs_dir"] or not cfg["out"]:
        raise UsageError("baseline needs --embeddings, --pairs-dir and --out")
    out = Path(cfg["out"])
    splits = load_splits(cfg["pairs_dir"], cfg["category"])
    all_words = set().union(*(pair_vocab(s.all_pairs()) for s in splits.values()))
    base_table = load_source_table(cfg["embeddings"], all_words, cfg["seed"])
    out.mkdir(parents=True, exist_ok=True)
    for cat, split in splits.items():
        table = _clone_table(base_table)
        res = run_baseline(table, split, cfg["k_pivots"], boost_params(cfg), cfg["seed"], metadata={"category": cat, "config": cfg})
        if res.report is None:
            print(f"{cat}: no test pairs, baseline trained only")
            continue
        cdir = out / "baseline" / cat
        cdir.mkdir(parents=True, exist_ok=True)
        res.report.save(cdir / "report.json", cdir / "report.txt")
        prim, mac = res.report.primary(), res.report.macro()
        print(f"{cat}: baseline antonym F1={prim.f1:.3f} macro F1={mac.f1:.3f}")
    return EXIT_OK


def cmd_toy(args) -> int:
    from .synthetic import planted_task, write_fixture

    task = planted_task(n_clusters=args.clusters, cluster_size=args.cluster_size, dim=args.input_dim, seed=args.seed)
    path = write_fixture(task, args.out, category=args.category_name)
    print(f"wrote {len(task.table)}-word fixture to {path}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of defaults; flags override it")
    p.add_argument("--embeddings", help="embedding text file, or random:<dim> for the random control")
    p.add_argument("--pairs-dir", dest="pairs_dir")
    p.add_argument("--category", choices=[*_CATEGORIES, "all"])
    p.add_argument("--features", action="append", choices=FEATURE_GROUPS, help="repeatable; default all three")
    p.add_argument("--classes", type=int, choices=(2, 3))
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--dim", type=int, help="sub-space dimensionality (second encoder layer)")
    p.add_argument("--hidden", type=int, help="first encoder layer width")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--k-neg", dest="k_neg", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--k-pivots", dest="k_pivots", type=int)
    p.add_argument("--n-trees", dest="n_trees", type=int)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--tree-lr", dest="tree_lr", type=float)
    p.add_argument("--deterministic", action="store_true", help="accepted for compatibility; runs are always serial")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="antsyn", description=__doc__)
    parser.add_argument("--version", action="version", version=f"antsyn {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the Distiller and the Phase-II classifier")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("baseline", help="train and evaluate the Direct baseline")
    _add_run_flags(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="score the test split of a trained run")
    p.add_argument("--out", required=True)
    p.add_argument("--pairs-dir", dest="pairs_dir")
    p.add_argument("--category", choices=[*_CATEGORIES, "all"])
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("score", help="classify one word pair")
    p.add_argument("--out", required=True)
    p.add_argument("--category", choices=_CATEGORIES)
    p.add_argument("word_a")
    p.add_argument("word_b")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("neighbors", help="nearest neighbours in a distilled space")
    p.add_argument("--out", required=True)
    p.add_argument("--category", choices=_CATEGORIES)
    p.add_argument("--space", choices=("SYN", "ANT"), default="SYN", type=str.upper)
    p.add_argument("-k", "--k", type=int, default=5)
    p.add_argument("word")
    p.set_defaults(func=cmd_neighbors)

    p = sub.add_parser("toy", help="write a planted synthetic fixture")
    p.add_argument("--out", required=True)
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--cluster-size", dest="cluster_size", type=int, default=5)
    p.add_argument("--input-dim", dest="input_dim", type=int, default=20)
    p.add_argument("--category-name", dest="category_name", default="adjective", choices=_CATEGORIES)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_toy)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError) as exc:
        print(f"antsyn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, EmbeddingError, FeatureError, ModelFormatError, EvaluationError) as exc:
        print(f"antsyn: input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DistillerError, ClassifierError, BaselineError, RuntimeError) as exc:
        print(f"antsyn: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
