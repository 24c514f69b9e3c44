"""
Train Command
Scene manifest -> comparator checkpoint plus loss history.
"""

import argparse
import logging
from pathlib import Path

from cli.config import Settings, load_experiment_config, resolve_seed
from cli.services.experiments import HISTORY_FORMAT, build_training_set, write_history, write_resolved
from picniq.comparator import CHECKPOINT_FORMAT, ComparatorModel, save_checkpoint, train
from picniq.errors import EmptyTrainingSetError
from picniq.models.configs import TrainConfig


logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "train",
        help="Train the pairwise comparator",
        description="Train the comparator on every scene of a manifest for one attribute.",
    )
    parser.add_argument("--manifest", required=True, help="Scene manifest JSON")
    parser.add_argument("--attribute", required=True, help="Attribute whose matrices to train on")
    parser.add_argument("--out", required=True, help="Checkpoint JSON to write")
    parser.add_argument("--config", default=None, help="Experiment config JSON")
    parser.add_argument("--seed", type=int, default=None, help="Root seed (init, shuffling, orientation)")
    parser.add_argument(
        "--threshold", type=float, default=None,
        help="Minimum comparisons per pair (overrides train.min_comparisons_threshold)",
    )
    parser.add_argument("--epochs", type=int, default=None, help="Overrides train.epochs")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace, settings: Settings) -> None:
    config = load_experiment_config(args.config)
    seed = resolve_seed(args.seed, config, settings)
    overrides = {"seed": seed}
    if args.threshold is not None:
        overrides["min_comparisons_threshold"] = args.threshold
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    train_config = TrainConfig.model_validate({**config.train.model_dump(), **overrides})
    config = config.model_copy(update={"seed": seed, "train": train_config})

    records, items = build_training_set(
        args.manifest, args.attribute, train_config.min_comparisons_threshold, order_seed=seed
    )
    if items.dim is None:
        raise EmptyTrainingSetError(f"manifest {args.manifest} has no '{args.attribute}' scenes with features")
    model = ComparatorModel.initialize(items.dim, config.model, seed=seed)
    model, history = train(model, records, items, train_config)

    out = Path(args.out)
    save_checkpoint(model, out, train_config)
    history_path = out.with_name(out.stem + ".history.csv")
    write_history(history_path, history)
    write_resolved(
        out, "train", config,
        paths={"manifest": args.manifest, "out": args.out, "history": str(history_path), "config": args.config},
        formats={"checkpoint": CHECKPOINT_FORMAT, "history": HISTORY_FORMAT},
        options={"attribute": args.attribute},
    )
    logger.info(f"wrote checkpoint {out} (final loss {history[-1]:.4f})")
