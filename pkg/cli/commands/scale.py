"""
Scale Command
Comparison matrix CSV -> JOD scores JSON.
"""

import argparse
import logging

from cli.config import Settings, load_experiment_config, resolve_seed
from cli.services.experiments import write_resolved
from picniq.comparison_matrix import MATRIX_FORMAT, load_matrix
from picniq.scaling import SCORES_FORMAT, save_scores, scale_matrix


logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "scale",
        help="Scale a comparison matrix to JOD scores",
        description="Scale a comparison matrix to zero-mean JOD scores with TrueSkill replay or MLE.",
    )
    parser.add_argument("--input", required=True, help="Comparison matrix CSV")
    parser.add_argument("--output", required=True, help="Scores JSON to write")
    parser.add_argument(
        "--method", choices=["trueskill", "mle"], default=None,
        help="Scaling method (default: inference.scaler from --config, else trueskill)",
    )
    parser.add_argument("--seed", type=int, default=None, help="Root seed for the TrueSkill replay order")
    parser.add_argument("--config", default=None, help="Experiment config JSON")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace, settings: Settings) -> None:
    config = load_experiment_config(args.config)
    seed = resolve_seed(args.seed, config, settings)
    method = args.method or config.inference.scaler

    matrix = load_matrix(args.input)
    logger.info(f"scaling {matrix.n} items from {args.input} with {method}")
    scores = scale_matrix(matrix, method, config.trueskill, config.mle, seed=seed)
    save_scores(scores, args.output)

    write_resolved(
        args.output, "scale", config.model_copy(update={"seed": seed}),
        paths={"input": args.input, "output": args.output, "config": args.config},
        formats={"matrix": MATRIX_FORMAT, "scores": SCORES_FORMAT},
        options={"method": method},
    )
    logger.info(f"wrote {len(scores.item_ids)} scores to {args.output}")
