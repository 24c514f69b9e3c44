"""
Infer Command
Comparator checkpoint + features -> JOD scores, for a whole item set or
for one query against reference items with established scores.
"""

import argparse
import logging

from cli.config import Settings, load_experiment_config, resolve_seed
from cli.services.experiments import write_resolved
from picniq.comparator import CHECKPOINT_FORMAT, load_checkpoint
from picniq.comparison_matrix import MATRIX_FORMAT, save_matrix
from picniq.errors import IdMismatchError
from picniq.inference import reconstruct_matrix, score_single
from picniq.models.configs import InferenceConfig
from picniq.models.scores import JodScale, ReferenceSet
from picniq.scaling import SCORES_FORMAT, load_scores, save_scores, scale_matrix
from picniq.scenes import FEATURES_FORMAT, load_features


logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "infer",
        help="Score items with a trained comparator",
        description=(
            "Multi-item mode scores every item of --items. Single-item mode "
            "(--query with --refs) scores one item against references whose "
            "scores stay fixed."
        ),
    )
    parser.add_argument("--model", required=True, help="Comparator checkpoint JSON")
    parser.add_argument("--items", required=True, help="Features CSV")
    parser.add_argument("--out", required=True, help="Scores JSON to write")
    parser.add_argument("--config", default=None, help="Experiment config JSON")
    parser.add_argument("--seed", type=int, default=None, help="Root seed (pair sampling, TrueSkill order)")
    parser.add_argument("--emit-matrix", default=None, help="Also write the reconstructed matrix CSV")
    parser.add_argument("--query", default=None, help="Single-item mode: id of the query item in --items")
    parser.add_argument("--refs", default=None, help="Single-item mode: scores JSON of the reference items")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace, settings: Settings) -> None:
    if (args.query is None) != (args.refs is None):
        raise ValueError("--query and --refs must be given together")
    config = load_experiment_config(args.config)
    seed = resolve_seed(args.seed, config, settings)
    inference = InferenceConfig.model_validate({**config.inference.model_dump(), "seed": seed})
    config = config.model_copy(update={"seed": seed, "inference": inference})

    model = load_checkpoint(args.model)
    items = load_features(args.items)
    formats = {"checkpoint": CHECKPOINT_FORMAT, "features": FEATURES_FORMAT, "scores": SCORES_FORMAT}

    if args.query is not None:
        scores = _score_query(model, items, args.query, args.refs, config)
        options = {"mode": "single", "query": args.query}
    else:
        matrix = reconstruct_matrix(model, items, inference)
        if args.emit_matrix:
            save_matrix(matrix, args.emit_matrix)
            formats["matrix"] = MATRIX_FORMAT
        scores = scale_matrix(matrix, inference.scaler, config.trueskill, config.mle, seed=seed)
        options = {"mode": "multi"}

    save_scores(scores, args.out)
    write_resolved(
        args.out, "infer", config,
        paths={
            "model": args.model, "items": args.items, "out": args.out, "config": args.config,
            "emit_matrix": args.emit_matrix, "refs": args.refs,
        },
        formats=formats,
        options=options,
    )
    logger.info(f"wrote {len(scores.item_ids)} scores to {args.out}")


def _score_query(model, items, query_id: str, refs_path: str, config) -> JodScale:
    reference_scale = load_scores(refs_path)
    reference_ids = list(reference_scale.item_ids)
    unknown = sorted({query_id, *reference_ids} - set(items.ids))
    if unknown:
        raise IdMismatchError(f"items without features: {unknown}")
    refs = ReferenceSet.from_scale(items.subset(reference_ids), reference_scale)
    query = items.subset([query_id]).items[0]
    score = score_single(model, query, refs, config.inference, config.trueskill, config.mle)
    return JodScale(item_ids=(query_id,), scores=[score], convention="aligned")
