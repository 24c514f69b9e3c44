"""
Eval Command
Per-scene predicted vs ground-truth scores -> metrics report (JSON + CSV).
"""

import argparse
import logging

from cli.config import Settings, load_experiment_config
from cli.services.experiments import check_same_scenes, load_manifest_truth, load_score_dir, write_resolved
from picniq.metrics import REPORT_FORMAT, build_report, format_aggregate, save_report
from picniq.scaling import SCORES_FORMAT


logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "eval",
        help="Evaluate predicted scores against ground truth",
        description=(
            "Compare one scores JSON per scene (matched by file name) and report "
            "SRCC, PLCC, KRCC and aligned MAE per scene with Median (Mean ± MoE) aggregates. "
            "Ground truth comes from a scores directory (--truth) or from the "
            "truth entries of a scene manifest (--manifest with --attribute)."
        ),
    )
    parser.add_argument("--pred", required=True, help="Directory of predicted scores JSON files")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--truth", default=None, help="Directory of ground-truth scores JSON files")
    source.add_argument("--manifest", default=None, help="Scene manifest whose truth entries hold the ground truth")
    parser.add_argument("--attribute", default=None, help="Attribute whose ground truth --manifest supplies")
    parser.add_argument("--out", required=True, help="Report JSON to write (CSV is written beside it)")
    parser.add_argument("--config", default=None, help="Experiment config JSON")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace, settings: Settings) -> None:
    if (args.manifest is None) != (args.attribute is None):
        raise ValueError("--manifest and --attribute must be given together")
    config = load_experiment_config(args.config)
    pred = load_score_dir(args.pred)
    if args.manifest is not None:
        truth = load_manifest_truth(args.manifest, args.attribute)
    else:
        truth = load_score_dir(args.truth)
    check_same_scenes(pred, truth)

    report = build_report(pred, truth)
    csv_path = save_report(report, args.out)
    for name, value in report.aggregates.items():
        logger.info(f"{name}: {format_aggregate(value)}")

    write_resolved(
        args.out, "eval", config,
        paths={
            "pred": args.pred, "truth": args.truth, "manifest": args.manifest,
            "out": args.out, "csv": str(csv_path), "config": args.config,
        },
        formats={"scores": SCORES_FORMAT, "report": REPORT_FORMAT},
        options={"scenes": len(report.per_scene), "attribute": args.attribute},
    )
