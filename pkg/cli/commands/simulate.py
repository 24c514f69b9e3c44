"""
Simulate and Calibrate Commands
Synthetic Thurstone comparisons from the observer model, and calibration
histograms of a trained comparator against empirical probabilities.
"""

import argparse
import logging
from pathlib import Path

from cli.config import Settings, load_experiment_config, resolve_seed
from cli.services.experiments import HISTOGRAM_FORMAT, calibration_pairs, write_histogram, write_resolved
from picniq.comparator import CHECKPOINT_FORMAT, load_checkpoint
from picniq.comparison_matrix import MATRIX_FORMAT, probability_histogram, save_matrix, summarize
from picniq.metrics import CALIBRATION_BINS, CALIBRATION_FORMAT, calibration, save_calibration
from picniq.models.configs import ObserverConfig
from picniq.observer import DESIGN_FORMAT, make_design, make_features, sample_true_scores, save_design, simulate_matrix
from picniq.scaling import SCORES_FORMAT, save_scores
from picniq.scenes import FEATURES_FORMAT, save_features


logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    sim = subparsers.add_parser(
        "simulate",
        help="Simulate a comparison experiment",
        description=(
            "Draw true scores, build a design and simulate forced-choice outcomes. "
            "Writes true_scores.json, design.json, matrix.csv, histogram.csv and, "
            "with --feature-dim, features.csv into --out."
        ),
    )
    sim.add_argument("--n", type=int, required=True, help="Number of items")
    sim.add_argument("--design", choices=["full", "chain_plus_random"], default="full")
    sim.add_argument("--k", type=int, default=30, help="Comparisons per design pair")
    sim.add_argument("--sigma", type=float, default=None, help="Observer noise (default: 1 JOD = 75 %%)")
    sim.add_argument("--seed", type=int, default=None, help="Root seed")
    sim.add_argument("--extra", type=int, default=None, help="Random extra pairs for chain_plus_random (default n // 2)")
    sim.add_argument("--spread", type=float, default=1.0, help="Standard deviation of the true scores in JOD")
    sim.add_argument("--feature-dim", type=int, default=None, help="Also write synthetic features of this dimension")
    sim.add_argument("--noise", type=float, default=0.1, help="Feature noise on the informative coordinate")
    sim.add_argument("--bins", type=int, default=10, help="Probability histogram bins")
    sim.add_argument("--out", required=True, help="Output directory")
    sim.add_argument("--config", default=None, help="Experiment config JSON")
    sim.set_defaults(func=run_simulate)

    cal = subparsers.add_parser(
        "calibrate",
        help="Calibration histogram of a trained comparator",
        description="Group predicted probabilities by 6 ground-truth probability bins over a manifest.",
    )
    cal.add_argument("--model", required=True, help="Comparator checkpoint JSON")
    cal.add_argument("--manifest", required=True, help="Scene manifest JSON")
    cal.add_argument("--attribute", required=True, help="Attribute whose matrices give the ground truth")
    cal.add_argument("--out", required=True, help="Calibration CSV to write")
    cal.add_argument("--threshold", type=float, default=0.0, help="Minimum comparisons per pair")
    cal.add_argument("--config", default=None, help="Experiment config JSON")
    cal.set_defaults(func=run_calibrate)


def run_simulate(args: argparse.Namespace, settings: Settings) -> None:
    config = load_experiment_config(args.config)
    seed = resolve_seed(args.seed, config, settings)
    sigma = args.sigma if args.sigma is not None else config.observer.sigma_obs
    observer = ObserverConfig(sigma_obs=sigma, rng_seed=seed)
    config = config.model_copy(update={"seed": seed, "observer": observer})

    extra = 0
    if args.design == "chain_plus_random":
        extra = args.extra if args.extra is not None else args.n // 2
    design = make_design(args.design, args.n, extra_random_pairs=extra, k=args.k, seed=seed)
    true_scores = sample_true_scores(args.n, args.spread, seed)
    matrix = simulate_matrix(true_scores, design, observer)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_scores(true_scores, out / "true_scores.json")
    save_design(design, out / "design.json")
    save_matrix(matrix, out / "matrix.csv")
    write_histogram(out / "histogram.csv", probability_histogram(matrix, args.bins))
    formats = {
        "scores": SCORES_FORMAT, "design": DESIGN_FORMAT,
        "matrix": MATRIX_FORMAT, "histogram": HISTOGRAM_FORMAT,
    }
    if args.feature_dim is not None:
        save_features(make_features(true_scores, args.feature_dim, args.noise, seed), out / "features.csv")
        formats["features"] = FEATURES_FORMAT

    summary = summarize(matrix)
    logger.info(
        f"simulated {summary.observed_pairs} pairs over {summary.n_items} items "
        f"(forced-choice share {summary.forced_choice_fraction:.2f})"
    )
    write_resolved(
        out, "simulate", config,
        paths={"out": str(out), "config": args.config},
        formats=formats,
        options={
            "n": args.n, "design": args.design, "k": args.k, "extra": extra,
            "spread": args.spread, "feature_dim": args.feature_dim, "noise": args.noise,
            "bins": args.bins, "summary": summary.model_dump(),
        },
    )


def run_calibrate(args: argparse.Namespace, settings: Settings) -> None:
    config = load_experiment_config(args.config)
    model = load_checkpoint(args.model)
    predictions, truth = calibration_pairs(model, args.manifest, args.attribute, args.threshold)
    histogram = calibration(predictions, truth, bins=CALIBRATION_BINS)
    save_calibration(histogram, args.out)
    logger.info(f"calibration over {len(truth)} pairs written to {args.out}")
    write_resolved(
        args.out, "calibrate", config,
        paths={"model": args.model, "manifest": args.manifest, "out": args.out, "config": args.config},
        formats={"checkpoint": CHECKPOINT_FORMAT, "calibration": CALIBRATION_FORMAT},
        options={"attribute": args.attribute, "threshold": args.threshold},
    )
