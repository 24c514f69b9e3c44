"""
Observer Model
Thurstone Case V link function, comparison designs and synthetic comparisons.
This is the ground-truth oracle the rest of the toolkit is tested against.
"""

import itertools
import json
import logging
import math
from pathlib import Path
from typing import Literal, Union

import numpy as np
from scipy.special import ndtr

from picniq.comparison_matrix import connected_components
from picniq.models.configs import Design, ObserverConfig
from picniq.models.matrix import ComparisonMatrix, ItemSet
from picniq.models.scores import JodScale
from picniq.seeding import substream


logger = logging.getLogger(__name__)

DESIGN_FORMAT = "picniq-design/1"


def link_probability(score_diff, config: ObserverConfig = ObserverConfig()):
    """
    Probability that the first item wins, Phi(diff / (sigma_obs * sqrt(2))).

    Accepts scalars or arrays; returns the same shape.
    """
    result = ndtr(np.asarray(score_diff, dtype=np.float64) / (config.sigma_obs * math.sqrt(2.0)))
    return float(result) if np.ndim(result) == 0 else result


def make_design(
    kind: Literal["full", "chain_plus_random"],
    n: int,
    extra_random_pairs: int = 0,
    k: int = 1,
    seed: int = 0,
) -> Design:
    """
    Build a comparison design.

    full: all n(n-1)/2 pairs. chain_plus_random: the n-1 adjacent pairs in
    item order plus distinct random non-adjacent pairs; connected by construction.

    Raises:
        ValueError: n < 2, or more extra pairs requested than exist
    """
    if n < 2:
        raise ValueError(f"a design needs at least 2 items, got {n}")
    if kind == "full":
        pairs = list(itertools.combinations(range(n), 2))
        return Design(kind=kind, n_items=n, pairs=pairs, comparisons_per_pair=k)

    chain = [(i, i + 1) for i in range(n - 1)]
    non_adjacent = [(i, j) for i, j in itertools.combinations(range(n), 2) if j - i > 1]
    if extra_random_pairs < 0 or extra_random_pairs > len(non_adjacent):
        raise ValueError(
            f"requested {extra_random_pairs} extra pairs but only "
            f"{len(non_adjacent)} non-adjacent pairs exist for n={n}"
        )
    extra: list[tuple[int, int]] = []
    if extra_random_pairs:
        rng = substream(seed, "design")
        picks = rng.choice(len(non_adjacent), size=extra_random_pairs, replace=False)
        extra = sorted(non_adjacent[int(p)] for p in picks)
    return Design(kind=kind, n_items=n, pairs=chain + extra, comparisons_per_pair=k)


def simulate_matrix(
    true_scores: JodScale,
    design: Design,
    config: ObserverConfig = ObserverConfig(),
) -> ComparisonMatrix:
    """
    Draw k forced-choice outcomes per design pair from the observer model.

    Deterministic for a fixed config.rng_seed. Output metadata records
    whether the design's comparison graph is connected.
    """
    n = len(true_scores.item_ids)
    if design.n_items != n:
        raise ValueError(f"design covers {design.n_items} items, scores cover {n}")

    counts = np.zeros((n, n))
    if design.pairs:
        rows = np.array([p[0] for p in design.pairs])
        cols = np.array([p[1] for p in design.pairs])
        scores = true_scores.scores
        p = link_probability(scores[rows] - scores[cols], config)
        rng = substream(config.rng_seed, "simulation/outcomes")
        wins = rng.binomial(design.comparisons_per_pair, p)
        counts[rows, cols] = wins
        counts[cols, rows] = design.comparisons_per_pair - wins

    matrix = ComparisonMatrix(item_ids=true_scores.item_ids, counts=counts)
    components = connected_components(matrix)
    metadata = {"design": design.kind, "connected": len(components) == 1, "components": len(components)}
    if len(components) > 1:
        logger.warning(f"simulated design is disconnected into {len(components)} components")
    return matrix.with_counts(matrix.counts, **metadata)


def sample_true_scores(n: int, spread: float, seed: int, prefix: str = "item") -> JodScale:
    """Zero-mean Gaussian true scores with standard deviation `spread`."""
    rng = substream(seed, "simulation/scores")
    ids = [f"{prefix}{k:03d}" for k in range(n)]
    return JodScale.centered(ids, rng.normal(0.0, spread, size=n))


def make_features(true_scores: JodScale, dim: int, noise: float, seed: int) -> ItemSet:
    """
    Synthetic feature vectors: coordinate 0 is the true score plus Gaussian
    noise, the remaining dim - 1 coordinates are standard normal noise.
    """
    if dim < 1:
        raise ValueError(f"feature dimension must be >= 1, got {dim}")
    rng = substream(seed, "simulation/features")
    n = len(true_scores.item_ids)
    features = rng.normal(0.0, 1.0, size=(n, dim))
    features[:, 0] = true_scores.scores + rng.normal(0.0, noise, size=n)
    return ItemSet.from_arrays(list(true_scores.item_ids), features)


def save_design(design: Design, path: Union[str, Path]) -> None:
    payload = {"format": DESIGN_FORMAT, **design.model_dump(mode="json")}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_design(path: Union[str, Path]) -> Design:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    payload.pop("format", None)
    return Design.model_validate(payload)
