"""
Comparator Inference
Turn a trained comparator into JOD scores: reconstruct a comparison matrix
from predicted probabilities and scale it, anchor a single query against
fixed references, and choose which pairs to predict.
"""

import itertools
import logging
import math
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import log_ndtr

from picniq.comparator import PROBABILITY_CLAMP, ComparatorModel, predict_pairs
from picniq.errors import BudgetError, ConvergenceError
from picniq.models.configs import DEFAULT_SIGMA_OBS, InferenceConfig, MleScalerConfig, TrueSkillConfig
from picniq.models.matrix import ComparisonMatrix, ItemRecord, ItemSet
from picniq.models.scores import JodScale, ReferenceSet
from picniq.observer import make_design
from picniq.scaling import TrueSkillState, scale_matrix, trueskill_expected_update


logger = logging.getLogger(__name__)

Outcome = Callable[[int, int], float]

MAX_BRACKET_EXPANSIONS = 60


def predict_matrix(
    model: ComparatorModel,
    items: ItemSet,
    pairs: Sequence[tuple[int, int]],
    c_comparisons: float,
) -> ComparisonMatrix:
    """
    Matrix with M_ij = c * p_ij and M_ji = c * (1 - p_ij) for each requested pair.

    Raises:
        MissingFeaturesError: If an item has no features
        ValueError: Out-of-range, self or repeated pairs, or c <= 0
    """
    if c_comparisons <= 0:
        raise ValueError(f"c_comparisons must be positive, got {c_comparisons}")
    n = len(items.items)
    seen = set()
    for i, j in pairs:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"invalid pair ({i}, {j}) for {n} items")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValueError(f"pair {key} requested twice")
        seen.add(key)

    counts = np.zeros((n, n))
    probabilities = predict_pairs(model, items, list(pairs))
    for (i, j), p in zip(pairs, probabilities):
        counts[i, j] = c_comparisons * p
        counts[j, i] = c_comparisons * (1.0 - p)
    return ComparisonMatrix(
        item_ids=tuple(items.ids),
        counts=counts,
        metadata={"source": "comparator", "c_comparisons": c_comparisons},
    )


# ---------------- Pair selection ----------------


def _pair_key(ids: Sequence[str], i: int, j: int) -> tuple[str, str]:
    a, b = ids[i], ids[j]
    return (a, b) if a <= b else (b, a)


def _observe(state: TrueSkillState, i: int, j: int, outcome: Optional[Outcome]) -> TrueSkillState:
    p = outcome(i, j) if outcome is not None else state.win_probability(i, j)
    return trueskill_expected_update(state, i, j, float(np.clip(p, 0.0, 1.0)))


def _select_active(
    ids: Sequence[str],
    state: TrueSkillState,
    budget: int,
    outcome: Optional[Outcome],
    candidate_pool: Optional[int],
) -> list[tuple[int, int]]:
    n = len(ids)
    order = sorted(range(n), key=lambda k: (state.mu[k], ids[k]))
    selected: list[tuple[int, int]] = []
    for a, b in zip(order[:-1], order[1:]):
        pair = (min(a, b), max(a, b))
        selected.append(pair)
        state = _observe(state, pair[0], pair[1], outcome)

    pool_size = candidate_pool if candidate_pool is not None else n
    remaining = set(itertools.combinations(range(n), 2)) - set(selected)
    while len(selected) < budget and remaining:
        mu, variance = state.mu, state.sigma ** 2
        candidates = sorted(
            remaining,
            key=lambda ij: (abs(mu[ij[0]] - mu[ij[1]]), _pair_key(ids, *ij))
        )[:pool_size]
        best = max(candidates, key=lambda ij: variance[ij[0]] + variance[ij[1]])
        remaining.discard(best)
        selected.append(best)
        state = _observe(state, best[0], best[1], outcome)
    return selected


def select_pairs(
    strategy: Literal["full", "chain_plus_random", "active"],
    item_ids: Sequence[str],
    state: Optional[TrueSkillState] = None,
    budget: Optional[int] = None,
    seed: int = 0,
    outcome: Optional[Outcome] = None,
    candidate_pool: Optional[int] = None,
) -> list[tuple[int, int]]:
    """
    Choose which unordered pairs to compare.

    full returns every pair. chain_plus_random spends n - 1 pairs on the
    index chain and the rest on random non-adjacent pairs. active spends
    n - 1 pairs on a chain in current score order, then repeatedly takes,
    among the candidate_pool (default n) unselected pairs closest in mu,
    the one with the largest summed variance. Each active pick updates the
    TrueSkill state with outcome(i, j) when given, else with the state's
    own predictive probability.

    The budget defaults to n - 1 + n // 2 for the sampled strategies.

    Raises:
        BudgetError: If budget < n - 1 for a sampled strategy
    """
    n = len(item_ids)
    if n < 2:
        raise ValueError(f"pair selection needs at least 2 items, got {n}")
    if strategy == "full":
        return list(itertools.combinations(range(n), 2))

    total = n * (n - 1) // 2
    budget = budget if budget is not None else n - 1 + n // 2
    if budget < n - 1:
        raise BudgetError(f"budget {budget} is below the {n - 1} pairs needed to connect {n} items")
    if budget > total:
        logger.warning(f"budget {budget} exceeds the {total} available pairs; clamped")
        budget = total

    if strategy == "chain_plus_random":
        return list(make_design("chain_plus_random", n, extra_random_pairs=budget - (n - 1), seed=seed).pairs)
    if strategy == "active":
        if state is None:
            state = TrueSkillState.initial(n)
        elif len(state.mu) != n:
            raise ValueError(f"state covers {len(state.mu)} items, expected {n}")
        return _select_active(item_ids, state, budget, outcome, candidate_pool)
    raise ValueError(f"unknown pair strategy {strategy!r}")


# ---------------- Multi-item inference ----------------


def _probability_table(model: ComparatorModel, items: ItemSet) -> np.ndarray:
    n = len(items.items)
    pairs = [(i, j) for i in range(n) for j in range(n)]
    return predict_pairs(model, items, pairs).reshape(n, n)


def reconstruct_matrix(
    model: ComparatorModel,
    items: ItemSet,
    config: InferenceConfig = InferenceConfig(),
) -> ComparisonMatrix:
    """Predicted comparison matrix over the pairs the configured strategy selects."""
    outcome = None
    if config.pair_strategy == "active":
        table = _probability_table(model, items)

        def outcome(i: int, j: int) -> float:
            return float(table[i, j])

    pairs = select_pairs(
        config.pair_strategy, items.ids,
        budget=config.budget, seed=config.seed,
        outcome=outcome, candidate_pool=config.candidate_pool,
    )
    logger.debug(f"predicting {len(pairs)} pairs ({config.pair_strategy}) for {len(items.items)} items")
    return predict_matrix(model, items, pairs, config.c_comparisons)


def score_multi(
    model: ComparatorModel,
    items: ItemSet,
    config: InferenceConfig = InferenceConfig(),
    trueskill_config: TrueSkillConfig = TrueSkillConfig(),
    mle_config: MleScalerConfig = MleScalerConfig(),
) -> JodScale:
    """
    Score a set of items: predict a comparison matrix, then scale it.

    Raises:
        ValueError: Fewer than two items
        DisconnectedGraphError, ConvergenceError: Propagated from the scaler
    """
    if len(items.items) < 2:
        raise ValueError("multi-item inference needs at least 2 items")
    matrix = reconstruct_matrix(model, items, config)
    return scale_matrix(matrix, config.scaler, trueskill_config, mle_config, seed=config.seed)


# ---------------- Single-item inference ----------------


def anchor_score(
    predictions: Sequence[float],
    reference_scores: Sequence[float],
    sigma_obs: float = DEFAULT_SIGMA_OBS,
) -> float:
    """
    Score of a query given its predicted win probabilities against references
    whose scores stay fixed.

    Maximizes sum_r p_r log Phi(d_r) + (1 - p_r) log Phi(-d_r) with
    d_r = (s - s_r) / (sigma_obs * sqrt(2)); the objective is concave, so
    its derivative is bracketed by doubling and solved with brentq.
    Predictions are clamped to [1e-12, 1 - 1e-12], so a query predicted to
    beat every reference still gets a finite score above all of them.

    Raises:
        ConvergenceError: If no sign change of the derivative is found or
            the derivative stops being finite
    """
    p = np.clip(np.asarray(predictions, dtype=np.float64), PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
    s_ref = np.asarray(reference_scores, dtype=np.float64)
    if p.shape != s_ref.shape or p.size == 0:
        raise ValueError("predictions and reference scores must be non-empty and aligned")
    scale = sigma_obs * math.sqrt(2.0)
    log_sqrt_2pi = 0.5 * math.log(2.0 * math.pi)

    def derivative(s: float) -> float:
        d = (s - s_ref) / scale
        with np.errstate(over="ignore", invalid="ignore"):
            mills_pos = np.exp(-0.5 * d * d - log_sqrt_2pi - log_ndtr(d))
            mills_neg = np.exp(-0.5 * d * d - log_sqrt_2pi - log_ndtr(-d))
            value = float(np.sum(p * mills_pos - (1.0 - p) * mills_neg) / scale)
        if not math.isfinite(value):
            raise ConvergenceError(f"anchored-score derivative is not finite at {s:.6g}")
        return value

    lo, hi = float(s_ref.min()) - 1.0, float(s_ref.max()) + 1.0
    width = 1.0
    for _ in range(MAX_BRACKET_EXPANSIONS):
        if derivative(lo) > 0:
            break
        width *= 2.0
        lo -= width
    else:
        raise ConvergenceError("could not bracket the anchored score from below")
    width = 1.0
    for _ in range(MAX_BRACKET_EXPANSIONS):
        if derivative(hi) < 0:
            break
        width *= 2.0
        hi += width
    else:
        raise ConvergenceError("could not bracket the anchored score from above")
    return float(brentq(derivative, lo, hi, xtol=1e-12))


def score_single(
    model: ComparatorModel,
    query: ItemRecord,
    refs: ReferenceSet,
    config: InferenceConfig = InferenceConfig(),
    trueskill_config: TrueSkillConfig = TrueSkillConfig(),
    mle_config: MleScalerConfig = MleScalerConfig(),
) -> float:
    """
    JOD score of one query item on the references' established scale.

    single_mode "fixed" anchors the query with the references held fixed;
    "rescale" scales query and references together from a full predicted
    matrix and shifts the result onto the references' established mean.

    Raises:
        ValueError: Fewer than two distinct references, or the query is one of them
        MissingFeaturesError: If the query or a reference lacks features
    """
    refs = refs.unique()
    if len(refs.items) < 2:
        raise ValueError(f"single-item inference needs at least 2 references, got {len(refs.items)}")
    if query.id in refs.ids:
        raise ValueError(f"query {query.id!r} is also a reference")
    items = ItemSet(items=(query, *refs.items))
    reference_scores = np.array(refs.scores)

    if config.single_mode == "fixed":
        predictions = predict_pairs(model, items, [(0, k) for k in range(1, len(items.items))])
        score = anchor_score(predictions, reference_scores, mle_config.sigma_obs)
    else:
        pairs = list(itertools.combinations(range(len(items.items)), 2))
        matrix = predict_matrix(model, items, pairs, config.c_comparisons)
        scaled = scale_matrix(matrix, config.scaler, trueskill_config, mle_config, seed=config.seed)
        shift = float(reference_scores.mean() - scaled.scores[1:].mean())
        score = float(scaled.scores[0] + shift)
    logger.debug(f"query {query.id}: {score:.4f} JOD against {len(refs.items)} references")
    return score
