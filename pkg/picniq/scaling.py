"""
Psychometric Scaling
Comparison matrices to JOD scores, by TrueSkill replay or by direct
maximum-likelihood Thurstonian scaling.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.special import log_ndtr

from picniq.comparison_matrix import connected_components, validate, with_prior
from picniq.errors import (
    ConvergenceError,
    DisconnectedGraphError,
    IdMismatchError,
    InvalidMatrixError,
    ScalingError,
)
from picniq.models.configs import DEFAULT_SIGMA_OBS, MleScalerConfig, TrueSkillConfig
from picniq.models.matrix import ComparisonMatrix
from picniq.models.scores import JodScale
from picniq.seeding import substream


logger = logging.getLogger(__name__)

SCORES_FORMAT = "picniq-scores/1"
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


# ---------------- Gaussian helpers ----------------


def _inverse_mills(x):
    """phi(x) / Phi(x), stable in both tails."""
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-0.5 * x * x - _LOG_SQRT_2PI - log_ndtr(x))


# ---------------- TrueSkill ----------------


class TrueSkillState(BaseModel):
    """Gaussian skill beliefs (mu, sigma) per item plus the game parameters."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mu: np.ndarray
    sigma: np.ndarray
    beta: float
    tau: float = 0.0
    mu0: float
    sigma0: float

    @field_validator("mu", "sigma", mode="before")
    @classmethod
    def _as_readonly_vector(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64).reshape(-1)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_state(self) -> "TrueSkillState":
        if self.mu.shape != self.sigma.shape:
            raise ValueError("mu and sigma must have the same length")
        if np.any(self.sigma <= 0):
            raise ValueError("sigma must be positive")
        if self.beta <= 0 or self.sigma0 <= 0 or self.tau < 0:
            raise ValueError("beta and sigma0 must be positive, tau non-negative")
        return self

    @classmethod
    def initial(cls, n: int, config: TrueSkillConfig = TrueSkillConfig()) -> "TrueSkillState":
        return cls(
            mu=np.full(n, config.mu0),
            sigma=np.full(n, config.sigma0),
            beta=config.beta,
            tau=config.tau,
            mu0=config.mu0,
            sigma0=config.sigma0,
        )

    def win_probability(self, i: int, j: int) -> float:
        """Predictive probability that i beats j under the current beliefs."""
        c = math.sqrt(2.0 * self.beta ** 2 + self.sigma[i] ** 2 + self.sigma[j] ** 2)
        return float(0.5 * math.erfc(-(self.mu[i] - self.mu[j]) / (c * math.sqrt(2.0))))


def _win_posterior(
    mu: np.ndarray, var: np.ndarray, winner: int, loser: int, beta: float, tau: float
) -> tuple[float, float, float, float]:
    """Posterior (mu_w, var_w, mu_l, var_l) after one decisive game."""
    var_w = var[winner] + tau * tau
    var_l = var[loser] + tau * tau
    c_squared = 2.0 * beta * beta + var_w + var_l
    c = math.sqrt(c_squared)
    t = (mu[winner] - mu[loser]) / c
    v = float(_inverse_mills(t))
    w = v * (v + t)
    return (
        mu[winner] + (var_w / c) * v,
        var_w * (1.0 - (var_w / c_squared) * w),
        mu[loser] - (var_l / c) * v,
        var_l * (1.0 - (var_l / c_squared) * w),
    )


def _apply_game(
    mu: np.ndarray,
    var: np.ndarray,
    i: int,
    j: int,
    beta: float,
    tau: float,
    p: float = 1.0,
    weight: float = 1.0,
) -> None:
    """
    In-place update for a game between i and j.

    p is the probability that i won; p = 1, weight = 1 is a plain win of i.
    Otherwise the update is the p-weighted expectation of both outcomes,
    applied with the given weight.
    """
    if p == 1.0 and weight == 1.0:
        mu[i], var[i], mu[j], var[j] = _win_posterior(mu, var, i, j, beta, tau)
        return
    mu_i_a, var_i_a, mu_j_a, var_j_a = _win_posterior(mu, var, i, j, beta, tau)
    mu_j_b, var_j_b, mu_i_b, var_i_b = _win_posterior(mu, var, j, i, beta, tau)
    q = 1.0 - p
    mu_i, var_i, mu_j, var_j = mu[i], var[i], mu[j], var[j]
    mu[i] = mu_i + weight * (p * (mu_i_a - mu_i) + q * (mu_i_b - mu_i))
    var[i] = var_i + weight * (p * (var_i_a - var_i) + q * (var_i_b - var_i))
    mu[j] = mu_j + weight * (p * (mu_j_a - mu_j) + q * (mu_j_b - mu_j))
    var[j] = var_j + weight * (p * (var_j_a - var_j) + q * (var_j_b - var_j))


def trueskill_update(state: TrueSkillState, winner: int, loser: int) -> TrueSkillState:
    """
    One two-player, no-draw TrueSkill update.

    Raises:
        ValueError: If winner == loser
    """
    if winner == loser:
        raise ValueError("winner and loser must differ")
    mu, var = state.mu.copy(), state.sigma ** 2
    _apply_game(mu, var, winner, loser, state.beta, state.tau)
    return state.model_copy(update={"mu": _readonly(mu), "sigma": _readonly(np.sqrt(var))})


def trueskill_expected_update(
    state: TrueSkillState, i: int, j: int, p: float, weight: float = 1.0
) -> TrueSkillState:
    """Update with the p-weighted expectation of "i wins" and "j wins"."""
    if i == j:
        raise ValueError("a game needs two distinct items")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    mu, var = state.mu.copy(), state.sigma ** 2
    _apply_game(mu, var, i, j, state.beta, state.tau, p=p, weight=weight)
    return state.model_copy(update={"mu": _readonly(mu), "sigma": _readonly(np.sqrt(var))})


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _check_scalable(matrix: ComparisonMatrix) -> None:
    violations = validate(matrix)
    if violations:
        raise InvalidMatrixError(f"invalid comparison matrix: {violations[:3]}")
    if matrix.total_comparisons() <= 0:
        raise ScalingError("matrix holds no comparisons")


def _replay_events(matrix: ComparisonMatrix) -> list[tuple[int, int, float, float]]:
    """
    Expand counts into (i, j, p, weight) game events in canonical id order.

    Each direction contributes floor(c_ij) decisive games; the fractional
    parts of both directions are replayed as expected-outcome games of
    weight at most 1 whose win probability is their share of the remainder.
    """
    ids = matrix.item_ids
    pairs = []
    for i, j in matrix.observed_pairs():
        a, b = (i, j) if ids[i] < ids[j] else (j, i)
        pairs.append((ids[a], ids[b], a, b))
    pairs.sort()

    events: list[tuple[int, int, float, float]] = []
    for _, _, a, b in pairs:
        c_ab, c_ba = float(matrix.counts[a, b]), float(matrix.counts[b, a])
        wins_a = math.floor(c_ab + 1e-9)
        wins_b = math.floor(c_ba + 1e-9)
        events.extend([(a, b, 1.0, 1.0)] * wins_a)
        events.extend([(b, a, 1.0, 1.0)] * wins_b)
        remainder = c_ab + c_ba - wins_a - wins_b
        if remainder <= 1e-9:
            continue
        p = min(1.0, max(0.0, (c_ab - wins_a) / remainder))
        while remainder > 1.0 + 1e-9:
            events.append((a, b, p, 1.0))
            remainder -= 1.0
        events.append((a, b, p, remainder))
    return events


def _replay(
    matrix: ComparisonMatrix,
    config: TrueSkillConfig,
    seed: int,
    state0: Optional[TrueSkillState],
) -> tuple[np.ndarray, np.ndarray]:
    state = state0 if state0 is not None else TrueSkillState.initial(matrix.n, config)
    if len(state.mu) != matrix.n:
        raise ValueError(f"initial state covers {len(state.mu)} items, matrix {matrix.n}")
    mu, var = state.mu.copy(), state.sigma ** 2
    events = _replay_events(matrix)
    rng = substream(seed, "trueskill/replay")
    for _ in range(config.passes):
        for k in rng.permutation(len(events)):
            i, j, p, weight = events[k]
            _apply_game(mu, var, i, j, state.beta, state.tau, p=p, weight=weight)
    logger.debug(f"replayed {len(events)} events x {config.passes} passes")
    return mu, var


def scale_trueskill(
    matrix: ComparisonMatrix,
    config: TrueSkillConfig = TrueSkillConfig(),
    seed: int = 0,
    state0: Optional[TrueSkillState] = None,
    sigma_obs: float = DEFAULT_SIGMA_OBS,
) -> JodScale:
    """
    Scale a matrix by replaying its games through TrueSkill.

    Games are replayed in a seeded random order for config.passes passes;
    the final mu is centered per connected component and converted to JOD
    by config.jod_per_mu (default sigma_obs / beta, where TrueSkill predicts
    75 % at 1 JOD).

    Raises:
        InvalidMatrixError: If the matrix violates its invariants
        ScalingError: If the matrix holds no comparisons
    """
    _check_scalable(matrix)
    mu, var = _replay(matrix, config, seed, state0)

    components = connected_components(matrix)
    if len(components) > 1:
        logger.warning(
            f"TrueSkill input is disconnected into {len(components)} components; "
            f"scores are centered per component and not comparable across them"
        )
    index = {item_id: k for k, item_id in enumerate(matrix.item_ids)}
    centered = mu.copy()
    for component in components:
        members = [index[item_id] for item_id in component]
        centered[members] -= mu[members].mean()

    jod_per_mu = config.jod_per_mu if config.jod_per_mu is not None else sigma_obs / config.beta
    return JodScale.centered(list(matrix.item_ids), centered * jod_per_mu, np.sqrt(var) * jod_per_mu)


# ---------------- Maximum likelihood ----------------


def _score_vector(scores: JodScale, matrix: ComparisonMatrix) -> np.ndarray:
    if set(scores.item_ids) != set(matrix.item_ids) or len(scores.item_ids) != matrix.n:
        raise IdMismatchError("scores and matrix cover different items")
    return scores.reordered(list(matrix.item_ids))


def _ll(s: np.ndarray, counts: np.ndarray, scale: float) -> float:
    mask = counts > 0
    d = (s[:, None] - s[None, :]) / scale
    return float(np.sum(counts[mask] * log_ndtr(d[mask])))


def _ll_gradient(s: np.ndarray, counts: np.ndarray, scale: float) -> np.ndarray:
    d = (s[:, None] - s[None, :]) / scale
    g = np.where(counts > 0, counts * _inverse_mills(d), 0.0) / scale
    return g.sum(axis=1) - g.sum(axis=0)


def _ll_laplacian(s: np.ndarray, counts: np.ndarray, scale: float) -> np.ndarray:
    """Negative Hessian of the log-likelihood (a weighted graph Laplacian)."""
    d = (s[:, None] - s[None, :]) / scale
    lam = _inverse_mills(d)
    curvature = np.where(counts > 0, counts * lam * (d + lam), 0.0) / (scale * scale)
    weights = curvature + curvature.T
    return np.diag(weights.sum(axis=1)) - weights


def log_likelihood(
    scores: JodScale, matrix: ComparisonMatrix, sigma_obs: float = DEFAULT_SIGMA_OBS
) -> float:
    """
    Coefficient-free binomial log-likelihood under the Gaussian link.

    Sum over ordered pairs of c_ij * log Phi((s_i - s_j) / (sigma_obs * sqrt(2))).
    """
    s = _score_vector(scores, matrix)
    return _ll(s, matrix.counts, sigma_obs * math.sqrt(2.0))


def log_likelihood_gradient(
    scores: JodScale, matrix: ComparisonMatrix, sigma_obs: float = DEFAULT_SIGMA_OBS
) -> np.ndarray:
    """Gradient of log_likelihood w.r.t. the scores, in matrix item order."""
    s = _score_vector(scores, matrix)
    return _ll_gradient(s, matrix.counts, sigma_obs * math.sqrt(2.0))


def scale_mle(matrix: ComparisonMatrix, config: MleScalerConfig = MleScalerConfig()) -> JodScale:
    """
    Maximum-likelihood Thurstone Case V scaling.

    The prior pseudocount is added to both directions of every observed
    pair; the zero-mean optimum is reached by line-searched ascent and
    accepted once the gradient infinity-norm falls below the tolerance.

    Raises:
        InvalidMatrixError: If the matrix violates its invariants
        ScalingError: If the matrix holds no comparisons
        DisconnectedGraphError: If the comparison graph is not connected
        ConvergenceError: If max_iterations is exhausted
    """
    _check_scalable(matrix)
    components = connected_components(matrix)
    if len(components) > 1:
        raise DisconnectedGraphError(components)

    counts = with_prior(matrix, config.prior_pseudocount).counts
    scale = config.sigma_obs * math.sqrt(2.0)
    control = config.step_control
    n = matrix.n
    s = np.zeros(n)
    step = control.initial_step
    f = _ll(s, counts, scale)
    g = _ll_gradient(s, counts, scale)

    for iteration in range(config.max_iterations):
        gradient_norm = float(np.max(np.abs(g)))
        if gradient_norm < config.gradient_tolerance:
            logger.debug(f"MLE converged after {iteration} iterations (|g|={gradient_norm:.2e})")
            return JodScale.centered(list(matrix.item_ids), s)

        if config.optimizer == "newton":
            laplacian = _ll_laplacian(s, counts, scale)
            direction = np.linalg.solve(laplacian + np.ones((n, n)) / n, g)
            step = 1.0
        else:
            direction = g
        slope = float(g @ direction)

        for _ in range(control.max_backtracks):
            candidate = s + step * direction
            f_new = _ll(candidate, counts, scale)
            g_new = _ll_gradient(candidate, counts, scale)
            if f_new >= f + control.armijo * step * slope:
                break
            # Below float resolution the value test is noise; along a concave
            # line a non-negative directional derivative means no overshoot.
            if abs(f_new - f) <= 1e-12 * max(1.0, abs(f)) and g_new @ direction >= 0:
                break
            step *= control.shrink
        else:
            raise ConvergenceError("line search failed to find an ascent step", gradient_norm)

        s, f, g = candidate - candidate.mean(), f_new, g_new
        if config.optimizer == "gradient":
            step /= control.shrink

    raise ConvergenceError(
        f"MLE did not converge within {config.max_iterations} iterations",
        float(np.max(np.abs(g)))
    )


def calibrate_trueskill(
    matrix: ComparisonMatrix,
    config: TrueSkillConfig = TrueSkillConfig(),
    mle_config: MleScalerConfig = MleScalerConfig(),
    seed: int = 0,
) -> float:
    """
    Fit the JOD-per-mu factor of TrueSkill against the MLE scaler.

    Least-squares slope through the origin of MLE scores on centered
    TrueSkill mu; intended for a dense synthetic matrix.
    """
    reference = scale_mle(matrix, mle_config)
    raw = scale_trueskill(matrix, config.model_copy(update={"jod_per_mu": 1.0}), seed=seed)
    mu = raw.scores
    target = reference.reordered(list(raw.item_ids))
    factor = float(mu @ target / (mu @ mu))
    logger.info(f"calibrated TrueSkill scale: {factor:.4f} JOD per mu unit")
    return factor


def scale_matrix(
    matrix: ComparisonMatrix,
    method: Literal["trueskill", "mle"],
    trueskill_config: TrueSkillConfig = TrueSkillConfig(),
    mle_config: MleScalerConfig = MleScalerConfig(),
    seed: int = 0,
) -> JodScale:
    """Dispatch to the configured scaler."""
    if method == "mle":
        return scale_mle(matrix, mle_config)
    if method == "trueskill":
        return scale_trueskill(matrix, trueskill_config, seed=seed, sigma_obs=mle_config.sigma_obs)
    raise ValueError(f"unknown scaling method {method!r}")


# ---------------- Alignment and IO ----------------


def align_scores(predicted: JodScale, reference: JodScale) -> JodScale:
    """
    Shift predicted scores so their mean equals the reference mean.

    Raises:
        IdMismatchError: If the two scales cover different items
    """
    if set(predicted.item_ids) != set(reference.item_ids):
        raise IdMismatchError(
            f"cannot align scales over different items: "
            f"{sorted(set(predicted.item_ids) ^ set(reference.item_ids))}"
        )
    shift = float(reference.scores.mean() - predicted.scores.mean())
    return JodScale(
        item_ids=predicted.item_ids,
        scores=predicted.scores + shift,
        sigma=predicted.sigma,
        convention="aligned",
    )


def dumps_scores(scale: JodScale) -> str:
    items = []
    for k, item_id in enumerate(scale.item_ids):
        entry: dict[str, Any] = {"id": item_id, "score": float(scale.scores[k])}
        if scale.sigma is not None:
            entry["sigma"] = float(scale.sigma[k])
        items.append(entry)
    payload = {"format": SCORES_FORMAT, "convention": scale.convention, "items": items}
    return json.dumps(payload, indent=2) + "\n"


def save_scores(scale: JodScale, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_scores(scale), encoding="utf-8")


def load_scores(path: Union[str, Path]) -> JodScale:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    items = payload.get("items", [])
    sigma = None
    if items and all("sigma" in item for item in items):
        sigma = [item["sigma"] for item in items]
    return JodScale(
        item_ids=tuple(item["id"] for item in items),
        scores=[item["score"] for item in items],
        sigma=sigma,
        convention=payload.get("convention", "zero_mean"),
    )
