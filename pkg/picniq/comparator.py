"""
Pairwise Comparator
Siamese feature backbone, odd hub layer and sigmoid head, trained with a
comparison-weighted binary cross-entropy and exact analytic gradients.
"""

import copy
import json
import logging
import math
from pathlib import Path
from typing import Any, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.special import expit

from picniq.errors import DimensionMismatchError, EmptyTrainingSetError, MissingFeaturesError
from picniq.models.configs import AdamParameters, ComparatorConfig, TrainConfig
from picniq.models.matrix import ItemSet, PairRecord
from picniq.seeding import substream


logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "picniq-comparator/1"
PROBABILITY_CLAMP = 1e-12

Gradients = dict[str, np.ndarray]


class DenseLayer(BaseModel):
    """y = activation(W x + b), W shaped (out, in)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    weight: np.ndarray
    bias: np.ndarray
    activation: Literal["relu", "identity"]

    @field_validator("weight", "bias", mode="before")
    @classmethod
    def _as_float_array(cls, value: Any) -> np.ndarray:
        return np.array(value, dtype=np.float64)

    @model_validator(mode="after")
    def _check_shapes(self) -> "DenseLayer":
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError(
                f"inconsistent layer shapes: weight {self.weight.shape}, bias {self.bias.shape}"
            )
        return self

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


class ComparatorModel(BaseModel):
    """
    Backbone B (stack of dense layers, possibly empty) plus hub weight w.

    The hub's affine layer F(V) = w.V + b enters the score only through its
    odd part, H(V) = (F(V) - F(-V)) / 2, in which the bias cancels.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    layers: list[DenseLayer]
    hub_weight: np.ndarray
    hub_bias: np.ndarray
    feature_dim: int
    config: ComparatorConfig = ComparatorConfig()

    @field_validator("hub_weight", "hub_bias", mode="before")
    @classmethod
    def _as_float_vector(cls, value: Any) -> np.ndarray:
        return np.array(value, dtype=np.float64).reshape(-1)

    @model_validator(mode="after")
    def _check_chain(self) -> "ComparatorModel":
        width = self.feature_dim
        for k, layer in enumerate(self.layers):
            if layer.in_dim != width:
                raise ValueError(f"layer {k} expects {layer.in_dim} inputs, receives {width}")
            width = layer.out_dim
        if self.hub_weight.shape != (width,):
            raise ValueError(f"hub weight has {self.hub_weight.shape[0]} entries, embedding has {width}")
        if self.hub_bias.shape != (1,):
            raise ValueError("hub bias must hold exactly one value")
        return self

    @classmethod
    def initialize(
        cls, feature_dim: int, config: ComparatorConfig = ComparatorConfig(), seed: int = 0
    ) -> "ComparatorModel":
        """
        He-initialized ReLU hidden layers, a linear embedding layer and a
        small random hub; all biases start at zero.
        """
        if feature_dim < 1:
            raise ValueError(f"feature_dim must be >= 1, got {feature_dim}")
        rng = substream(seed, "train/init")
        widths = [feature_dim, *config.hidden_dims, config.embedding_dim]
        layers = []
        for k, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            last = k == len(widths) - 2
            gain = 1.0 if last else 2.0
            layers.append(DenseLayer(
                weight=rng.normal(0.0, math.sqrt(gain / fan_in), size=(fan_out, fan_in)),
                bias=np.zeros(fan_out),
                activation="identity" if last else "relu",
            ))
        hub_weight = rng.normal(0.0, math.sqrt(1.0 / config.embedding_dim), size=config.embedding_dim)
        return cls(
            layers=layers, hub_weight=hub_weight, hub_bias=np.zeros(1),
            feature_dim=feature_dim, config=config,
        )

    @property
    def embedding_dim(self) -> int:
        return self.hub_weight.shape[0]

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        """Every trainable array, by stable name; arrays are live views."""
        params = []
        for k, layer in enumerate(self.layers):
            params.append((f"backbone.{k}.weight", layer.weight))
            params.append((f"backbone.{k}.bias", layer.bias))
        params.append(("hub.weight", self.hub_weight))
        params.append(("hub.bias", self.hub_bias))
        return params

    def clone(self) -> "ComparatorModel":
        return copy.deepcopy(self)

    def embed(self, features: np.ndarray) -> np.ndarray:
        """Backbone embeddings for an (m, d) feature array."""
        return _embed_trace(self, features)[-1][1]


# ---------------- Forward pass ----------------


def _check_features(model: ComparatorModel, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[None, :]
    if features.shape[1] != model.feature_dim:
        raise DimensionMismatchError(
            f"model expects {model.feature_dim} features, got {features.shape[1]}"
        )
    return features


def _embed_trace(model: ComparatorModel, features: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """(pre-activation, activation) per layer; entry 0 is the raw input."""
    features = _check_features(model, features)
    trace = [(features, features)]
    activation = features
    for layer in model.layers:
        pre = activation @ layer.weight.T + layer.bias
        activation = np.maximum(pre, 0.0) if layer.activation == "relu" else pre
        trace.append((pre, activation))
    return trace


def hub_affine(model: ComparatorModel, difference: np.ndarray) -> np.ndarray:
    """The hub's affine map F(V) = w.V + b."""
    return np.asarray(difference, dtype=np.float64) @ model.hub_weight + model.hub_bias[0]


def hub_response(model: ComparatorModel, difference: np.ndarray) -> np.ndarray:
    """
    Odd part of the hub, H(V) = (F(V) - F(-V)) / 2.

    The bias terms are differenced before the linear ones, so they cancel
    bit-exactly and H(-V) == -H(V) holds without rounding.
    """
    difference = np.asarray(difference, dtype=np.float64)
    bias = model.hub_bias[0]
    return 0.5 * ((difference @ model.hub_weight - (-difference) @ model.hub_weight) + (bias - bias))


def _head(logits: np.ndarray) -> np.ndarray:
    """Sigmoid clamped to [1e-12, 1 - 1e-12], strictly inside (0, 1)."""
    return np.clip(expit(logits), PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)


def forward(model: ComparatorModel, feat_i: np.ndarray, feat_j: np.ndarray) -> float:
    """
    Probability that item i is preferred over item j.

    Raises:
        DimensionMismatchError: If either feature vector has the wrong length
    """
    embeddings = model.embed(np.vstack([_check_features(model, feat_i), _check_features(model, feat_j)]))
    return float(_head(hub_response(model, embeddings[0] - embeddings[1])))


def predict_pairs(
    model: ComparatorModel, items: ItemSet, pairs: Sequence[tuple[int, int]]
) -> np.ndarray:
    """Predicted p_ij for index pairs into items; each item is embedded once."""
    if not pairs:
        return np.zeros(0)
    embeddings = model.embed(items.feature_matrix())
    rows = np.array([p[0] for p in pairs])
    cols = np.array([p[1] for p in pairs])
    return _head(hub_response(model, embeddings[rows] - embeddings[cols]))


# ---------------- Batches and loss ----------------


class TrainBatch(BaseModel):
    """
    Records resolved to feature slots.

    With the item cache every distinct item occupies one slot no matter how
    many records reference it; without it each record side gets its own slot.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    item_ids: tuple[str, ...]
    features: np.ndarray
    left: np.ndarray
    right: np.ndarray
    p: np.ndarray
    n: np.ndarray
    cached: bool = True

    @classmethod
    def build(cls, records: Sequence[PairRecord], items: ItemSet, use_cache: bool = True) -> "TrainBatch":
        """
        Raises:
            MissingFeaturesError: If a record references an item without features
        """
        index = items.index_of()
        missing = sorted({
            item_id for r in records for item_id in (r.id_i, r.id_j) if item_id not in index
        })
        if missing:
            raise MissingFeaturesError(f"no features for items {missing}")
        table = cls(
            item_ids=tuple(items.ids),
            features=items.feature_matrix(),
            left=np.array([index[r.id_i] for r in records], dtype=np.int64),
            right=np.array([index[r.id_j] for r in records], dtype=np.int64),
            p=np.array([r.p_ij for r in records], dtype=np.float64),
            n=np.array([r.n_ij for r in records], dtype=np.float64),
            cached=use_cache,
        )
        return table.select(np.arange(len(records)))

    @property
    def size(self) -> int:
        return len(self.left)

    def select(self, indices: np.ndarray, flip: Optional[np.ndarray] = None) -> "TrainBatch":
        """
        Sub-batch of the given records, optionally reversing the orientation
        of those where flip is True (flip is aligned with indices).
        """
        indices = np.asarray(indices, dtype=np.int64)
        left, right = self.left[indices], self.right[indices]
        p, n = self.p[indices], self.n[indices]
        if flip is not None:
            flip = np.asarray(flip, dtype=bool)
            left, right = np.where(flip, right, left), np.where(flip, left, right)
            p = np.where(flip, 1.0 - p, p)

        m = len(indices)
        if self.cached:
            used, inverse = np.unique(np.concatenate([left, right]), return_inverse=True)
            slots, left, right = used, inverse[:m], inverse[m:]
        else:
            slots = np.concatenate([left, right])
            left, right = np.arange(m), m + np.arange(m)
        return TrainBatch(
            item_ids=tuple(self.item_ids[k] for k in slots),
            features=self.features[slots],
            left=left, right=right, p=p, n=n,
            cached=self.cached,
        )


def loss_weighted_bce(predictions: Sequence[float], records: Sequence[PairRecord]) -> float:
    """
    -(1/N) sum n_ij [p_ij log M + (1 - p_ij) log(1 - M)], N = sum n_ij.

    Predictions are clamped to [1e-12, 1 - 1e-12] before the logarithms.
    """
    if len(predictions) != len(records):
        raise ValueError(f"{len(predictions)} predictions for {len(records)} records")
    if not records:
        raise ValueError("loss needs at least one record")
    p = np.array([r.p_ij for r in records])
    n = np.array([r.n_ij for r in records])
    return _weighted_bce(np.asarray(predictions, dtype=np.float64), p, n, float(n.sum()))


def _weighted_bce(predictions: np.ndarray, p: np.ndarray, n: np.ndarray, normalizer: float) -> float:
    m = np.clip(predictions, PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
    return float(-np.sum(n * (p * np.log(m) + (1.0 - p) * np.log1p(-m))) / normalizer)


def batch_predictions(model: ComparatorModel, batch: TrainBatch) -> np.ndarray:
    embeddings = model.embed(batch.features)
    return expit(hub_response(model, embeddings[batch.left] - embeddings[batch.right]))


def batch_loss(model: ComparatorModel, batch: TrainBatch, normalizer: Optional[float] = None) -> float:
    normalizer = float(batch.n.sum()) if normalizer is None else normalizer
    return _weighted_bce(batch_predictions(model, batch), batch.p, batch.n, normalizer)


def _loss_and_gradients(
    model: ComparatorModel, batch: TrainBatch, normalizer: Optional[float] = None
) -> tuple[float, Gradients]:
    if batch.size == 0:
        raise ValueError("backward needs a non-empty batch")
    normalizer = float(batch.n.sum()) if normalizer is None else normalizer

    trace = _embed_trace(model, batch.features)
    embeddings = trace[-1][1]
    difference = embeddings[batch.left] - embeddings[batch.right]
    predictions = expit(hub_response(model, difference))
    loss = _weighted_bce(predictions, batch.p, batch.n, normalizer)

    # d loss / d logit for sigmoid + cross-entropy
    d_logit = batch.n * (predictions - batch.p) / normalizer
    gradients: Gradients = {
        "hub.weight": difference.T @ d_logit,
        "hub.bias": np.zeros(1),
    }

    d_difference = np.outer(d_logit, model.hub_weight)
    delta = np.zeros_like(embeddings)
    np.add.at(delta, batch.left, d_difference)
    np.add.at(delta, batch.right, -d_difference)

    for k in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[k]
        pre = trace[k + 1][0]
        if layer.activation == "relu":
            delta = delta * (pre > 0)
        gradients[f"backbone.{k}.weight"] = delta.T @ trace[k][1]
        gradients[f"backbone.{k}.bias"] = delta.sum(axis=0)
        delta = delta @ layer.weight
    return loss, gradients


def backward(model: ComparatorModel, batch: TrainBatch, normalizer: Optional[float] = None) -> Gradients:
    """
    Exact gradients of the batch's weighted BCE for every named parameter.

    Each item embedding accumulates the contributions of every record it
    appears in before backpropagating through the backbone once.
    normalizer overrides N (the batch's total comparison count).
    """
    return _loss_and_gradients(model, batch, normalizer)[1]


def evaluate_loss(model: ComparatorModel, records: Sequence[PairRecord], items: ItemSet) -> float:
    """Weighted BCE of the model over a full record set."""
    return batch_loss(model, TrainBatch.build(records, items))


def grad_check(
    model: ComparatorModel,
    batch: TrainBatch,
    epsilon: float = 1e-5,
    gradient: Optional[Gradients] = None,
) -> float:
    """
    Worst per-tensor relative error between analytic and central-difference
    gradients, ||a - b|| / max(||a||, ||b||, 1e-12).

    gradient defaults to backward(model, batch); pass one in to check an
    externally computed (or deliberately corrupted) gradient.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    analytic = gradient if gradient is not None else backward(model, batch)
    probe = model.clone()
    worst = 0.0
    for name, param in probe.named_parameters():
        numeric = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            original = param[idx]
            param[idx] = original + epsilon
            upper = batch_loss(probe, batch)
            param[idx] = original - epsilon
            lower = batch_loss(probe, batch)
            param[idx] = original
            numeric[idx] = (upper - lower) / (2.0 * epsilon)
        a = analytic[name]
        denominator = max(np.linalg.norm(a), np.linalg.norm(numeric), 1e-12)
        error = float(np.linalg.norm(a - numeric) / denominator)
        logger.debug(f"grad_check {name}: relative error {error:.3e}")
        worst = max(worst, error)
    return worst


# ---------------- Optimization ----------------


class AdamOptimizer:
    """Adam with one learning rate for the backbone and one for the hub."""

    def __init__(self, lr_backbone: float, lr_hub: float, params: AdamParameters = AdamParameters()):
        self.learning_rates = {"backbone": lr_backbone, "hub": lr_hub}
        self.params = params
        self.step_count = 0
        self._first: dict[str, np.ndarray] = {}
        self._second: dict[str, np.ndarray] = {}

    def step(self, model: ComparatorModel, gradients: Gradients) -> None:
        """Update the model's parameters in place."""
        self.step_count += 1
        b1, b2 = self.params.beta1, self.params.beta2
        correction1 = 1.0 - b1 ** self.step_count
        correction2 = 1.0 - b2 ** self.step_count
        for name, param in model.named_parameters():
            g = gradients[name]
            m = self._first.get(name, np.zeros_like(param))
            v = self._second.get(name, np.zeros_like(param))
            m = b1 * m + (1.0 - b1) * g
            v = b2 * v + (1.0 - b2) * g * g
            self._first[name], self._second[name] = m, v
            lr = self.learning_rates[name.split(".", 1)[0]]
            param -= lr * (m / correction1) / (np.sqrt(v / correction2) + self.params.epsilon)

    def decay(self, factor: float) -> None:
        for group in self.learning_rates:
            self.learning_rates[group] *= factor


def train(
    model: ComparatorModel,
    records: Sequence[PairRecord],
    items: ItemSet,
    config: TrainConfig = TrainConfig(),
) -> tuple[ComparatorModel, list[float]]:
    """
    Train a copy of the model on pair records.

    Records below config.min_comparisons_threshold are dropped first. Each
    epoch re-draws every record's orientation and the batch order from
    seeded sub-streams, then decays both learning rates.

    Returns:
        The trained model and the full-data loss after each epoch

    Raises:
        EmptyTrainingSetError: If no record survives the threshold
    """
    kept = [r for r in records if r.n_ij >= config.min_comparisons_threshold]
    if not kept:
        raise EmptyTrainingSetError(
            f"no pair records with at least {config.min_comparisons_threshold} comparisons "
            f"(of {len(records)} records)"
        )
    logger.info(f"training on {len(kept)} of {len(records)} pair records for {config.epochs} epochs")

    trained = model.clone()
    full = TrainBatch.build(kept, items, use_cache=config.use_item_cache)
    optimizer = AdamOptimizer(config.lr_backbone, config.lr_hub, config.adam)
    shuffle_rng = substream(config.seed, "train/shuffle")
    orientation_rng = substream(config.seed, "train/orientation")

    history: list[float] = []
    for epoch in range(config.epochs):
        flip = orientation_rng.random(full.size) < 0.5
        order = shuffle_rng.permutation(full.size)
        for start in range(0, full.size, config.batch_size):
            chunk = order[start:start + config.batch_size]
            optimizer.step(trained, backward(trained, full.select(chunk, flip[chunk])))
        optimizer.decay(config.decay)
        history.append(batch_loss(trained, full))
        logger.debug(f"epoch {epoch + 1}/{config.epochs}: loss {history[-1]:.6f}")

    logger.info(f"training finished: loss {history[0]:.4f} -> {history[-1]:.4f}")
    return trained, history


# ---------------- Checkpoints ----------------


def dumps_checkpoint(model: ComparatorModel, train_config: Optional[TrainConfig] = None) -> str:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "feature_dim": model.feature_dim,
        "embedding_dim": model.embedding_dim,
        "config": model.config.model_dump(mode="json"),
        "train": train_config.model_dump(mode="json") if train_config is not None else None,
        "layers": [
            {
                "activation": layer.activation,
                "weight": layer.weight.tolist(),
                "bias": layer.bias.tolist(),
            }
            for layer in model.layers
        ],
        "hub": {"weight": model.hub_weight.tolist(), "bias": model.hub_bias.tolist()},
    }
    return json.dumps(payload, indent=2) + "\n"


def save_checkpoint(
    model: ComparatorModel, path: Union[str, Path], train_config: Optional[TrainConfig] = None
) -> None:
    Path(path).write_text(dumps_checkpoint(model, train_config), encoding="utf-8")
    logger.debug(f"saved comparator checkpoint to {path}")


def load_checkpoint(path: Union[str, Path]) -> ComparatorModel:
    """
    Raises:
        ValueError: If the file is not a comparator checkpoint
    """
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: expected format {CHECKPOINT_FORMAT}, got {payload.get('format')!r}")
    return ComparatorModel(
        layers=[DenseLayer(**layer) for layer in payload["layers"]],
        hub_weight=payload["hub"]["weight"],
        hub_bias=payload["hub"]["bias"],
        feature_dim=payload["feature_dim"],
        config=ComparatorConfig.model_validate(payload["config"]),
    )
