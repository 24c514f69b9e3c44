"""
Configuration Models
Validated parameter sets for the observer, scalers, comparator and inference.
Unknown keys are rejected everywhere.
"""

import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import ndtri


# 1 JOD <-> 75 % preference: Phi(1 / (sigma * sqrt(2))) = 0.75
DEFAULT_SIGMA_OBS = 1.0 / (math.sqrt(2.0) * float(ndtri(0.75)))


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ObserverConfig(StrictModel):
    """Thurstone Case V observer: equal per-condition Gaussian noise."""

    sigma_obs: float = Field(DEFAULT_SIGMA_OBS, gt=0.0, description="Per-condition observation noise")
    rng_seed: int = Field(0, ge=0)


class Design(StrictModel):
    """Which unordered pairs get compared, and how often."""

    kind: Literal["full", "chain_plus_random"]
    n_items: int = Field(..., ge=1)
    pairs: list[tuple[int, int]] = Field(default_factory=list)
    comparisons_per_pair: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_pairs(self) -> "Design":
        seen = set()
        for i, j in self.pairs:
            if not (0 <= i < self.n_items and 0 <= j < self.n_items):
                raise ValueError(f"pair ({i}, {j}) out of range for {self.n_items} items")
            if i == j:
                raise ValueError(f"self-pair ({i}, {i})")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate pair {key}")
            seen.add(key)
        if self.kind == "chain_plus_random" and self.pairs:
            missing = [(k, k + 1) for k in range(self.n_items - 1) if (k, k + 1) not in seen]
            if missing:
                raise ValueError(f"chain_plus_random design lacks chain pairs {missing}")
        return self


class TrueSkillConfig(StrictModel):
    """Two-player, no-draw TrueSkill replay parameters."""

    mu0: float = 25.0
    sigma0: float = Field(25.0 / 3.0, gt=0.0)
    beta: float = Field(25.0 / 6.0, gt=0.0)
    tau: float = Field(0.0, ge=0.0)
    passes: int = Field(3, ge=1)
    jod_per_mu: Optional[float] = Field(
        None, gt=0.0,
        description="JOD units per TrueSkill mu unit; None uses sigma_obs / beta"
    )


class StepControl(StrictModel):
    """Armijo backtracking line search."""

    initial_step: float = Field(1.0, gt=0.0)
    shrink: float = Field(0.5, gt=0.0, lt=1.0)
    armijo: float = Field(1e-4, gt=0.0, lt=1.0)
    max_backtracks: int = Field(60, ge=1)


class MleScalerConfig(StrictModel):
    """Direct maximum-likelihood Thurstonian scaling."""

    prior_pseudocount: float = Field(0.5, ge=0.0)
    max_iterations: int = Field(10000, ge=1)
    gradient_tolerance: float = Field(1e-6, gt=0.0)
    optimizer: Literal["gradient", "newton"] = "gradient"
    step_control: StepControl = Field(default_factory=StepControl)
    sigma_obs: float = Field(DEFAULT_SIGMA_OBS, gt=0.0)


class ComparatorConfig(StrictModel):
    """Backbone MLP shape; the hub maps the embedding to one logit."""

    hidden_dims: list[int] = Field(default_factory=lambda: [16])
    embedding_dim: int = Field(8, ge=1)

    @model_validator(mode="after")
    def _check_dims(self) -> "ComparatorConfig":
        if any(d < 1 for d in self.hidden_dims):
            raise ValueError("hidden layer widths must be positive")
        return self


class AdamParameters(StrictModel):
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(1e-8, gt=0.0)


class TrainConfig(StrictModel):
    """Comparator training: Adam with per-module learning rates and epoch decay."""

    lr_backbone: float = Field(1e-3, gt=0.0)
    lr_hub: float = Field(1e-2, gt=0.0)
    adam: AdamParameters = Field(default_factory=AdamParameters)
    decay: float = Field(0.95, gt=0.0, le=1.0, description="Multiplicative learning-rate decay per epoch")
    epochs: int = Field(40, ge=1)
    batch_size: int = Field(32, ge=1)
    min_comparisons_threshold: float = Field(2.0, ge=0.0)
    use_item_cache: bool = True
    seed: int = Field(0, ge=0)


class InferenceConfig(StrictModel):
    """Turning comparator predictions into scores."""

    c_comparisons: float = Field(30.0, gt=0.0, description="Predefined average comparison count c")
    pair_strategy: Literal["full", "chain_plus_random", "active"] = "full"
    scaler: Literal["trueskill", "mle"] = "trueskill"
    budget: Optional[int] = Field(None, ge=1, description="Pair budget for sampled strategies")
    candidate_pool: Optional[int] = Field(None, ge=1)
    single_mode: Literal["fixed", "rescale"] = "fixed"
    seed: int = Field(0, ge=0)
