"""
Score Scale Model
Per-item quality scores on a just-objectionable-difference (JOD) scale.
"""

from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from picniq.models.matrix import ItemRecord, ItemSet


ZERO_MEAN_TOLERANCE = 1e-9


class JodScale(BaseModel):
    """
    JOD scores for an ordered list of items.

    Scales are translation-invariant; "zero_mean" scales are centered,
    "aligned" scales were shifted onto another scale's mean (or anchored
    against fixed references).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    item_ids: tuple[str, ...]
    scores: np.ndarray
    sigma: Optional[np.ndarray] = Field(None, description="Per-item uncertainty in JOD units")
    convention: Literal["zero_mean", "aligned"] = "zero_mean"

    @field_validator("scores", "sigma", mode="before")
    @classmethod
    def _as_readonly_vector(cls, value: Any) -> Optional[np.ndarray]:
        if value is None:
            return None
        array = np.array(value, dtype=np.float64).reshape(-1)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_scale(self) -> "JodScale":
        if len(self.scores) != len(self.item_ids):
            raise ValueError(f"{len(self.item_ids)} ids but {len(self.scores)} scores")
        if self.sigma is not None and len(self.sigma) != len(self.item_ids):
            raise ValueError("sigma must have one entry per item")
        if len(set(self.item_ids)) != len(self.item_ids):
            raise ValueError("item ids must be unique")
        if (
            self.convention == "zero_mean"
            and len(self.scores)
            and abs(float(self.scores.mean())) > ZERO_MEAN_TOLERANCE
        ):
            raise ValueError(f"zero_mean scale has mean {float(self.scores.mean())}")
        return self

    @classmethod
    def centered(
        cls, item_ids: list[str], scores: np.ndarray, sigma: Optional[np.ndarray] = None
    ) -> "JodScale":
        scores = np.asarray(scores, dtype=np.float64)
        return cls(item_ids=tuple(item_ids), scores=scores - scores.mean(), sigma=sigma)

    def as_dict(self) -> dict[str, float]:
        return {i: float(s) for i, s in zip(self.item_ids, self.scores)}

    def reordered(self, item_ids: list[str]) -> np.ndarray:
        """Scores in the requested id order."""
        lookup = self.as_dict()
        return np.array([lookup[i] for i in item_ids], dtype=np.float64)


class ReferenceSet(BaseModel):
    """
    Reference items with established scores for single-item anchoring.

    Entries may repeat an id (the same reference listed twice); unique()
    collapses them.
    """

    model_config = ConfigDict(frozen=True)

    items: tuple[ItemRecord, ...]
    scores: tuple[float, ...]

    @model_validator(mode="after")
    def _check_lengths(self) -> "ReferenceSet":
        if len(self.items) != len(self.scores):
            raise ValueError(f"{len(self.items)} reference items but {len(self.scores)} scores")
        return self

    @classmethod
    def from_scale(cls, items: ItemSet, scale: JodScale) -> "ReferenceSet":
        """References in item-set order, scored from an existing scale."""
        lookup = scale.as_dict()
        missing = [i for i in items.ids if i not in lookup]
        if missing:
            raise ValueError(f"references without an established score: {missing}")
        return cls(items=items.items, scores=tuple(lookup[i] for i in items.ids))

    def unique(self) -> "ReferenceSet":
        """
        Collapse repeated ids.

        Raises:
            ValueError: If one id carries conflicting features or scores
        """
        seen: dict[str, tuple[ItemRecord, float]] = {}
        for item, score in zip(self.items, self.scores):
            if item.id in seen:
                if seen[item.id] != (item, score):
                    raise ValueError(f"reference {item.id!r} listed with conflicting data")
                continue
            seen[item.id] = (item, score)
        return ReferenceSet(
            items=tuple(entry[0] for entry in seen.values()),
            scores=tuple(entry[1] for entry in seen.values()),
        )

    @property
    def ids(self) -> list[str]:
        return [item.id for item in self.items]
