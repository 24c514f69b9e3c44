"""
Comparison Matrix Models
Item sets, sparse win-count matrices and pair records.
"""

from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from picniq.errors import MissingFeaturesError


class ItemRecord(BaseModel):
    """One item: an id plus an optional externally supplied feature vector."""

    model_config = ConfigDict(frozen=True)

    id: str = Field(..., min_length=1, description="Unique item identifier")
    features: Optional[tuple[float, ...]] = Field(
        None,
        description="Feature vector of fixed dimension d, if the item carries one"
    )


class ItemSet(BaseModel):
    """
    Ordered set of items.

    Ids are unique and non-empty; every present feature vector shares one
    dimension d >= 1.
    """

    model_config = ConfigDict(frozen=True)

    items: tuple[ItemRecord, ...] = Field(default_factory=tuple)

    @model_validator(mode="after")
    def _check_items(self) -> "ItemSet":
        ids = [item.id for item in self.items]
        if len(set(ids)) != len(ids):
            duplicates = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate item ids: {duplicates}")
        dims = {len(item.features) for item in self.items if item.features is not None}
        if len(dims) > 1:
            raise ValueError(f"feature vectors have mixed dimensions: {sorted(dims)}")
        if dims and min(dims) < 1:
            raise ValueError("feature dimension must be at least 1")
        return self

    @classmethod
    def from_arrays(cls, ids: list[str], features: Optional[np.ndarray] = None) -> "ItemSet":
        """Build an item set from ids and an optional (n, d) feature array."""
        if features is None:
            return cls(items=tuple(ItemRecord(id=i) for i in ids))
        features = np.asarray(features, dtype=np.float64)
        if features.shape[0] != len(ids):
            raise ValueError(f"{len(ids)} ids but {features.shape[0]} feature rows")
        return cls(items=tuple(
            ItemRecord(id=i, features=tuple(float(x) for x in row))
            for i, row in zip(ids, features)
        ))

    @property
    def ids(self) -> list[str]:
        return [item.id for item in self.items]

    @property
    def dim(self) -> Optional[int]:
        for item in self.items:
            if item.features is not None:
                return len(item.features)
        return None

    def index_of(self) -> dict[str, int]:
        return {item.id: k for k, item in enumerate(self.items)}

    def subset(self, ids: list[str]) -> "ItemSet":
        lookup = {item.id: item for item in self.items}
        return ItemSet(items=tuple(lookup[i] for i in ids))

    def feature_matrix(self) -> np.ndarray:
        """
        Stack all feature vectors into an (n, d) float64 array.

        Raises:
            MissingFeaturesError: If any item has no features
        """
        missing = [item.id for item in self.items if item.features is None]
        if missing:
            raise MissingFeaturesError(f"items without features: {missing}")
        if not self.items:
            return np.zeros((0, 0))
        return np.array([item.features for item in self.items], dtype=np.float64)


class ComparisonMatrix(BaseModel):
    """
    Zero-diagonal matrix of (possibly fractional) win counts.

    counts[i, j] is the number of times item i was preferred over item j.
    The pair total n_ij = c_ij + c_ji is always derived, never stored.
    Construction does not enforce the invariants; use
    comparison_matrix.validate to list violations.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    item_ids: tuple[str, ...]
    counts: np.ndarray
    metadata: dict[str, Any] = Field(default_factory=dict)

    @field_validator("counts", mode="before")
    @classmethod
    def _as_readonly_array(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64)
        if array.ndim != 2:
            raise ValueError(f"counts must be 2-D, got shape {array.shape}")
        array.setflags(write=False)
        return array

    @classmethod
    def zeros(cls, item_ids: list[str]) -> "ComparisonMatrix":
        n = len(item_ids)
        return cls(item_ids=tuple(item_ids), counts=np.zeros((n, n)))

    @property
    def n(self) -> int:
        return len(self.item_ids)

    def totals(self) -> np.ndarray:
        """Symmetric matrix of pair totals n_ij."""
        return self.counts + self.counts.T

    def observed_pairs(self) -> list[tuple[int, int]]:
        """Canonical (i < j) pairs with n_ij > 0, row-major order."""
        rows, cols = np.nonzero(np.triu(self.totals(), k=1) > 0)
        return [(int(i), int(j)) for i, j in zip(rows, cols)]

    def with_counts(self, counts: np.ndarray, **metadata: Any) -> "ComparisonMatrix":
        return ComparisonMatrix(
            item_ids=self.item_ids,
            counts=counts,
            metadata={**self.metadata, **metadata}
        )

    def total_comparisons(self) -> float:
        return float(self.counts.sum())


class PairRecord(BaseModel):
    """One observed pair in a chosen orientation."""

    model_config = ConfigDict(frozen=True)

    i: int = Field(..., ge=0)
    j: int = Field(..., ge=0)
    id_i: str
    id_j: str
    wins_i: float = Field(..., ge=0.0)
    wins_j: float = Field(..., ge=0.0)
    p_ij: float = Field(..., ge=0.0, le=1.0)
    n_ij: float = Field(..., gt=0.0)

    @model_validator(mode="after")
    def _check_consistency(self) -> "PairRecord":
        if self.i == self.j:
            raise ValueError("a pair record needs two distinct items")
        if abs(self.n_ij - (self.wins_i + self.wins_j)) > 1e-9 * max(1.0, self.n_ij):
            raise ValueError("n_ij must equal wins_i + wins_j")
        if abs(self.p_ij - self.wins_i / self.n_ij) > 1e-12:
            raise ValueError("p_ij must equal wins_i / n_ij")
        return self

    @classmethod
    def from_wins(
        cls, i: int, j: int, wins_i: float, wins_j: float, id_i: str, id_j: str
    ) -> "PairRecord":
        n = float(wins_i) + float(wins_j)
        return cls(
            i=i, j=j, id_i=id_i, id_j=id_j,
            wins_i=float(wins_i), wins_j=float(wins_j),
            p_ij=float(wins_i) / n if n > 0 else 0.0, n_ij=n
        )

    def flipped(self) -> "PairRecord":
        return PairRecord.from_wins(self.j, self.i, self.wins_j, self.wins_i, self.id_j, self.id_i)


class MatrixSummary(BaseModel):
    """Sparsity profile of a comparison matrix."""

    n_items: int
    observed_pairs: int
    density: float = Field(..., description="Observed pairs over n(n-1)/2")
    total_comparisons: float
    forced_choice_fraction: float = Field(..., description="Share of observed pairs with p in {0, 1}")
    neighbor_fraction: float = Field(..., description="Share of observed pairs with |i - j| = 1")
    components: int
