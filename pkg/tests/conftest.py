"""Shared fixtures for the PICNIQ test suite."""

import numpy as np
import pytest

from picniq.comparator import ComparatorModel
from picniq.models.configs import ComparatorConfig
from picniq.models.matrix import ComparisonMatrix, ItemSet


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def three_item_matrix():
    """A beats B 3:1, B beats C 2:2, A vs C never compared."""
    counts = np.array([
        [0.0, 3.0, 0.0],
        [1.0, 0.0, 2.0],
        [0.0, 2.0, 0.0],
    ])
    return ComparisonMatrix(item_ids=("A", "B", "C"), counts=counts)


@pytest.fixture
def make_model():
    """Factory for small random comparators."""

    def _make(feature_dim=4, hidden=(6, 5), embedding=3, seed=0):
        config = ComparatorConfig(hidden_dims=list(hidden), embedding_dim=embedding)
        return ComparatorModel.initialize(feature_dim, config, seed=seed)

    return _make


@pytest.fixture
def make_items():
    """Factory for item sets with random features."""

    def _make(n=6, dim=4, seed=0, prefix="x"):
        features = np.random.default_rng(seed).normal(size=(n, dim))
        return ItemSet.from_arrays([f"{prefix}{k}" for k in range(n)], features)

    return _make
