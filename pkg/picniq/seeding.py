"""
Seeding
Every random draw flows from one root seed, fanned out by labeled sub-streams.
"""

import hashlib

import numpy as np


def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")


def substream(seed: int, label: str) -> np.random.Generator:
    """
    Build an independent generator for one labeled purpose.

    Args:
        seed: Root seed (non-negative)
        label: Purpose label, e.g. "train/shuffle"

    Returns:
        A numpy Generator that depends only on (seed, label)
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence([seed, _label_key(label)]))


def derive_seed(seed: int, label: str) -> int:
    """Non-negative integer seed for APIs that take a seed rather than a generator."""
    return int(substream(seed, label).integers(0, 2**63 - 1))
