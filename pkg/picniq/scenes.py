"""
Scene Inputs
Feature tables (CSV `id,f1,...,fd`) and scene manifests (JSON).

Manifest layout:

    {
      "scene_a": {"features": "scene_a_features.csv",
                  "attributes": {"details": "scene_a_details.csv"}},
      ...
    }

Relative paths resolve against the manifest's directory.
"""

import json
import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, RootModel

from picniq.errors import FeatureFormatError, MatrixFormatError
from picniq.models.matrix import ItemSet


logger = logging.getLogger(__name__)

FEATURES_FORMAT = "picniq-features/1"


class SceneEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    features: str = Field(..., description="Path to the features CSV")
    attributes: dict[str, str] = Field(
        default_factory=dict,
        description="Attribute name -> comparison-matrix CSV path"
    )
    truth: dict[str, str] = Field(
        default_factory=dict,
        description="Optional attribute name -> ground-truth scores JSON path"
    )


class SceneManifest(RootModel[dict[str, SceneEntry]]):
    """Scene name -> inputs."""

    def scenes(self) -> list[str]:
        return sorted(self.root)


def load_features(path: Union[str, Path]) -> ItemSet:
    """
    Read a features CSV.

    Raises:
        MatrixFormatError: Missing id column or non-numeric features
        FeatureFormatError: Duplicate ids or NaN/infinite feature values
    """
    frame = pd.read_csv(path, comment="#", dtype={"id": str})
    if "id" not in frame.columns:
        raise MatrixFormatError(f"{path}: features file needs an 'id' column")
    feature_columns = [c for c in frame.columns if c != "id"]
    if not feature_columns:
        raise MatrixFormatError(f"{path}: features file has no feature columns")
    try:
        values = frame[feature_columns].to_numpy(dtype=np.float64)
    except ValueError as e:
        raise MatrixFormatError(f"{path}: non-numeric feature value ({e})")
    ids = [str(i) for i in frame["id"]]
    duplicated = sorted(set(frame.loc[frame["id"].duplicated(), "id"].astype(str)))
    if duplicated:
        raise FeatureFormatError(f"{path}: duplicate item ids {duplicated}")
    bad_rows = ~np.isfinite(values).all(axis=1)
    if bad_rows.any():
        bad_ids = [ids[k] for k in np.flatnonzero(bad_rows)]
        raise FeatureFormatError(f"{path}: non-finite feature values for items {bad_ids}")
    logger.debug(f"loaded {len(ids)} items with {len(feature_columns)} features from {path}")
    return ItemSet.from_arrays(ids, values)


def save_features(items: ItemSet, path: Union[str, Path]) -> None:
    """Write an item set's features as CSV with a format comment line."""
    features = items.feature_matrix()
    frame = pd.DataFrame(features, columns=[f"f{k + 1}" for k in range(features.shape[1])])
    frame.insert(0, "id", items.ids)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# format: {FEATURES_FORMAT}\n")
        frame.to_csv(f, index=False, float_format="%.17g")


def load_manifest(path: Union[str, Path]) -> tuple[SceneManifest, Path]:
    """
    Read a scene manifest.

    Returns:
        The manifest and the directory relative paths resolve against
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        manifest = SceneManifest.model_validate(json.load(f))
    return manifest, path.parent


def resolve(base: Path, relative: str) -> Path:
    candidate = Path(relative)
    return candidate if candidate.is_absolute() else base / candidate
