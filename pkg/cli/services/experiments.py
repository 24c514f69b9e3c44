"""
Experiment Service
Glue between CLI commands and the toolkit: scene loading, training-set
assembly, calibration pairs and the artifacts every run writes.
"""

import json
import logging
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import pandas as pd

from cli.config import ExperimentConfig
from picniq.comparator import ComparatorModel, predict_pairs
from picniq.comparison_matrix import empirical_probability, load_matrix, threshold_filter, to_pair_records
from picniq.errors import IdMismatchError, SceneMismatchError
from picniq.models.matrix import ComparisonMatrix, ItemRecord, ItemSet, PairRecord
from picniq.models.scores import JodScale
from picniq.scaling import load_scores
from picniq.scenes import SceneManifest, load_features, load_manifest, resolve
from picniq.seeding import derive_seed


logger = logging.getLogger(__name__)

HISTORY_FORMAT = "picniq-history/1"
HISTOGRAM_FORMAT = "picniq-histogram/1"
RESOLVED_SUFFIX = ".resolved.json"


def load_scene(
    manifest: SceneManifest, base: Path, scene: str, attribute: str
) -> Optional[tuple[ItemSet, ComparisonMatrix]]:
    """
    Features and attribute matrix of one scene, or None if the scene has no
    matrix for the attribute.

    Raises:
        IdMismatchError: If the matrix names items the features file lacks
    """
    entry = manifest.root[scene]
    if attribute not in entry.attributes:
        return None
    items = load_features(resolve(base, entry.features))
    matrix = load_matrix(resolve(base, entry.attributes[attribute]))
    unknown = sorted(set(matrix.item_ids) - set(items.ids))
    if unknown:
        raise IdMismatchError(f"scene {scene}: matrix items without features: {unknown}")
    return items.subset(list(matrix.item_ids)), matrix


def iter_scenes(manifest_path: Union[str, Path], attribute: str):
    """(scene, items, matrix) for every scene that has the attribute, in name order."""
    manifest, base = load_manifest(manifest_path)
    for scene in manifest.scenes():
        loaded = load_scene(manifest, base, scene, attribute)
        if loaded is None:
            logger.warning(f"scene {scene} has no '{attribute}' matrix; skipped")
            continue
        yield scene, loaded[0], loaded[1]


def _qualified(scene: str, item_id: str) -> str:
    return f"{scene}/{item_id}"


def build_training_set(
    manifest_path: Union[str, Path], attribute: str, threshold: float, order_seed: int
) -> tuple[list[PairRecord], ItemSet]:
    """
    Pair records from every scene, thresholded before pairing.

    Item ids are qualified as "scene/id" so items from different scenes
    never collide. Each scene draws its record orientations from its own
    seed, derived from order_seed and the scene name.
    """
    records: list[PairRecord] = []
    items: list[ItemRecord] = []
    for scene, scene_items, matrix in iter_scenes(manifest_path, attribute):
        kept = threshold_filter(matrix, threshold)
        for record in to_pair_records(kept, derive_seed(order_seed, f"scene/{scene}")):
            records.append(record.model_copy(update={
                "id_i": _qualified(scene, record.id_i),
                "id_j": _qualified(scene, record.id_j),
            }))
        items.extend(
            item.model_copy(update={"id": _qualified(scene, item.id)}) for item in scene_items.items
        )
        logger.debug(f"scene {scene}: {len(kept.observed_pairs())} pairs after threshold {threshold}")
    logger.info(f"training set: {len(records)} pair records over {len(items)} items")
    return records, ItemSet(items=tuple(items))


def calibration_pairs(
    model: ComparatorModel, manifest_path: Union[str, Path], attribute: str, threshold: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """
    Predicted and empirical probabilities for every observed pair in canonical
    orientation.
    """
    predictions: list[np.ndarray] = []
    truth: list[float] = []
    for _, items, matrix in iter_scenes(manifest_path, attribute):
        pairs = threshold_filter(matrix, threshold).observed_pairs()
        predictions.append(predict_pairs(model, items, pairs))
        truth.extend(empirical_probability(matrix, i, j) for i, j in pairs)
    if not truth:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(predictions), np.asarray(truth)


def load_score_dir(directory: Union[str, Path]) -> dict[str, JodScale]:
    """Scores files of a directory keyed by file stem (resolved-config echoes excluded)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"scores directory not found: {directory}")
    return {
        path.stem: load_scores(path)
        for path in sorted(directory.glob("*.json"))
        if not path.name.endswith(RESOLVED_SUFFIX)
    }


def load_manifest_truth(manifest_path: Union[str, Path], attribute: str) -> dict[str, JodScale]:
    """Ground-truth scores of every manifest scene that lists them for the attribute."""
    manifest, base = load_manifest(manifest_path)
    truth = {
        scene: load_scores(resolve(base, manifest.root[scene].truth[attribute]))
        for scene in manifest.scenes()
        if attribute in manifest.root[scene].truth
    }
    logger.debug(f"{len(truth)} scenes carry '{attribute}' ground truth in {manifest_path}")
    return truth


def check_same_scenes(pred: dict[str, JodScale], truth: dict[str, JodScale]) -> None:
    if set(pred) != set(truth):
        raise SceneMismatchError(set(truth) - set(pred), set(pred) - set(truth))


def resolved_path(output: Union[str, Path], command: str) -> Path:
    """`<stem>.resolved.json` beside a file output, `<command>.resolved.json` inside a directory output."""
    output = Path(output)
    if output.suffix:
        return output.with_name(output.stem + RESOLVED_SUFFIX)
    return output / f"{command}{RESOLVED_SUFFIX}"


def write_resolved(
    output: Union[str, Path],
    command: str,
    config: ExperimentConfig,
    paths: dict[str, Optional[str]],
    formats: dict[str, str],
    options: Optional[dict[str, Any]] = None,
) -> Path:
    """
    Echo the fully resolved configuration next to a command's primary output.

    Contains no timestamps so identical runs produce identical files.
    """
    resolved = config.model_copy(update={"paths": {**config.paths, **paths}})
    payload = {
        "format": "picniq-resolved/1",
        "command": command,
        "options": options or {},
        "config": resolved.model_dump(mode="json"),
        "formats": formats,
    }
    path = resolved_path(output, command)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_table(path: Union[str, Path], format_name: str, frame: pd.DataFrame) -> None:
    """CSV with a leading format comment line."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# format: {format_name}\n")
        frame.to_csv(f, index=False, float_format="%.17g")


def write_history(path: Union[str, Path], history: list[float]) -> None:
    frame = pd.DataFrame({"epoch": np.arange(1, len(history) + 1), "loss": history})
    write_table(path, HISTORY_FORMAT, frame)


def write_histogram(path: Union[str, Path], counts: np.ndarray) -> None:
    bins = len(counts)
    edges = np.linspace(0.0, 1.0, bins + 1)
    frame = pd.DataFrame({
        "bin": np.arange(bins),
        "edge_lo": edges[:-1],
        "edge_hi": edges[1:],
        "count": np.asarray(counts, dtype=np.int64),
    })
    write_table(path, HISTOGRAM_FORMAT, frame)
