"""
Evaluation Metrics
Correlation and error metrics per scene, Median (Mean +/- MoE) aggregation
across scenes, and calibration histograms of predicted probabilities.
"""

import json
import logging
import math
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from picniq.errors import IdMismatchError, SceneMismatchError
from picniq.models.report import (
    METRIC_NAMES,
    CalibrationBin,
    CalibrationHistogram,
    MetricAggregate,
    MetricsReport,
    SceneMetrics,
)
from picniq.models.scores import JodScale
from picniq.scaling import align_scores


logger = logging.getLogger(__name__)

REPORT_FORMAT = "picniq-report/1"
CALIBRATION_FORMAT = "picniq-calibration/1"
CALIBRATION_BINS = 6
MOE_Z = 1.96


def _paired(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"metric inputs must be equal-length vectors, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise ValueError("correlations need at least 2 values")
    return x, y


def _finite_or_none(value: float) -> Optional[float]:
    value = float(value)
    return value if math.isfinite(value) else None


def _correlation(x: np.ndarray, y: np.ndarray, statistic) -> Optional[float]:
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    value = _finite_or_none(statistic(x, y).statistic)
    return None if value is None else float(np.clip(value, -1.0, 1.0))


def plcc(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Pearson linear correlation; None for a constant input."""
    return _correlation(*_paired(x, y), stats.pearsonr)


def srcc(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Spearman rank correlation (average ranks for ties); None for a constant input."""
    return _correlation(*_paired(x, y), stats.spearmanr)


def krcc(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Kendall tau-b; None for a constant input."""
    return _correlation(*_paired(x, y), lambda a, b: stats.kendalltau(a, b, variant="b"))


def mae_aligned(predicted: JodScale, reference: JodScale) -> float:
    """
    Mean absolute error after shifting predicted onto the reference mean.

    Raises:
        IdMismatchError: If the scales cover different items
    """
    aligned = align_scores(predicted, reference)
    difference = aligned.reordered(list(reference.item_ids)) - reference.scores
    return float(np.mean(np.abs(difference)))


def aggregate(values: Sequence[float]) -> MetricAggregate:
    """
    Median, mean and 95 % margin of error of per-scene values.

    The median of an even count is the lower middle element. The margin of
    error is 1.96 * sd / sqrt(s) with the sample standard deviation; a single
    scene gets moe 0 and the degenerate flag.
    """
    if len(values) == 0:
        raise ValueError("aggregate needs at least one value")
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    s = len(ordered)
    if s == 1:
        moe, degenerate = 0.0, True
    else:
        moe, degenerate = MOE_Z * float(np.std(ordered, ddof=1)) / math.sqrt(s), False
    return MetricAggregate(
        median=float(ordered[(s - 1) // 2]),
        mean=float(ordered.mean()),
        moe=moe,
        count=s,
        degenerate=degenerate,
    )


def calibration(
    predictions: Sequence[float],
    ground_truth: Sequence[float],
    bins: int = CALIBRATION_BINS,
    prediction_bins: int = 10,
) -> CalibrationHistogram:
    """
    Group predictions by the equal-width bin of their ground-truth probability.

    Bins are half-open [lo, hi) except the last, which includes 1. Each bin
    reports its count, the mean prediction and a histogram of predictions.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    ground_truth = np.asarray(ground_truth, dtype=np.float64)
    if predictions.shape != ground_truth.shape:
        raise ValueError(f"{predictions.size} predictions but {ground_truth.size} ground-truth values")
    if np.any((ground_truth < 0) | (ground_truth > 1)) or np.any((predictions < 0) | (predictions > 1)):
        raise ValueError("probabilities must lie in [0, 1]")

    edges = np.linspace(0.0, 1.0, bins + 1)
    prediction_edges = np.linspace(0.0, 1.0, prediction_bins + 1)
    assignment = np.clip(np.searchsorted(edges, ground_truth, side="right") - 1, 0, bins - 1)

    cells = []
    for k in range(bins):
        members = predictions[assignment == k]
        histogram, _ = np.histogram(members, bins=prediction_edges)
        cells.append(CalibrationBin(
            edge_lo=float(edges[k]),
            edge_hi=float(edges[k + 1]),
            count=int(members.size),
            mean_pred=float(members.mean()) if members.size else None,
            histogram=histogram.tolist(),
        ))
    return CalibrationHistogram(bins=cells, prediction_edges=prediction_edges.tolist())


def scene_metrics(predicted: JodScale, truth: JodScale) -> SceneMetrics:
    if set(predicted.item_ids) != set(truth.item_ids):
        raise IdMismatchError("predicted and ground-truth scores cover different items")
    x = predicted.reordered(list(truth.item_ids))
    y = truth.scores
    correlations = {"srcc": srcc(x, y), "plcc": plcc(x, y), "krcc": krcc(x, y)}
    values = list(correlations.values())
    corr_mean = float(np.mean(values)) if all(v is not None for v in values) else None
    return SceneMetrics(**correlations, mae=mae_aligned(predicted, truth), corr_mean=corr_mean)


def build_report(pred: Mapping[str, JodScale], truth: Mapping[str, JodScale]) -> MetricsReport:
    """
    Per-scene metrics plus their aggregates.

    Raises:
        SceneMismatchError: If the two mappings hold different scenes
    """
    missing_in_pred = set(truth) - set(pred)
    missing_in_truth = set(pred) - set(truth)
    if missing_in_pred or missing_in_truth:
        raise SceneMismatchError(missing_in_pred, missing_in_truth)

    per_scene = {scene: scene_metrics(pred[scene], truth[scene]) for scene in sorted(truth)}
    aggregates: dict[str, Optional[MetricAggregate]] = {}
    for name in METRIC_NAMES:
        values = [getattr(m, name) for m in per_scene.values() if getattr(m, name) is not None]
        aggregates[name] = aggregate(values) if values else None
        if len(values) < len(per_scene):
            logger.warning(f"{name}: {len(per_scene) - len(values)} degenerate scenes excluded")
    return MetricsReport(format=REPORT_FORMAT, per_scene=per_scene, aggregates=aggregates)


def format_aggregate(value: Optional[MetricAggregate]) -> str:
    """'Median (Mean +/- MoE)' text for one metric."""
    if value is None:
        return "n/a"
    return f"{value.median:.3f} ({value.mean:.3f} ± {value.moe:.3f})"


def save_report(report: MetricsReport, path: Union[str, Path]) -> Path:
    """
    Write the report as JSON plus a flat CSV (scene, metric, value) beside it.

    Returns:
        The CSV path
    """
    path = Path(path)
    path.write_text(json.dumps(report.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")
    rows = [
        {"scene": scene, "metric": name, "value": getattr(metrics, name)}
        for scene, metrics in report.per_scene.items()
        for name in METRIC_NAMES
    ]
    csv_path = path.with_suffix(".csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# format: {REPORT_FORMAT}\n")
        pd.DataFrame(rows, columns=["scene", "metric", "value"]).to_csv(f, index=False, float_format="%.17g")
    return csv_path


def save_calibration(histogram: CalibrationHistogram, path: Union[str, Path]) -> None:
    """Write calibration bins as CSV (bin, edge_lo, edge_hi, count, mean_pred)."""
    frame = pd.DataFrame(
        [
            {
                "bin": k,
                "edge_lo": cell.edge_lo,
                "edge_hi": cell.edge_hi,
                "count": cell.count,
                "mean_pred": cell.mean_pred,
            }
            for k, cell in enumerate(histogram.bins)
        ],
        columns=["bin", "edge_lo", "edge_hi", "count", "mean_pred"],
    )
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# format: {CALIBRATION_FORMAT}\n")
        frame.to_csv(f, index=False, float_format="%.17g")
