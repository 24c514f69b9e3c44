"""
Evaluation Report Models
Scene-wise metrics, their aggregates, and prediction-calibration histograms.
"""

from typing import Optional

from pydantic import BaseModel, Field


METRIC_NAMES = ("srcc", "plcc", "krcc", "mae", "corr_mean")


class SceneMetrics(BaseModel):
    """Metrics for one scene. None marks a degenerate value (e.g. constant scores)."""

    srcc: Optional[float] = None
    plcc: Optional[float] = None
    krcc: Optional[float] = None
    mae: Optional[float] = None
    corr_mean: Optional[float] = Field(None, description="Mean of SRCC, PLCC and KRCC")


class MetricAggregate(BaseModel):
    """Median (lower middle for even counts), mean and 95 % margin of error."""

    median: float
    mean: float
    moe: float = Field(..., ge=0.0)
    count: int = Field(..., ge=1)
    degenerate: bool = Field(False, description="True when fewer than two scenes back the MoE")


class MetricsReport(BaseModel):
    format: str
    per_scene: dict[str, SceneMetrics]
    aggregates: dict[str, Optional[MetricAggregate]]


class CalibrationBin(BaseModel):
    edge_lo: float
    edge_hi: float
    count: int
    mean_pred: Optional[float] = None
    histogram: list[int] = Field(default_factory=list, description="Counts of predictions per prediction bin")


class CalibrationHistogram(BaseModel):
    """Predictions grouped by their ground-truth probability bin."""

    bins: list[CalibrationBin]
    prediction_edges: list[float]
