"""
Model definitions for the PICNIQ toolkit
"""

from picniq.models.configs import (
    DEFAULT_SIGMA_OBS,
    ComparatorConfig,
    Design,
    InferenceConfig,
    MleScalerConfig,
    ObserverConfig,
    TrainConfig,
    TrueSkillConfig,
)
from picniq.models.matrix import ComparisonMatrix, ItemRecord, ItemSet, MatrixSummary, PairRecord
from picniq.models.report import CalibrationHistogram, MetricAggregate, MetricsReport, SceneMetrics
from picniq.models.scores import JodScale, ReferenceSet

__all__ = [
    "DEFAULT_SIGMA_OBS",
    "CalibrationHistogram",
    "ComparatorConfig",
    "ComparisonMatrix",
    "Design",
    "InferenceConfig",
    "ItemRecord",
    "ItemSet",
    "JodScale",
    "MatrixSummary",
    "MetricAggregate",
    "MetricsReport",
    "MleScalerConfig",
    "ObserverConfig",
    "PairRecord",
    "ReferenceSet",
    "SceneMetrics",
    "TrainConfig",
    "TrueSkillConfig",
]
