"""Per-annotator soft labels: elicitation, construction, and evaluation.

The package covers the full loop: collect probabilistic judgments through
the bundled HTTP service, turn raw responses into per-annotator probability
distributions under several construction varieties, aggregate and
quality-control them, and measure their downstream value with desk-scale
training, calibration, robustness, and annotator-efficiency experiments.
"""

from .labels import (
    AnnotationRecord,
    LabelPool,
    LabelSpace,
    LabelVariety,
    RedistributionMode,
    RedistributionPolicy,
    SoftLabel,
    aggregate_mean,
    baseline_label,
    construct_label,
    hard_label,
    multi_aggregate,
    smooth_labels,
    softmax_smooth,
)
from .metrics import (
    EvalSet,
    TimeModel,
    calibration_rmse,
    compare_label_sets,
    entropy,
    estimate_time,
    label_distance,
    pearson_r,
    soft_cross_entropy,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "EvalSet",
    "LabelPool",
    "LabelSpace",
    "LabelVariety",
    "RedistributionMode",
    "RedistributionPolicy",
    "SoftLabel",
    "TimeModel",
    "aggregate_mean",
    "baseline_label",
    "calibration_rmse",
    "compare_label_sets",
    "construct_label",
    "entropy",
    "estimate_time",
    "hard_label",
    "label_distance",
    "multi_aggregate",
    "pearson_r",
    "smooth_labels",
    "soft_cross_entropy",
    "softmax_smooth",
]
