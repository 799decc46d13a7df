"""Desk-scale classifier, its hand-rolled gradients, and the training loops."""

from .attacks import AttackSpec, fgsm_attack
from .backend import available_backends, backend_name, kernels
from .experiment import (
    EvalReport,
    ExperimentConfig,
    MetricSummary,
    mean_ci,
    run_experiment,
)
from .model import Gradients, MicroModel, backward, forward
from .sgd import LabelRegime, RegimeMode, TrainSchedule, train

__all__ = [
    "AttackSpec",
    "EvalReport",
    "ExperimentConfig",
    "Gradients",
    "LabelRegime",
    "MetricSummary",
    "MicroModel",
    "RegimeMode",
    "TrainSchedule",
    "available_backends",
    "backend_name",
    "backward",
    "fgsm_attack",
    "forward",
    "kernels",
    "mean_ci",
    "run_experiment",
    "train",
]
