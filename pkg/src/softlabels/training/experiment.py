"""Multi-seed training experiments with per-eval-set metric reports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from ..labels import LabelPool, LabelVariety
from ..metrics import (
    EvalSet,
    TimeModel,
    calibration_rmse,
    estimate_time,
    soft_cross_entropy,
)
from .attacks import AttackSpec, fgsm_attack
from .model import MicroModel, forward
from .sgd import LabelRegime, TrainSchedule, train

CONFIDENCE = 0.95


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a training-and-evaluation run needs besides the data."""

    regime: LabelRegime = field(default_factory=LabelRegime)
    sched: TrainSchedule = field(default_factory=TrainSchedule)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    hidden1: int = 32
    hidden2: int = 32
    attack: AttackSpec = field(default_factory=AttackSpec)
    bin_size: int = 100
    time_model: TimeModel = field(default_factory=TimeModel)
    gamma: float = 0.1  # informational: the redistribution the pools were built with

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("need at least one seed")
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if self.hidden1 < 1 or self.hidden2 < 1:
            raise ValueError("hidden sizes must be positive")


@dataclass(frozen=True)
class MetricSummary:
    """One metric on one eval set, aggregated across seeds."""

    metric: str
    name: str
    value: float
    ci_low: float | None
    ci_high: float | None
    per_seed: tuple[float, ...]


@dataclass(frozen=True)
class EvalReport:
    """All metric summaries for one experiment, plus the annotation cost."""

    rows: tuple[MetricSummary, ...]
    seeds: tuple[int, ...]
    annotation_seconds: float | None
    config: ExperimentConfig

    def to_dict(self) -> dict:
        return {
            "seeds": list(self.seeds),
            "annotation_seconds": self.annotation_seconds,
            "regime": {
                "mode": self.config.regime.mode.value,
                "variety": self.config.regime.variety.value,
                "m_subsample": self.config.regime.m_subsample,
                "baseline": (
                    self.config.regime.baseline.value
                    if self.config.regime.baseline
                    else None
                ),
                "beta": self.config.regime.beta,
                "gamma": self.config.gamma,
            },
            "rows": [
                {
                    "metric": r.metric,
                    "name": r.name,
                    "value": r.value,
                    "ci_low": r.ci_low,
                    "ci_high": r.ci_high,
                    "per_seed": list(r.per_seed),
                }
                for r in self.rows
            ],
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "name", "value", "ci_low", "ci_high"])
            for r in self.rows:
                writer.writerow(
                    [
                        r.metric,
                        r.name,
                        repr(r.value),
                        "" if r.ci_low is None else repr(r.ci_low),
                        "" if r.ci_high is None else repr(r.ci_high),
                    ]
                )
            if self.annotation_seconds is not None:
                writer.writerow(
                    ["annotation_seconds", "train", repr(self.annotation_seconds), "", ""]
                )


def mean_ci(values) -> tuple[float, float | None, float | None]:
    """Mean with a 95% t-interval; the interval is absent for a single value."""
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, None, None
    half = float(
        stats.t.ppf(0.5 + CONFIDENCE / 2, arr.size - 1)
        * arr.std(ddof=1)
        / math.sqrt(arr.size)
    )
    return mean, mean - half, mean + half


def _effective_m(regime: LabelRegime, pools: list[LabelPool]) -> int:
    if regime.m_subsample is not None:
        return regime.m_subsample
    sizes = {pool.m for pool in pools}
    if len(sizes) == 1:
        return sizes.pop()
    return int(round(float(np.mean([pool.m for pool in pools]))))


def _annotation_seconds(
    config: ExperimentConfig, pools: list[LabelPool]
) -> float | None:
    """Elicitation cost per image for the labels this regime trains on.

    Free baselines (uniform, random) cost nothing; hard-anchored baselines
    cost per hard vote; everything else is charged per elicitation input.
    """
    regime = config.regime
    m = _effective_m(regime, pools)
    if regime.baseline in (LabelVariety.UNIFORM, LabelVariety.RANDOM):
        return 0.0
    if regime.baseline in (LabelVariety.HARD, LabelVariety.SMOOTHED):
        return estimate_time(m, LabelVariety.HARD, config.time_model)
    variety = (
        LabelVariety.SELECT_TOP2
        if regime.baseline is LabelVariety.SELECT_TOP2
        else regime.variety
    )
    return estimate_time(m, variety, config.time_model)


def run_experiment(
    config: ExperimentConfig,
    train_set: list[tuple[np.ndarray, LabelPool]],
    eval_sets: list[EvalSet],
) -> EvalReport:
    """Train once per seed and score every eval set; aggregate across seeds.

    Per eval set, three metrics: soft cross-entropy of the model's
    predictions, adaptive-binning calibration RMSE, and the soft
    cross-entropy after a single-step gradient-sign attack on the inputs.
    Training ids and eval ids must be disjoint.
    """
    if not train_set:
        raise ValueError("training set is empty")
    if not eval_sets:
        raise ValueError("need at least one eval set")
    train_ids = {pool.image_id for _, pool in train_set}
    for ev in eval_sets:
        overlap = train_ids & set(ev.image_ids)
        if overlap:
            raise ValueError(
                f"eval set {ev.name!r} shares {len(overlap)} image ids with "
                f"the training set, e.g. {sorted(overlap)[:3]}"
            )

    dim = np.asarray(train_set[0][0]).shape[0]
    k = train_set[0][1].aggregate.k
    per_seed: dict[tuple[str, str], list[float]] = {}

    for seed in config.seeds:
        model = MicroModel.init(dim, config.hidden1, config.hidden2, k, seed=seed)
        trained, _ = train(model, train_set, config.regime, config.sched.with_seed(seed))
        for ev in eval_sets:
            feats = ev.features
            labels = ev.labels
            preds = forward(trained, feats)
            adv = fgsm_attack(trained, feats, np.stack([l.probs for l in labels]),
                              config.attack)
            adv_preds = forward(trained, adv)
            values = {
                "soft_ce": soft_cross_entropy(preds, labels),
                "calibration_rmse": calibration_rmse(
                    preds, labels, min(config.bin_size, len(ev))
                ),
                "fgsm_loss": soft_cross_entropy(adv_preds, labels),
            }
            for metric, value in values.items():
                per_seed.setdefault((metric, ev.name), []).append(value)

    rows = []
    for ev in eval_sets:
        for metric in ("soft_ce", "calibration_rmse", "fgsm_loss"):
            vals = per_seed[(metric, ev.name)]
            mean, lo, hi = mean_ci(vals)
            rows.append(
                MetricSummary(
                    metric=metric,
                    name=ev.name,
                    value=mean,
                    ci_low=lo,
                    ci_high=hi,
                    per_seed=tuple(vals),
                )
            )

    return EvalReport(
        rows=tuple(rows),
        seeds=config.seeds,
        annotation_seconds=_annotation_seconds(config, [p for _, p in train_set]),
        config=config,
    )
