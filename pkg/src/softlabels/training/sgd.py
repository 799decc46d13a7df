"""SGD training over label pools under the different supervision regimes."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from ..labels import LabelPool, LabelVariety, SoftLabel, smooth_labels, LabelSpace
from .backend import kernels
from .model import MicroModel


@dataclass(frozen=True)
class TrainSchedule:
    """Epoch count, step sizes, and the two-step learning-rate drop."""

    epochs: int = 65
    lr0: float = 0.1
    lr_drop_factor: float = 1e-4
    drop_epochs: tuple[int, ...] = (50, 55)
    weight_decay: float = 1e-4
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        object.__setattr__(self, "drop_epochs", tuple(self.drop_epochs))

    def lr_at(self, epoch: int) -> float:
        """Learning rate during 1-based ``epoch``: dropped after each listed epoch."""
        drops = sum(1 for d in self.drop_epochs if epoch > d)
        return self.lr0 * self.lr_drop_factor**drops

    def with_seed(self, seed: int) -> "TrainSchedule":
        return replace(self, seed=seed)


class RegimeMode(enum.Enum):
    AGGREGATED = "agg"
    DEAGGREGATED = "deagg"


@dataclass(frozen=True)
class LabelRegime:
    """What supervises each training example.

    AGGREGATED trains on the pool mean; DEAGGREGATED samples one annotator's
    label per image per batch. ``m_subsample`` restricts each pool to a
    seeded subset of M annotators first (None means all). A baseline, when
    given, replaces the human labels entirely: HARD (consensus one-hot),
    UNIFORM, RANDOM (per-image seeded simplex draw), SMOOTHED (one-hot
    blended toward uniform by ``beta``), or SELECT_TOP2 (each member label
    collapsed to equal mass on its two strongest classes).
    """

    mode: RegimeMode = RegimeMode.DEAGGREGATED
    variety: LabelVariety = LabelVariety.T2_CLAMP
    m_subsample: int | None = None
    baseline: LabelVariety | None = None
    beta: float = 0.05

    def __post_init__(self):
        if self.m_subsample is not None and self.m_subsample < 1:
            raise ValueError("m_subsample must be at least 1")
        allowed = (
            LabelVariety.HARD,
            LabelVariety.UNIFORM,
            LabelVariety.RANDOM,
            LabelVariety.SMOOTHED,
            LabelVariety.SELECT_TOP2,
        )
        if self.baseline is not None and self.baseline not in allowed:
            raise ValueError(f"unsupported baseline {self.baseline}")


def _top2_collapse(probs: np.ndarray) -> np.ndarray:
    """Equal mass on the label's two strongest classes (one if unique support)."""
    order = np.argsort(-probs, kind="stable")
    out = np.zeros_like(probs)
    if probs[order[1]] > 0.0:
        out[order[0]] = 0.5
        out[order[1]] = 0.5
    else:
        out[order[0]] = 1.0
    return out


@dataclass
class _Supervision:
    """Per-image target material resolved before the loop starts."""

    fixed: np.ndarray | None  # (N, K) one target per image
    members: list[np.ndarray] | None  # per image: (M_i, K) matrix to sample from


def _resolve_supervision(
    pools: list[LabelPool], regime: LabelRegime, rng: np.random.Generator, k: int
) -> _Supervision:
    member_mats = []
    for pool in pools:
        mat = np.stack([lab.probs for lab in pool.per_annotator])
        if regime.m_subsample is not None:
            if regime.m_subsample > pool.m:
                raise ValueError(
                    f"m_subsample={regime.m_subsample} exceeds pool size {pool.m} "
                    f"for image {pool.image_id!r}"
                )
            chosen = rng.choice(pool.m, size=regime.m_subsample, replace=False)
            mat = mat[np.sort(chosen)]
        member_mats.append(mat)

    if regime.baseline is LabelVariety.SELECT_TOP2:
        member_mats = [
            np.stack([_top2_collapse(row) for row in mat]) for mat in member_mats
        ]
    elif regime.baseline is not None:
        space = LabelSpace(names=tuple(f"c{i}" for i in range(k)))
        fixed = np.empty((len(pools), k))
        for i, pool in enumerate(pools):
            if regime.baseline is LabelVariety.UNIFORM:
                fixed[i] = 1.0 / k
            elif regime.baseline is LabelVariety.RANDOM:
                fixed[i] = rng.dirichlet(np.ones(k))
            else:  # HARD or SMOOTHED, anchored on the pool's consensus class
                onehot = np.zeros(k)
                onehot[pool.aggregate.argmax()] = 1.0
                if regime.baseline is LabelVariety.SMOOTHED:
                    onehot = smooth_labels(
                        SoftLabel(onehot, LabelVariety.HARD, "baseline"),
                        regime.beta,
                        space,
                    ).probs.copy()
                fixed[i] = onehot
        return _Supervision(fixed=fixed, members=None)

    if regime.mode is RegimeMode.AGGREGATED:
        fixed = np.stack([mat.sum(axis=0) / mat.shape[0] for mat in member_mats])
        return _Supervision(fixed=fixed, members=None)
    return _Supervision(fixed=None, members=member_mats)


def train(
    model: MicroModel,
    train_set: list[tuple[np.ndarray, LabelPool]],
    regime: LabelRegime,
    sched: TrainSchedule,
) -> tuple[MicroModel, list[float]]:
    """Train a copy of the model; returns it with the per-epoch loss trace.

    Deterministic given the schedule seed: data order, the annotator
    subsample, per-batch label draws, and any baseline randomness all flow
    from it. Weight decay multiplies the weight matrices by (1 - lr * decay)
    before the gradient step; biases are not decayed.
    """
    if not train_set:
        raise ValueError("training set is empty")
    features = np.ascontiguousarray(
        np.stack([np.asarray(x, dtype=np.float64) for x, _ in train_set])
    )
    pools = [pool for _, pool in train_set]
    k = model.k
    rng = np.random.default_rng(sched.seed)
    supervision = _resolve_supervision(pools, regime, rng, k)

    trained = model.copy()
    n = features.shape[0]
    order = np.arange(n)
    trace: list[float] = []

    for epoch in range(1, sched.epochs + 1):
        lr = sched.lr_at(epoch)
        rng.shuffle(order)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, sched.batch_size):
            idx = order[start : start + sched.batch_size]
            xb = features[idx]
            if supervision.fixed is not None:
                tb = supervision.fixed[idx]
            else:
                tb = np.stack(
                    [
                        supervision.members[i][
                            rng.integers(supervision.members[i].shape[0])
                        ]
                        for i in idx
                    ]
                )
            loss, _, gw1, gb1, gw2, gb2, gw3, gb3, _ = kernels.forward_backward(
                xb, np.ascontiguousarray(tb), *trained.params()
            )
            decay = 1.0 - lr * sched.weight_decay
            for w, g in ((trained.w1, gw1), (trained.w2, gw2), (trained.w3, gw3)):
                w *= decay
                w -= lr * g
            for b, g in ((trained.b1, gb1), (trained.b2, gb2), (trained.b3, gb3)):
                b -= lr * g
            epoch_loss += loss
            n_batches += 1
        trace.append(epoch_loss / n_batches)

    return trained, trace
