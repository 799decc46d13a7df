"""Label-comparison statistics and model-evaluation metrics.

Covers both sides of the evaluation story: comparing two sets of soft labels
(entropy, distributional distance, correlation) and scoring a trained
classifier against soft evaluation labels (cross-entropy, adaptive-binning
calibration), plus the annotation-time cost model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .labels import LabelVariety, SoftLabel

#: Predictions are floored here before any log so confidently wrong
#: predictions yield a large finite loss instead of -inf.
PRED_FLOOR = 1e-12


def entropy(label: SoftLabel | np.ndarray, base: float | None = None) -> float:
    """Shannon entropy, in nats by default; 0 log 0 is taken as 0."""
    p = label.probs if isinstance(label, SoftLabel) else np.asarray(label, dtype=float)
    nz = p[p > 0.0]
    h = float(-(nz * np.log(nz)).sum())
    if base is not None:
        h /= math.log(base)
    return h


def label_distance(a: SoftLabel, b: SoftLabel) -> float:
    """Distance between two labels on the same class space.

    Wasserstein-1 under the discrete 0/1 ground metric, which coincides with
    total-variation distance: half the L1 difference.
    """
    if a.k != b.k:
        raise ValueError(f"label sizes differ: {a.k} vs {b.k}")
    return 0.5 * float(np.abs(a.probs - b.probs).sum())


def pearson_r(xs, ys) -> float:
    """Sample Pearson correlation of two equal-length sequences."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-D sequences of equal length")
    if x.size < 2:
        raise ValueError("need at least two points")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float((xc * xc).sum()) * float((yc * yc).sum()))
    if denom == 0.0:
        raise ValueError("degenerate variance: correlation undefined")
    return float((xc * yc).sum()) / denom


def soft_cross_entropy(predictions, evals: list[SoftLabel] | np.ndarray) -> float:
    """Mean cross-entropy of predicted distributions against soft targets.

    Returns the conventional positive loss (lower is better):
    mean over examples of -sum_k eval_k * log(pred_k).
    """
    preds = np.asarray(predictions, dtype=np.float64)
    targets = _as_matrix(evals)
    if preds.shape != targets.shape:
        raise ValueError(f"shape mismatch: {preds.shape} vs {targets.shape}")
    logp = np.log(np.maximum(preds, PRED_FLOOR))
    return float(-(targets * logp).sum(axis=1).mean())


def _as_matrix(labels) -> np.ndarray:
    if isinstance(labels, np.ndarray):
        return labels.astype(np.float64, copy=False)
    return np.stack([lab.probs for lab in labels])


def calibration_rmse(predictions, evals, bin_size: int = 100) -> float:
    """Adaptive-binning calibration error.

    Examples are sorted by confidence (the max predicted probability) and cut
    into equal-mass bins of ``bin_size``, the last bin absorbing the
    remainder. Per bin the mean confidence is compared with the accuracy,
    where a prediction is correct when its argmax matches the eval label's
    argmax (ties to the lowest index). Returns the bin-weighted RMSE of the
    confidence/accuracy gaps.
    """
    if bin_size < 1:
        raise ValueError("bin_size must be a positive integer")
    preds = np.asarray(predictions, dtype=np.float64)
    targets = _as_matrix(evals)
    if preds.shape != targets.shape:
        raise ValueError(f"shape mismatch: {preds.shape} vs {targets.shape}")
    n = preds.shape[0]
    if n < bin_size:
        raise ValueError(f"need at least bin_size={bin_size} examples, got {n}")

    conf = preds.max(axis=1)
    correct = (preds.argmax(axis=1) == targets.argmax(axis=1)).astype(np.float64)
    # sorting on (confidence, correctness) makes the result independent of
    # the order examples arrive in, even with tied confidences on a bin edge
    order = np.lexsort((correct, conf))
    conf = conf[order]
    correct = correct[order]

    n_bins = n // bin_size
    edges = [(i * bin_size, (i + 1) * bin_size) for i in range(n_bins)]
    lo, _ = edges[-1]
    edges[-1] = (lo, n)

    total = 0.0
    for lo, hi in edges:
        width = hi - lo
        gap = conf[lo:hi].mean() - correct[lo:hi].mean()
        total += (width / n) * gap * gap
    return math.sqrt(total)


def _exact_seconds(value: float | str | Fraction) -> Fraction:
    """Read a time as the exact decimal it was written as.

    Going through the shortest decimal repr keeps 6.4 meaning 32/5 rather
    than its binary approximation, so cost totals come out on the decimal
    grid the quoted medians live on.
    """
    if isinstance(value, Fraction):
        return value
    return Fraction(str(value))


#: Inputs an annotator must provide for each label variety: most probable
#: class + its probability, optionally the second pair, optionally the
#: definitely-not selection.
DEFAULT_INPUTS_PER_VARIETY = {
    LabelVariety.T1_UNIF: 2,
    LabelVariety.T1_CLAMP: 3,
    LabelVariety.T2_UNIF: 4,
    LabelVariety.T2_CLAMP: 5,
    LabelVariety.SELECT_TOP2: 2,
}


@dataclass(frozen=True)
class TimeModel:
    """Per-annotator elicitation cost, in seconds.

    Soft elicitation is charged per input at ``t_per_input``; plain hard
    labeling is charged ``t_per_hard`` per annotator. Arithmetic is exact
    (rational) so totals land on the decimal grid.
    """

    t_per_input: float = 6.4
    t_per_hard: float = 1.8
    inputs_per_variety: dict = field(
        default_factory=lambda: dict(DEFAULT_INPUTS_PER_VARIETY)
    )

    def __post_init__(self):
        if _exact_seconds(self.t_per_input) <= 0 or _exact_seconds(self.t_per_hard) <= 0:
            raise ValueError("per-input and per-hard times must be positive")
        if any(v <= 0 for v in self.inputs_per_variety.values()):
            raise ValueError("input counts must be positive")


def estimate_time(m: int, variety: LabelVariety, tm: TimeModel | None = None) -> float:
    """Total annotation seconds to collect an M-annotator label of a variety."""
    if m < 1:
        raise ValueError("M must be a positive integer")
    tm = tm or TimeModel()
    if variety is LabelVariety.HARD:
        return float(m * _exact_seconds(tm.t_per_hard))
    if variety not in tm.inputs_per_variety:
        raise ValueError(f"time model has no input count for variety {variety}")
    n_inputs = tm.inputs_per_variety[variety]
    return float(m * n_inputs * _exact_seconds(tm.t_per_input))


@dataclass(frozen=True)
class EvalSet:
    """A named held-out test set: image ids, features, and eval labels."""

    name: str
    entries: tuple[tuple[str, np.ndarray, SoftLabel], ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ValueError("an eval set needs at least one entry")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def image_ids(self) -> list[str]:
        return [image_id for image_id, _, _ in self.entries]

    @property
    def features(self) -> np.ndarray:
        return np.stack([np.asarray(x, dtype=np.float64) for _, x, _ in self.entries])

    @property
    def labels(self) -> list[SoftLabel]:
        return [lab for _, _, lab in self.entries]


@dataclass(frozen=True)
class ImageDiagnostic:
    image_id: str
    top_mass_a: float
    top_mass_b: float
    zero_classes_a: int
    zero_classes_b: int
    distance: float


@dataclass(frozen=True)
class LabelSetComparison:
    """Summary of how two per-image label sets line up."""

    n_images: int
    mean_distance: float
    entropy_pearson_r: float | None
    diagnostics: tuple[ImageDiagnostic, ...]

    def to_dict(self) -> dict:
        return {
            "n_images": self.n_images,
            "mean_distance": self.mean_distance,
            "entropy_pearson_r": self.entropy_pearson_r,
            "diagnostics": [
                {
                    "image_id": d.image_id,
                    "top_mass_a": d.top_mass_a,
                    "top_mass_b": d.top_mass_b,
                    "zero_classes_a": d.zero_classes_a,
                    "zero_classes_b": d.zero_classes_b,
                    "distance": d.distance,
                }
                for d in self.diagnostics
            ],
        }


def compare_label_sets(
    ours: dict[str, SoftLabel], theirs: dict[str, SoftLabel]
) -> LabelSetComparison:
    """Compare two image->label maps over their shared images.

    Reports the mean label distance, the correlation between the two sets'
    per-image entropies, and per-image diagnostics (mass on the top class,
    number of zero-probability classes).
    """
    shared = sorted(set(ours) & set(theirs))
    if not shared:
        raise ValueError("the two label sets share no image ids")

    distances = []
    ent_a, ent_b = [], []
    diags = []
    for image_id in shared:
        a, b = ours[image_id], theirs[image_id]
        d = label_distance(a, b)
        distances.append(d)
        ent_a.append(entropy(a))
        ent_b.append(entropy(b))
        diags.append(
            ImageDiagnostic(
                image_id=image_id,
                top_mass_a=float(a.probs.max()),
                top_mass_b=float(b.probs.max()),
                zero_classes_a=int((a.probs == 0.0).sum()),
                zero_classes_b=int((b.probs == 0.0).sum()),
                distance=d,
            )
        )

    try:
        r = pearson_r(ent_a, ent_b)
    except ValueError:
        r = None  # fewer than two images, or constant entropies
    return LabelSetComparison(
        n_images=len(shared),
        mean_distance=float(np.mean(distances)),
        entropy_pearson_r=r,
        diagnostics=tuple(diags),
    )
