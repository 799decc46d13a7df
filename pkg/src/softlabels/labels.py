"""Label algebra over the probability simplex.

Everything here is pure: construct per-annotator soft labels from elicited
responses, redistribute unassigned probability mass, and aggregate labels
across annotators. All arithmetic is double precision and every constructor
normalizes as its final step, so outputs always sum to one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

SUM_TOL = 1e-9


class LabelVariety(enum.Enum):
    """How a soft label was built from the underlying information."""

    T1_UNIF = "t1-unif"
    T1_CLAMP = "t1-clamp"
    T2_UNIF = "t2-unif"
    T2_CLAMP = "t2-clamp"
    SELECT_TOP2 = "select-top2"
    HARD = "hard"
    UNIFORM = "uniform"
    RANDOM = "random"
    MULTI_AGG = "multi-agg"
    OURS_AGG = "ours-agg"
    SMOOTHED = "smoothed"

    @classmethod
    def from_string(cls, name: str) -> "LabelVariety":
        key = name.strip().lower().replace("_", "-")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown label variety: {name!r}")


#: Varieties that construct_label accepts.
ELICITED_VARIETIES = (
    LabelVariety.T1_UNIF,
    LabelVariety.T1_CLAMP,
    LabelVariety.T2_UNIF,
    LabelVariety.T2_CLAMP,
    LabelVariety.SELECT_TOP2,
)

#: Varieties whose leftover-mass spread honors the definitely-not exclusions.
CLAMP_VARIETIES = (LabelVariety.T1_CLAMP, LabelVariety.T2_CLAMP)


class RedistributionMode(enum.Enum):
    UNIFORM = "uniform"
    CLAMP = "clamp"


@dataclass(frozen=True)
class RedistributionPolicy:
    """Controls how unassigned mass is spread over remaining classes.

    ``gamma`` is a *total* mass (fraction of 1) reserved for the non-excluded
    remainder when the stated probabilities already account for everything;
    it participates only in CLAMP mode.
    """

    mode: RedistributionMode = RedistributionMode.CLAMP
    gamma: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")


@dataclass(frozen=True)
class LabelSpace:
    """The K-way class vocabulary labels are expressed over."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) < 2:
            raise ValueError("a label space needs at least 2 classes")
        if len(set(self.names)) != len(self.names):
            raise ValueError("class names must be distinct")
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def k(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"unknown class name: {name!r}") from None

    def check_index(self, index: int) -> int:
        if not 0 <= index < self.k:
            raise ValueError(f"class index {index} outside [0, {self.k})")
        return index


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's raw elicitation for one image.

    Probabilities are on the elicited 0..100 scale. Out-of-range values and
    top-choice/definitely-not contradictions are representable on purpose:
    quality control decides what to do with them, not the constructor. The
    structural rules (a second probability requires a second choice, and the
    two choices must differ) are enforced here because no downstream consumer
    can interpret records violating them.
    """

    image_id: str
    annotator_id: str
    top1: int
    p1: float | None = None
    top2: int | None = None
    p2: float | None = None
    definitely_not: frozenset[int] = field(default_factory=frozenset)
    elapsed_seconds: float | None = None
    is_repeat: bool = False

    def __post_init__(self):
        object.__setattr__(self, "definitely_not", frozenset(self.definitely_not))
        if self.top2 is None and self.p2 is not None:
            raise ValueError("p2 given without a second most probable label")
        if self.top2 is not None and self.top2 == self.top1:
            raise ValueError("top1 and top2 must be different classes")
        if self.elapsed_seconds is not None and self.elapsed_seconds < 0:
            raise ValueError("elapsed_seconds must be nonnegative")


@dataclass(frozen=True)
class SoftLabel:
    """A point on the K-simplex plus how and from whom it was built."""

    probs: np.ndarray
    variety: LabelVariety
    source: str

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1:
            raise ValueError("probs must be a 1-D vector")
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(float(probs.sum()) - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()}, not 1")

    @property
    def k(self) -> int:
        return self.probs.shape[0]

    def argmax(self) -> int:
        # ties resolve to the lowest index, matching np.argmax
        return int(np.argmax(self.probs))


def _finish(mass: np.ndarray, variety: LabelVariety, source: str) -> SoftLabel:
    total = float(mass.sum())
    if total <= 0.0:
        raise ValueError("no probability mass to normalize")
    return SoftLabel(probs=mass / total, variety=variety, source=source)


def construct_label(
    record: AnnotationRecord,
    space: LabelSpace,
    variety: LabelVariety,
    policy: RedistributionPolicy,
) -> SoftLabel:
    """Build one annotator's soft label from their elicited response.

    Mass is assembled on the elicited percent scale and normalized at the
    end. T1 varieties use only the most probable class and its probability;
    T2 varieties add the second most probable pair when present (and degrade
    to T1 when the annotator skipped it). UNIF varieties spread leftover mass
    over every unassigned class, ignoring the definitely-not set; CLAMP
    varieties spread it only over classes the annotator did not exclude, and
    reserve a total mass ``gamma`` for that remainder when the stated
    probabilities already used up everything. SELECT_TOP2 throws the
    probabilities away and splits mass equally over the chosen classes.
    """
    if variety not in ELICITED_VARIETIES:
        raise ValueError(f"construct_label does not handle variety {variety}")
    space.check_index(record.top1)
    if record.top2 is not None:
        space.check_index(record.top2)

    k = space.k
    mass = np.zeros(k, dtype=np.float64)

    if variety is LabelVariety.SELECT_TOP2:
        mass[record.top1] = 1.0
        if record.top2 is not None:
            mass[record.top2] = 1.0
        return _finish(mass, variety, record.annotator_id)

    if record.p1 is None:
        raise ValueError("record has no probability for its most probable label")

    assigned = {record.top1}
    mass[record.top1] = record.p1
    use_top2 = variety in (LabelVariety.T2_UNIF, LabelVariety.T2_CLAMP)
    if use_top2 and record.top2 is not None and record.p2 is not None:
        mass[record.top2] = record.p2
        assigned.add(record.top2)
    leftover = max(0.0, 100.0 - float(mass.sum()))

    if variety in CLAMP_VARIETIES:
        eligible = [
            i for i in range(k) if i not in assigned and i not in record.definitely_not
        ]
        if leftover > 0.0 and eligible:
            mass[eligible] += leftover / len(eligible)
        elif leftover == 0.0 and eligible:
            # stated probabilities already cover everything, but the annotator
            # left these classes unexcluded: reserve gamma total mass for them
            mass[eligible] += policy.gamma * 100.0 / len(eligible)
        # leftover > 0 with nothing eligible: the annotator excluded every
        # other class, so the leftover is dropped and normalization rescales
    else:
        unassigned = [i for i in range(k) if i not in assigned]
        if leftover > 0.0 and unassigned:
            mass[unassigned] += leftover / len(unassigned)

    return _finish(mass, variety, record.annotator_id)


def aggregate_mean(labels: list[SoftLabel]) -> SoftLabel:
    """Entrywise arithmetic mean of per-annotator labels."""
    if not labels:
        raise ValueError("cannot aggregate an empty list of labels")
    k = labels[0].k
    if any(lab.k != k for lab in labels):
        raise ValueError("labels disagree on the number of classes")
    stacked = np.stack([lab.probs for lab in labels])
    return SoftLabel(
        probs=stacked.sum(axis=0) / len(labels),
        variety=LabelVariety.OURS_AGG,
        source="aggregate",
    )


def multi_aggregate(hard_counts) -> SoftLabel:
    """Per-class vote counts normalized into a distribution."""
    counts = np.asarray(hard_counts, dtype=np.float64)
    if counts.ndim != 1:
        raise ValueError("counts must be a 1-D vector")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    total = counts.sum()
    if total < 1:
        raise ValueError("counts must sum to at least 1")
    return SoftLabel(
        probs=counts / total, variety=LabelVariety.MULTI_AGG, source="aggregate"
    )


def hard_label(k_index: int, space: LabelSpace, source: str = "aggregate") -> SoftLabel:
    """One-hot indicator at the given class."""
    space.check_index(k_index)
    probs = np.zeros(space.k, dtype=np.float64)
    probs[k_index] = 1.0
    return SoftLabel(probs=probs, variety=LabelVariety.HARD, source=source)


def baseline_label(kind: LabelVariety, space: LabelSpace, seed: int = 0) -> SoftLabel:
    """Content-free reference labels: uniform, or a seeded simplex draw.

    RANDOM draws from the flat Dirichlet on the simplex; the same seed always
    yields the same draw.
    """
    if kind is LabelVariety.UNIFORM:
        probs = np.full(space.k, 1.0 / space.k)
    elif kind is LabelVariety.RANDOM:
        rng = np.random.default_rng(seed)
        probs = rng.dirichlet(np.ones(space.k))
    else:
        raise ValueError(f"baseline_label handles UNIFORM and RANDOM, not {kind}")
    return SoftLabel(probs=probs, variety=kind, source="baseline")


def softmax_smooth(label: SoftLabel, temperature: float) -> SoftLabel:
    """Smooth a label by pushing probs/temperature through a softmax."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    z = label.probs / temperature
    z = z - z.max()
    e = np.exp(z)
    return SoftLabel(
        probs=e / e.sum(), variety=LabelVariety.SMOOTHED, source=label.source
    )


def smooth_labels(hard: SoftLabel, beta: float, space: LabelSpace) -> SoftLabel:
    """Classic smoothing: blend a one-hot with the uniform distribution."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"smoothing factor must lie in [0, 1], got {beta}")
    if np.count_nonzero(hard.probs) != 1:
        raise ValueError("smooth_labels expects a one-hot input")
    probs = hard.probs * (1.0 - beta) + beta / space.k
    return SoftLabel(probs=probs, variety=LabelVariety.SMOOTHED, source=hard.source)


@dataclass(frozen=True)
class LabelPool:
    """Every per-annotator label collected for one image, plus their mean."""

    image_id: str
    per_annotator: tuple[SoftLabel, ...]
    aggregate: SoftLabel

    def __post_init__(self):
        object.__setattr__(self, "per_annotator", tuple(self.per_annotator))
        if not self.per_annotator:
            raise ValueError("a label pool needs at least one annotator")
        mean = np.stack([lab.probs for lab in self.per_annotator]).sum(axis=0)
        mean /= len(self.per_annotator)
        if not np.allclose(self.aggregate.probs, mean, atol=SUM_TOL, rtol=0.0):
            raise ValueError("aggregate is not the mean of the member labels")

    @classmethod
    def from_members(cls, image_id: str, members: list[SoftLabel]) -> "LabelPool":
        return cls(
            image_id=image_id,
            per_annotator=tuple(members),
            aggregate=aggregate_mean(members),
        )

    @property
    def m(self) -> int:
        return len(self.per_annotator)
