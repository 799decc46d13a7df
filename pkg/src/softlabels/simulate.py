"""In-silico annotator population for annotator-efficiency experiments.

A world is a set of latent per-image class distributions (the truths).
Simulated annotators perceive a noisy version of each truth and report it
either as a bare class vote or through the two-slot elicitation protocol.
Comparing how fast the two aggregation styles approach the truth as the
number of annotators grows is the point of the module.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .labels import (
    AnnotationRecord,
    LabelSpace,
    LabelVariety,
    RedistributionPolicy,
    SoftLabel,
    LabelPool,
    aggregate_mean,
    construct_label,
    multi_aggregate,
)
from .metrics import entropy

#: Entropy thresholds (nats) defining the two truth regimes.
HIGH_ENTROPY_MIN = 0.25
LOW_ENTROPY_MAX = 0.10

_MAX_DRAWS = 10_000


class ReporterBehavior(enum.Enum):
    """What an annotator writes down about their percept."""

    HARD_MODE_REPORTER = "hard"
    SOFT_REPORTER = "soft"


@dataclass(frozen=True)
class AnnotatorModel:
    """Noise and reporting behavior shared by a simulated annotator pool.

    Percepts are Dirichlet draws centered on the truth with concentration
    ``percept_noise`` (higher is less noisy). Soft reports round stated
    probabilities to ``quantization`` percentage points (0 disables
    rounding) and mark classes perceived below ``exclusion_threshold`` as
    definitely-not.
    """

    percept_noise: float = 50.0
    quantization: int = 5
    exclusion_threshold: float = 0.03
    behavior: ReporterBehavior = ReporterBehavior.SOFT_REPORTER

    def __post_init__(self):
        if self.percept_noise <= 0:
            raise ValueError("percept_noise must be positive")
        if self.quantization < 0 or (
            self.quantization > 0 and 100 % self.quantization != 0
        ):
            raise ValueError("quantization must be 0 or a divisor of 100")
        if not 0.0 <= self.exclusion_threshold <= 1.0:
            raise ValueError("exclusion_threshold must lie in [0, 1]")


@dataclass(frozen=True)
class WorldSpec:
    """How to generate a world: size, class count, and the entropy mix.

    A ``low_entropy_fraction`` of images get nearly deterministic truths
    (entropy <= 0.10 nats); the rest are ambiguous (entropy >= 0.25 nats).
    Truths are Dirichlet draws rejection-sampled into their regime.
    """

    n_images: int = 200
    k: int = 10
    seed: int = 0
    low_entropy_fraction: float = 0.12
    high_concentration: float = 1.0
    low_concentration: float = 0.01

    def __post_init__(self):
        if self.n_images < 1 or self.k < 2:
            raise ValueError("need at least 1 image and 2 classes")
        if not 0.0 <= self.low_entropy_fraction <= 1.0:
            raise ValueError("low_entropy_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class World:
    """Generated truths plus the spec that produced them."""

    spec: WorldSpec
    truths: np.ndarray  # (N, K), rows on the simplex
    is_low_entropy: np.ndarray  # (N,) bool

    @property
    def n_images(self) -> int:
        return self.truths.shape[0]

    @property
    def space(self) -> LabelSpace:
        return LabelSpace(names=tuple(f"c{i}" for i in range(self.spec.k)))

    def image_id(self, index: int) -> str:
        return f"sim-{index:05d}"


def _draw_in_regime(
    rng: np.random.Generator, alpha: np.ndarray, low: bool
) -> np.ndarray:
    for _ in range(_MAX_DRAWS):
        q = rng.dirichlet(alpha)
        h = entropy(q)
        if (low and h <= LOW_ENTROPY_MAX) or (not low and h >= HIGH_ENTROPY_MIN):
            return q
    raise RuntimeError(
        "could not draw a truth in the requested entropy regime; "
        "adjust the concentration parameters"
    )


def build_world(spec: WorldSpec) -> World:
    """Draw the latent truths; deterministic given the spec seed."""
    rng = np.random.default_rng(spec.seed)
    n_low = int(round(spec.low_entropy_fraction * spec.n_images))
    is_low = np.zeros(spec.n_images, dtype=bool)
    is_low[:n_low] = True
    rng.shuffle(is_low)

    truths = np.empty((spec.n_images, spec.k))
    alpha_high = np.full(spec.k, spec.high_concentration)
    alpha_low = np.full(spec.k, spec.low_concentration)
    for n in range(spec.n_images):
        alpha = alpha_low if is_low[n] else alpha_high
        truths[n] = _draw_in_regime(rng, alpha, bool(is_low[n]))
    return World(spec=spec, truths=truths, is_low_entropy=is_low)


def sample_percept(
    world: World, model: AnnotatorModel, image: int, annotator: int, seed: int
) -> np.ndarray:
    """One annotator's noisy view of one truth; deterministic per key.

    The generator is keyed on (seed, image, annotator), so the same triple
    always yields the same percept and distinct annotators are independent.
    A tiny floor on the Dirichlet parameters keeps the draw defined when the
    truth has numerically zero classes.
    """
    if not 0 <= image < world.n_images:
        raise ValueError(f"image index {image} outside [0, {world.n_images})")
    if np.isinf(model.percept_noise):
        # the noiseless limit: annotators perceive the truth exactly
        return world.truths[image].copy()
    rng = np.random.default_rng([seed, image, annotator])
    alpha = model.percept_noise * world.truths[image] + 1e-9
    return rng.dirichlet(alpha)


def _quantize(value_percent: float, step: int) -> float:
    if step == 0:
        return float(value_percent)
    return float(np.round(value_percent / step) * step)


def report(
    model: AnnotatorModel,
    percept: np.ndarray,
    image_id: str = "sim",
    annotator_id: str = "ann",
) -> AnnotationRecord | int:
    """Turn a percept into what the annotator writes down.

    Hard-mode reporters emit just the argmax class index. Soft reporters
    fill the two-slot protocol: the top class with its rounded probability,
    the runner-up when it clears the exclusion threshold, and every class
    perceived below the threshold marked definitely-not.
    """
    percept = np.asarray(percept, dtype=np.float64)
    order = np.argsort(-percept, kind="stable")
    top1 = int(order[0])
    if model.behavior is ReporterBehavior.HARD_MODE_REPORTER:
        return top1

    tau = model.exclusion_threshold
    p1 = _quantize(100.0 * percept[top1], model.quantization)
    top2 = int(order[1])
    # the runner-up slot is filled only when the annotator does not consider
    # that class negligible; at tau=0 "negligible" means exactly zero
    has_top2 = percept[top2] >= tau if tau > 0 else percept[top2] > 0
    excluded = frozenset(
        int(k) for k in np.flatnonzero(percept < tau) if k != top1
    )
    return AnnotationRecord(
        image_id=image_id,
        annotator_id=annotator_id,
        top1=top1,
        p1=p1,
        top2=top2 if has_top2 else None,
        p2=_quantize(100.0 * percept[top2], model.quantization) if has_top2 else None,
        definitely_not=excluded,
    )


class Aggregation(enum.Enum):
    MULTI = "multi"
    OURS = "ours"

    @classmethod
    def from_string(cls, name: str) -> "Aggregation":
        key = name.strip().lower()
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown aggregation: {name!r}")


@dataclass(frozen=True)
class AnnotatorPool:
    """A pool of exchangeable simulated annotators."""

    model: AnnotatorModel = field(default_factory=AnnotatorModel)
    size: int = 51

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("pool size must be positive")


def _soft_member(
    world: World,
    soft_model: AnnotatorModel,
    space: LabelSpace,
    image: int,
    annotator: int,
    policy: RedistributionPolicy,
) -> SoftLabel:
    percept = sample_percept(world, soft_model, image, annotator, world.spec.seed)
    rec = report(
        soft_model,
        percept,
        image_id=world.image_id(image),
        annotator_id=f"ann-{annotator:03d}",
    )
    return construct_label(rec, space, LabelVariety.T2_CLAMP, policy)


def efficiency_curve(
    world: World,
    pool: AnnotatorPool,
    m_values: list[int],
    aggregation: Aggregation,
    policy: RedistributionPolicy | None = None,
) -> list[tuple[int, float]]:
    """Mean distance from the M-annotator aggregate to the truth, per M.

    MULTI aggregates argmax votes into class frequencies; OURS averages the
    two-slot soft labels. Both readouts share the same underlying percepts,
    so the comparison is paired annotator-for-annotator.
    """
    if not m_values:
        raise ValueError("need at least one M value")
    if max(m_values) > pool.size:
        raise ValueError(f"max M {max(m_values)} exceeds pool size {pool.size}")
    policy = policy or RedistributionPolicy()
    m_values = sorted(set(m_values))
    m_max = max(m_values)
    k = world.spec.k
    space = world.space
    soft_model = replace(pool.model, behavior=ReporterBehavior.SOFT_REPORTER)

    # running per-image sums let every M reuse the first M annotators
    distances = {m: [] for m in m_values}
    for image in range(world.n_images):
        truth = world.truths[image]
        if aggregation is Aggregation.MULTI:
            counts = np.zeros(k)
            for annotator in range(m_max):
                percept = sample_percept(
                    world, pool.model, image, annotator, world.spec.seed
                )
                counts[int(np.argmax(percept))] += 1.0
                if annotator + 1 in distances:
                    agg = counts / counts.sum()
                    distances[annotator + 1].append(0.5 * np.abs(agg - truth).sum())
        else:
            total = np.zeros(k)
            for annotator in range(m_max):
                member = _soft_member(
                    world, soft_model, space, image, annotator, policy
                )
                total += member.probs
                if annotator + 1 in distances:
                    agg = total / (annotator + 1)
                    distances[annotator + 1].append(0.5 * np.abs(agg - truth).sum())

    return [(m, float(np.mean(distances[m]))) for m in m_values]


@dataclass(frozen=True)
class SweepResult:
    """Per-world efficiency curves for both aggregations, plus summaries."""

    m_values: tuple[int, ...]
    ours: np.ndarray  # (n_worlds, n_M) mean distance per world
    multi: np.ndarray

    def curve(self, aggregation: Aggregation) -> np.ndarray:
        data = self.ours if aggregation is Aggregation.OURS else self.multi
        return data.mean(axis=0)

    def rows(self) -> list[dict]:
        from .training.experiment import mean_ci

        out = []
        for aggregation in (Aggregation.MULTI, Aggregation.OURS):
            data = self.multi if aggregation is Aggregation.MULTI else self.ours
            for j, m in enumerate(self.m_values):
                mean, lo, hi = mean_ci(data[:, j])
                out.append(
                    {
                        "M": m,
                        "aggregation": aggregation.value,
                        "mean_distance": mean,
                        "ci_low": lo,
                        "ci_high": hi,
                    }
                )
        return out

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["M", "aggregation", "mean_distance", "ci_low", "ci_high"])
            for row in self.rows():
                writer.writerow(
                    [
                        row["M"],
                        row["aggregation"],
                        repr(row["mean_distance"]),
                        "" if row["ci_low"] is None else repr(row["ci_low"]),
                        "" if row["ci_high"] is None else repr(row["ci_high"]),
                    ]
                )


def efficiency_sweep(
    spec: WorldSpec,
    pool: AnnotatorPool,
    m_values: list[int],
    n_worlds: int = 50,
    policy: RedistributionPolicy | None = None,
) -> SweepResult:
    """Run both aggregation curves over ``n_worlds`` independent worlds.

    World i uses seed ``spec.seed + i``; each world contributes one mean
    distance per (M, aggregation) cell, so downstream comparisons across
    cells are paired by world.
    """
    if n_worlds < 1:
        raise ValueError("need at least one world")
    m_values = sorted(set(m_values))
    ours = np.empty((n_worlds, len(m_values)))
    multi = np.empty((n_worlds, len(m_values)))
    for i in range(n_worlds):
        world = build_world(replace(spec, seed=spec.seed + i))
        for j, (_, d) in enumerate(
            efficiency_curve(world, pool, m_values, Aggregation.OURS, policy)
        ):
            ours[i, j] = d
        for j, (_, d) in enumerate(
            efficiency_curve(world, pool, m_values, Aggregation.MULTI, policy)
        ):
            multi[i, j] = d
    return SweepResult(m_values=tuple(m_values), ours=ours, multi=multi)


def simulate_pools(
    world: World,
    pool: AnnotatorPool,
    m: int,
    policy: RedistributionPolicy | None = None,
) -> list[LabelPool]:
    """Per-image M-annotator label pools built through the soft protocol."""
    if m > pool.size:
        raise ValueError(f"M {m} exceeds pool size {pool.size}")
    policy = policy or RedistributionPolicy()
    space = world.space
    soft_model = replace(pool.model, behavior=ReporterBehavior.SOFT_REPORTER)
    pools = []
    for image in range(world.n_images):
        members = [
            _soft_member(world, soft_model, space, image, annotator, policy)
            for annotator in range(m)
        ]
        pools.append(
            LabelPool(
                image_id=world.image_id(image),
                per_annotator=tuple(members),
                aggregate=aggregate_mean(members),
            )
        )
    return pools


def multi_vote_labels(
    world: World, pool: AnnotatorPool, m: int
) -> dict[str, SoftLabel]:
    """Per-image class-frequency labels from M hard votes."""
    if m > pool.size:
        raise ValueError(f"M {m} exceeds pool size {pool.size}")
    out = {}
    for image in range(world.n_images):
        counts = np.zeros(world.spec.k)
        for annotator in range(m):
            percept = sample_percept(world, pool.model, image, annotator, world.spec.seed)
            counts[int(np.argmax(percept))] += 1.0
        out[world.image_id(image)] = multi_aggregate(counts)
    return out


def synthesize_features(
    world: World, dim: int = 32, noise: float = 0.05, seed: int | None = None
) -> np.ndarray:
    """Feature vectors whose class mixture mirrors each truth.

    Each class gets a prototype vector in [0,1]^dim; an image's features are
    its truth-weighted prototype blend plus Gaussian jitter, clipped back to
    [0,1]. Ambiguous truths therefore yield genuinely ambiguous features,
    which is what makes soft supervision informative downstream.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    rng = np.random.default_rng(world.spec.seed if seed is None else seed)
    prototypes = rng.uniform(0.0, 1.0, size=(world.spec.k, dim))
    feats = world.truths @ prototypes
    feats = feats + rng.normal(0.0, noise, size=(world.n_images, dim))
    return np.clip(feats, 0.0, 1.0)
