"""Shared fixtures and builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from softlabels.labels import AnnotationRecord, LabelSpace
from softlabels.metrics import EvalSet
from softlabels.simulate import (
    AnnotatorPool,
    WorldSpec,
    build_world,
    simulate_pools,
    synthesize_features,
)

CIFAR_NAMES = (
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
)


@pytest.fixture
def space10() -> LabelSpace:
    return LabelSpace(names=CIFAR_NAMES)


@pytest.fixture
def space4() -> LabelSpace:
    return LabelSpace(names=("a", "b", "c", "d"))


def make_record(
    top1: int,
    p1: float | None = None,
    top2: int | None = None,
    p2: float | None = None,
    definitely_not=(),
    image_id: str = "img-0",
    annotator_id: str = "ann-0",
    **kwargs,
) -> AnnotationRecord:
    return AnnotationRecord(
        image_id=image_id,
        annotator_id=annotator_id,
        top1=top1,
        p1=p1,
        top2=top2,
        p2=p2,
        definitely_not=frozenset(definitely_not),
        **kwargs,
    )


def random_clean_record(rng: np.random.Generator, k: int) -> AnnotationRecord:
    """A record passing every quality rule: in-range, no contradiction, p1 set."""
    top1 = int(rng.integers(k))
    p1 = float(rng.integers(0, 21) * 5)
    others = [i for i in range(k) if i != top1]
    top2 = None
    p2 = None
    if rng.random() < 0.7:
        top2 = int(rng.choice(others))
        p2 = float(rng.integers(0, 21) * 5)
    assigned = {top1} if top2 is None else {top1, top2}
    eligible = [i for i in range(k) if i not in assigned]
    n_excluded = int(rng.integers(0, len(eligible) + 1))
    excluded = rng.choice(eligible, size=n_excluded, replace=False) if n_excluded else []
    return AnnotationRecord(
        image_id=f"img-{rng.integers(1000)}",
        annotator_id=f"ann-{rng.integers(100)}",
        top1=top1,
        p1=p1,
        top2=top2,
        p2=p2,
        definitely_not=frozenset(int(i) for i in excluded),
    )


def synthetic_task(
    n_train: int = 300,
    n_eval: int = 60,
    dim: int = 32,
    m: int = 6,
    world_seed: int = 11,
):
    """A learnable ambiguous classification task with soft label pools.

    Truths are sparse enough that class blobs separate in feature space,
    so hard-label training can overfit to high confidence while the soft
    pools retain the ambiguity signal.
    """
    n = n_train + n_eval
    world = build_world(
        WorldSpec(n_images=n, k=10, seed=world_seed, high_concentration=0.3)
    )
    pools = simulate_pools(world, AnnotatorPool(size=m), m=m)
    feats = synthesize_features(world, dim=dim)
    ids = [world.image_id(i) for i in range(n)]
    train_set = [(feats[i], pools[i]) for i in range(n_train)]
    eval_set = EvalSet(
        name="heldout",
        entries=tuple(
            (ids[i], feats[i], pools[i].aggregate) for i in range(n_train, n)
        ),
    )
    return train_set, eval_set
