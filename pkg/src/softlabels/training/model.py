"""The desk-scale classifier: a two-hidden-layer ReLU perceptron.

Small enough to train in seconds on flattened features, with exact analytic
gradients (checked against finite differences in the test suite) so that
training and the gradient-based attack need no autodiff framework.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backend import kernels


@dataclass
class MicroModel:
    """Parameters for input D -> H1 -> H2 -> K with ReLU hidden layers."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    @classmethod
    def init(cls, dim: int, h1: int, h2: int, k: int, seed: int = 0) -> "MicroModel":
        """Seeded uniform fan-in initialization; biases start at zero."""
        rng = np.random.default_rng(seed)

        def layer(fan_in, fan_out):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=(fan_in, fan_out))

        return cls(
            w1=layer(dim, h1),
            b1=np.zeros(h1),
            w2=layer(h1, h2),
            b2=np.zeros(h2),
            w3=layer(h2, k),
            b3=np.zeros(k),
        )

    @property
    def dim(self) -> int:
        return self.w1.shape[0]

    @property
    def k(self) -> int:
        return self.w3.shape[1]

    def params(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3)

    def copy(self) -> "MicroModel":
        return MicroModel(*(p.copy() for p in self.params()))

    def save(self, path: str | Path) -> None:
        np.savez(
            path, w1=self.w1, b1=self.b1, w2=self.w2, b2=self.b2,
            w3=self.w3, b3=self.b3,
        )

    @classmethod
    def load(cls, path: str | Path) -> "MicroModel":
        with np.load(path) as data:
            return cls(**{key: data[key] for key in ("w1", "b1", "w2", "b2", "w3", "b3")})


@dataclass
class Gradients:
    """Gradients of the mean batch loss, mirroring the parameter layout."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    x: np.ndarray
    loss: float

    def params(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3)


def _as_batch(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ValueError("input must be a feature vector or a batch of them")


def forward(model: MicroModel, x) -> np.ndarray:
    """Softmax class probabilities; accepts one example or a batch."""
    batch, squeeze = _as_batch(x)
    if batch.shape[1] != model.dim:
        raise ValueError(f"expected {model.dim} features, got {batch.shape[1]}")
    probs = kernels.forward(batch, *model.params())
    return probs[0] if squeeze else probs


def backward(model: MicroModel, x, targets) -> Gradients:
    """Mean cross-entropy loss and its exact gradients.

    ``targets`` are probability distributions aligned with ``x``; the input
    gradient (``.x``) is what the adversarial attack consumes.
    """
    batch, squeeze = _as_batch(x)
    tgt = np.asarray(targets, dtype=np.float64)
    if tgt.ndim == 1:
        tgt = tgt[None, :]
    if tgt.shape != (batch.shape[0], model.k):
        raise ValueError(f"target shape {tgt.shape} does not match batch")
    loss, _, gw1, gb1, gw2, gb2, gw3, gb3, gx = kernels.forward_backward(
        batch, tgt, *model.params()
    )
    return Gradients(
        w1=gw1, b1=gb1, w2=gw2, b2=gb2, w3=gw3, b3=gb3,
        x=gx[0] if squeeze else gx, loss=loss,
    )
