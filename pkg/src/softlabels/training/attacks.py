"""Single-step gradient-sign perturbations for robustness probes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MicroModel, backward, forward


@dataclass(frozen=True)
class AttackSpec:
    """Perturbation budget and the feature box to clip back into.

    ``epsilon`` is expressed as a fraction of the feature range, mirroring
    the usual pixel convention (the default is 4/255 of the range). The
    attack target is the argmax of the evaluation label by default;
    ``target="model"`` uses the model's own prediction instead.
    """

    epsilon: float = 4.0 / 255.0
    feature_low: float = 0.0
    feature_high: float = 1.0
    target: str = "eval"

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.feature_high <= self.feature_low:
            raise ValueError("feature_high must exceed feature_low")
        if self.target not in ("eval", "model"):
            raise ValueError("target must be 'eval' or 'model'")

    @property
    def step(self) -> float:
        """Absolute perturbation size: epsilon times the feature range."""
        return self.epsilon * (self.feature_high - self.feature_low)


def fgsm_attack(
    model: MicroModel,
    x: np.ndarray,
    eval_labels: np.ndarray,
    spec: AttackSpec = AttackSpec(),
) -> np.ndarray:
    """Perturb each input one signed-gradient step uphill in loss.

    x' = clip(x + step * sign(grad_x CE(f(x), one_hot(target))), low, high)

    where target is the per-example argmax of ``eval_labels`` (or of the
    model's own probabilities under ``target="model"``). Inputs where the
    gradient is exactly zero are left in place.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    batch = x[None, :] if squeeze else x
    evals = np.asarray(eval_labels, dtype=np.float64)
    if evals.ndim == 1:
        evals = evals[None, :]
    if evals.shape[0] != batch.shape[0]:
        raise ValueError("eval_labels must align with the inputs")

    if spec.target == "model":
        hard_idx = np.argmax(forward(model, batch), axis=1)
    else:
        hard_idx = np.argmax(evals, axis=1)
    onehots = np.zeros((batch.shape[0], model.k))
    onehots[np.arange(batch.shape[0]), hard_idx] = 1.0

    grads = backward(model, batch, onehots)
    perturbed = batch + spec.step * np.sign(grads.x)
    perturbed = np.clip(perturbed, spec.feature_low, spec.feature_high)
    return perturbed[0] if squeeze else perturbed
