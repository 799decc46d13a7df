"""Pure NumPy training kernels: the fallback backend.

Same contract as the compiled extension in ``_kernels.pyx``: a two-hidden-
layer ReLU net with a softmax head, returning the mean cross-entropy loss
over the batch and gradients of that mean loss for every parameter and for
the inputs.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def _affine_relu(x, w, b):
    pre = x @ w + b
    return np.maximum(pre, 0.0)


def forward(x, w1, b1, w2, b2, w3, b3):
    """Batch softmax probabilities, shape (B, K)."""
    h1 = _affine_relu(x, w1, b1)
    h2 = _affine_relu(h1, w2, b2)
    z = h2 @ w3 + b3
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward_backward(x, targets, w1, b1, w2, b2, w3, b3):
    """Fused pass: mean loss, probabilities, and all gradients.

    Loss is mean_b -sum_k t_bk log softmax(z_b)_k computed via log-sum-exp;
    gradients (including the input gradient) are of this mean.
    """
    batch = x.shape[0]
    h1 = _affine_relu(x, w1, b1)
    h2 = _affine_relu(h1, w2, b2)
    z = h2 @ w3 + b3

    zmax = z.max(axis=1, keepdims=True)
    ez = np.exp(z - zmax)
    sez = ez.sum(axis=1, keepdims=True)
    probs = ez / sez
    lse = zmax[:, 0] + np.log(sez[:, 0])
    loss = float(np.mean(lse - (targets * z).sum(axis=1)))

    dz = (probs - targets) / batch
    gw3 = h2.T @ dz
    gb3 = dz.sum(axis=0)
    dh2 = dz @ w3.T
    dh2[h2 <= 0.0] = 0.0
    gw2 = h1.T @ dh2
    gb2 = dh2.sum(axis=0)
    dh1 = dh2 @ w2.T
    dh1[h1 <= 0.0] = 0.0
    gw1 = x.T @ dh1
    gb1 = dh1.sum(axis=0)
    gx = dh1 @ w1.T

    return loss, probs, gw1, gb1, gw2, gb2, gw3, gb3, gx
