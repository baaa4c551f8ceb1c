"""Training losses.  Each returns (scalar loss, gradient w.r.t. the prediction)."""

from __future__ import annotations

import numpy as np

from cccdetect.nn.layers import ShapeError, as_f32


def loss_mse(pred, target):
    """Mean squared error over all elements; grad = 2*(pred - target)/count."""
    pred = as_f32(pred)
    target = as_f32(target)
    if pred.shape != target.shape:
        raise ShapeError(f"loss_mse shape mismatch: pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    loss = float(np.mean(np.square(diff.astype(np.float64))))
    grad = (2.0 / diff.size) * diff
    return loss, grad.astype(pred.dtype, copy=False)


def loss_bce_logits(logit, target):
    """Numerically stable binary cross-entropy on logits, mean reduction.

    Targets must be exactly 0 or 1.  grad = (sigmoid(logit) - target)/count,
    so for a single logit it is sigmoid(logit) - target.
    """
    logit = as_f32(np.atleast_1d(logit))
    target = as_f32(np.atleast_1d(target))
    if logit.shape != target.shape:
        raise ShapeError(f"loss_bce_logits shape mismatch: logit {logit.shape} vs target {target.shape}")
    if not np.all((target == 0) | (target == 1)):
        bad = target[(target != 0) & (target != 1)]
        raise ValueError(f"loss_bce_logits targets must be 0 or 1, got {bad[:4]}")
    z = logit.astype(np.float64)
    y = target.astype(np.float64)
    # max(z,0) - z*y + log(1 + exp(-|z|))
    loss = float(np.mean(np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))))
    sig = 1.0 / (1.0 + np.exp(-z))
    grad = ((sig - y) / z.size).astype(logit.dtype)
    return loss, grad
