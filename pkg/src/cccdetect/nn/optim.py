"""Trainable parameters and the Adam optimizer with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from cccdetect.nn.layers import DTYPE


@dataclass
class Parameter:
    """A weight array with its gradient and Adam moment buffers.

    All four arrays share one shape.  Non-trainable parameters are never
    touched by an optimizer step, bit for bit.
    """

    name: str
    value: np.ndarray
    grad: np.ndarray = None
    adam_m: np.ndarray = None
    adam_v: np.ndarray = None
    trainable: bool = True

    def __post_init__(self):
        self.value = np.ascontiguousarray(self.value, dtype=DTYPE)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.adam_m is None:
            self.adam_m = np.zeros_like(self.value)
        if self.adam_v is None:
            self.adam_v = np.zeros_like(self.value)
        for label, arr in (("grad", self.grad), ("adam_m", self.adam_m), ("adam_v", self.adam_v)):
            if arr.shape != self.value.shape:
                raise ValueError(f"parameter {self.name}: {label} shape {arr.shape} != value shape {self.value.shape}")

    def zero_grad(self):
        self.grad.fill(0.0)

    def reset_optimizer_state(self):
        self.adam_m.fill(0.0)
        self.adam_v.fill(0.0)


@dataclass
class OptimConfig:
    learning_rate: float = 0.0001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"betas must lie in [0, 1), got beta1={self.beta1} beta2={self.beta2}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.step_count < 0:
            raise ValueError(f"step_count must be >= 0, got {self.step_count}")


def adam_step(params: Iterable[Parameter], cfg: OptimConfig) -> OptimConfig:
    """One Adam update over every trainable parameter; bumps cfg.step_count.

    m and v use the standard exponential moving averages with bias
    correction; the shared step counter lives in the config so all
    parameters see the same t.
    """
    t = cfg.step_count + 1
    b1, b2 = cfg.beta1, cfg.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    lr = cfg.learning_rate
    eps = cfg.epsilon
    for p in params:
        if not p.trainable:
            continue
        g = p.grad
        p.adam_m *= b1
        p.adam_m += (1.0 - b1) * g
        p.adam_v *= b2
        p.adam_v += (1.0 - b2) * np.square(g)
        m_hat = p.adam_m / corr1
        v_hat = p.adam_v / corr2
        p.value -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(DTYPE, copy=False)
    cfg.step_count = t
    return cfg
