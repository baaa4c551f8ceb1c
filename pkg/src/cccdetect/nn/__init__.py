"""Minimal neural-network numerics on float32 numpy arrays.

Every forward pass returns ``(output, cache)``; the paired ``*_backward``
consumes the cache and an upstream gradient.  Backward passes are
hand-written per layer, there is no autograd graph.
"""

from cccdetect.nn.layers import (
    ShapeError,
    conv2d_forward,
    conv2d_backward,
    conv2d_out_size,
    dense_forward,
    dense_backward,
    relu_forward,
    relu_backward,
    sigmoid_forward,
    sigmoid_backward,
    global_avg_pool_forward,
    global_avg_pool_backward,
)
from cccdetect.nn.losses import loss_mse, loss_bce_logits
from cccdetect.nn.optim import Parameter, OptimConfig, adam_step
from cccdetect.nn.gradcheck import grad_check, GradCheckReport
from cccdetect.nn.checkpoint import Checkpoint, save_checkpoint, load_checkpoint

__all__ = [
    "ShapeError",
    "conv2d_forward",
    "conv2d_backward",
    "conv2d_out_size",
    "dense_forward",
    "dense_backward",
    "relu_forward",
    "relu_backward",
    "sigmoid_forward",
    "sigmoid_backward",
    "global_avg_pool_forward",
    "global_avg_pool_backward",
    "loss_mse",
    "loss_bce_logits",
    "Parameter",
    "OptimConfig",
    "adam_step",
    "grad_check",
    "GradCheckReport",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
]
