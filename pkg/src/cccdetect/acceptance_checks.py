"""Layer-by-layer finite-difference verification used by the grad-check
CLI command and the acceptance suite.

Every layer couples to a fixed random linear functional of its output; the
closure reports that scalar and fills parameter gradients (inputs ride
along wrapped as parameters).  Activation inputs keep a margin away from
the relu kink so the finite-difference stencil never straddles it.
"""

from __future__ import annotations

import numpy as np

from cccdetect.nn import (
    Parameter,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    global_avg_pool_backward,
    global_avg_pool_forward,
    grad_check,
    loss_bce_logits,
    loss_mse,
    relu_backward,
    relu_forward,
    sigmoid_backward,
    sigmoid_forward,
)

TOLERANCE = 1e-2


def _margin_away_from_zero(rng, shape, margin=0.05):
    x = rng.standard_normal(shape)
    return (np.sign(x) * (margin + np.abs(x))).astype(np.float32)


def _conv_case(rng, kernel, dilation):
    pad = dilation * (kernel - 1) // 2
    x = Parameter("x", rng.standard_normal((2, 2, 6, 6)).astype(np.float32))
    w = Parameter("w", (rng.standard_normal((3, 2, kernel, kernel)) * 0.5).astype(np.float32))
    b = Parameter("b", rng.standard_normal(3).astype(np.float32))
    coeff = rng.standard_normal((2, 3, 6, 6))

    def loss_and_grad(_):
        for p in (x, w, b):
            p.zero_grad()
        out, cache = conv2d_forward(x.value, w.value, b.value, padding=pad, dilation=dilation)
        dx, dw, db = conv2d_backward(coeff.astype(out.dtype), cache)
        x.grad += dx
        w.grad += dw
        b.grad += db
        return float(np.sum(out.astype(np.float64) * coeff))

    return [x, w, b], loss_and_grad


def _dense_case(rng):
    x = Parameter("x", rng.standard_normal((3, 5)).astype(np.float32))
    w = Parameter("w", rng.standard_normal((4, 5)).astype(np.float32))
    b = Parameter("b", rng.standard_normal(4).astype(np.float32))
    coeff = rng.standard_normal((3, 4))

    def loss_and_grad(_):
        for p in (x, w, b):
            p.zero_grad()
        out, cache = dense_forward(x.value, w.value, b.value)
        dx, dw, db = dense_backward(coeff.astype(out.dtype), cache)
        x.grad += dx
        w.grad += dw
        b.grad += db
        return float(np.sum(out.astype(np.float64) * coeff))

    return [x, w, b], loss_and_grad


def _relu_case(rng):
    x = Parameter("x", _margin_away_from_zero(rng, (4, 6)))
    coeff = rng.standard_normal((4, 6))

    def loss_and_grad(_):
        x.zero_grad()
        out, cache = relu_forward(x.value)
        x.grad += relu_backward(coeff.astype(out.dtype), cache)
        return float(np.sum(out.astype(np.float64) * coeff))

    return [x], loss_and_grad


def _sigmoid_case(rng):
    x = Parameter("x", (rng.standard_normal((4, 6)) * 2).astype(np.float32))
    coeff = rng.standard_normal((4, 6))

    def loss_and_grad(_):
        x.zero_grad()
        out, cache = sigmoid_forward(x.value)
        x.grad += sigmoid_backward(coeff.astype(out.dtype), cache)
        return float(np.sum(out.astype(np.float64) * coeff))

    return [x], loss_and_grad


def _gap_case(rng):
    x = Parameter("x", rng.standard_normal((2, 3, 4, 5)).astype(np.float32))
    coeff = rng.standard_normal((2, 3))

    def loss_and_grad(_):
        x.zero_grad()
        out, cache = global_avg_pool_forward(x.value)
        x.grad += global_avg_pool_backward(coeff.astype(out.dtype), cache)
        return float(np.sum(out.astype(np.float64) * coeff))

    return [x], loss_and_grad


def _mse_case(rng):
    pred = Parameter("pred", rng.standard_normal(12).astype(np.float32))
    target = rng.standard_normal(12).astype(np.float32)

    def loss_and_grad(_):
        pred.zero_grad()
        loss, g = loss_mse(pred.value, target.astype(pred.value.dtype))
        pred.grad += g
        return loss

    return [pred], loss_and_grad


def _bce_case(rng):
    logit = Parameter("logit", (rng.standard_normal(12) * 2).astype(np.float32))
    target = (rng.random(12) > 0.5).astype(np.float32)

    def loss_and_grad(_):
        logit.zero_grad()
        loss, g = loss_bce_logits(logit.value, target.astype(logit.value.dtype))
        logit.grad += g
        return loss

    return [logit], loss_and_grad


CASES = [
    ("conv2d_k1_d1", lambda rng: _conv_case(rng, 1, 1)),
    ("conv2d_k1_d4", lambda rng: _conv_case(rng, 1, 4)),
    ("conv2d_k3_d1", lambda rng: _conv_case(rng, 3, 1)),
    ("conv2d_k3_d4", lambda rng: _conv_case(rng, 3, 4)),
    ("dense", _dense_case),
    ("relu", _relu_case),
    ("sigmoid", _sigmoid_case),
    ("global_avg_pool", _gap_case),
    ("loss_mse", _mse_case),
    ("loss_bce_logits", _bce_case),
]


def layer_grad_check_suite(base_seed: int = 0, n_seeds: int = 20, tolerance: float = TOLERANCE):
    """Run every layer case over n_seeds seeds.

    Returns (failure_count, report_lines); each line carries the worst
    relative error of one case across all seeds.
    """
    failures = 0
    lines = []
    dummy = np.zeros(1, dtype=np.float32)
    for name, builder in CASES:
        worst = 0.0
        name_key = sum(ord(c) * 31 ** i for i, c in enumerate(name)) % (2 ** 31)
        for s in range(n_seeds):
            rng = np.random.default_rng([base_seed, s, name_key])
            params, closure = builder(rng)
            report = grad_check(closure, params, dummy, tolerance=tolerance)
            worst = max(worst, max(err for err, _ in report.per_param.values()))
        ok = worst <= tolerance
        failures += not ok
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name:<18s} "
                     f"max_rel_err={worst:.3e} over {n_seeds} seeds")
    return failures, lines
