import numpy as np
import pytest

from cccdetect.nn import (
    Parameter,
    dense_backward,
    dense_forward,
    grad_check,
    loss_mse,
)


def make_dense_problem(seed, scale=1.0):
    rng = np.random.default_rng(seed)
    w = Parameter("w", (rng.standard_normal((3, 4)) * scale).astype(np.float32))
    b = Parameter("b", (rng.standard_normal(3) * scale).astype(np.float32))
    x = rng.standard_normal((2, 4)).astype(np.float32)
    target = rng.standard_normal((2, 3)).astype(np.float32)
    return w, b, x, target


def dense_mse_closure(w, b, target, grad_scale=1.0):
    def loss_and_grad(x):
        w.zero_grad()
        b.zero_grad()
        out, cache = dense_forward(x, w.value, b.value)
        loss, g = loss_mse(out, target)
        _, dw, db = dense_backward(g, cache)
        w.grad += dw * grad_scale
        b.grad += db * grad_scale
        return loss
    return loss_and_grad


def test_dense_mse_passes():
    w, b, x, target = make_dense_problem(0)
    report = grad_check(dense_mse_closure(w, b, target), [w, b], x, tolerance=1e-2)
    assert report.passed
    assert set(report.per_param) == {"w", "b"}


def test_scaled_backward_fails():
    w, b, x, target = make_dense_problem(1)
    report = grad_check(dense_mse_closure(w, b, target, grad_scale=2.0), [w, b], x, tolerance=1e-2)
    assert not report.passed


def test_zero_net_trivially_passes():
    w = Parameter("w", np.zeros((3, 4), dtype=np.float32))
    b = Parameter("b", np.zeros(3, dtype=np.float32))
    x = np.zeros((2, 4), dtype=np.float32)
    target = np.zeros((2, 3), dtype=np.float32)
    report = grad_check(dense_mse_closure(w, b, target), [w, b], x, tolerance=1e-2)
    assert report.passed
    # gradients are all ~0 so the absolute floor is what admits them
    for err, ok in report.per_param.values():
        assert ok and err < 1e-2


def test_non_finite_loss_raises():
    w = Parameter("w", np.full((1, 1), np.inf, dtype=np.float32))

    def bad(x):
        w.zero_grad()
        return float(w.value.sum())

    with pytest.raises(ValueError, match="not finite"):
        grad_check(bad, [w], np.zeros((1, 1), dtype=np.float32))


def test_sampled_subset_deterministic():
    w, b, x, target = make_dense_problem(2)
    r1 = grad_check(dense_mse_closure(w, b, target), [w, b], x, sample_per_param=5, seed=3)
    r2 = grad_check(dense_mse_closure(w, b, target), [w, b], x, sample_per_param=5, seed=3)
    assert r1.per_param == r2.per_param


def test_report_lines_format():
    w, b, x, target = make_dense_problem(4)
    report = grad_check(dense_mse_closure(w, b, target), [w, b], x)
    lines = list(report.lines())
    assert len(lines) == 2
    assert all(line.startswith(("PASS", "FAIL")) for line in lines)
