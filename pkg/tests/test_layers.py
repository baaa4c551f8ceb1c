"""Layer forward values against hand-computed results, gradients against
central finite differences."""

import numpy as np
import numpy.testing as npt
import pytest

from cccdetect.nn import (
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
    loss_mse,
)

TOL = 1e-2
FLOOR = 1e-4


def rel_err(a, n):
    return abs(a - n) / max(abs(a), abs(n), FLOOR)


def fd_param_grads(loss_fn, arr, h=1e-3):
    """Central finite differences of a scalar loss w.r.t. every entry of arr."""
    g = np.zeros(arr.size, dtype=np.float64)
    flat = arr.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        lp = loss_fn()
        flat[i] = orig - h
        lm = loss_fn()
        flat[i] = orig
        g[i] = (lp - lm) / (2 * h)
    return g.reshape(arr.shape)


def assert_grads_close(analytic, numeric):
    worst = max(
        rel_err(float(a), float(n))
        for a, n in zip(np.asarray(analytic).ravel(), np.asarray(numeric).ravel())
    )
    assert worst <= TOL, f"max relative error {worst:.3e} exceeds {TOL}"


class TestConv2d:
    def test_1x1_identity_kernel_is_identity(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((2, 1, 5, 7)).astype(np.float32)
        w = np.ones((1, 1, 1, 1), dtype=np.float32)
        b = np.zeros(1, dtype=np.float32)
        out, _ = conv2d_forward(x, w, b)
        npt.assert_array_equal(out, x)

    def test_hand_dot_product(self):
        # 1x1x2x2 ones against a 2x2 all-ones kernel -> single value 4.0
        x = np.ones((1, 1, 2, 2), dtype=np.float32)
        w = np.ones((1, 1, 2, 2), dtype=np.float32)
        b = np.zeros(1, dtype=np.float32)
        out, _ = conv2d_forward(x, w, b, stride=1, padding=0)
        assert out.shape == (1, 1, 1, 1)
        assert out[0, 0, 0, 0] == 4.0

    @pytest.mark.parametrize("k,stride,padding,dilation", [
        (1, 1, 0, 1),
        (3, 1, 1, 1),
        (3, 1, 4, 4),
        (3, 2, 1, 1),
        (2, 2, 1, 2),
    ])
    def test_output_size_formula(self, k, stride, padding, dilation):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((1, 2, 11, 9)).astype(np.float32)
        w = rng.standard_normal((3, 2, k, k)).astype(np.float32)
        b = rng.standard_normal(3).astype(np.float32)
        out, _ = conv2d_forward(x, w, b, stride=stride, padding=padding, dilation=dilation)
        ho = conv2d_out_size(11, k, stride, padding, dilation)
        wo = conv2d_out_size(9, k, stride, padding, dilation)
        assert out.shape == (1, 3, ho, wo)

    @pytest.mark.parametrize("stride,padding,dilation", [(1, 1, 1), (1, 4, 4), (2, 1, 1), (2, 0, 2)])
    def test_gradients_match_finite_differences(self, stride, padding, dilation):
        # float64 end to end so the finite differences are noise-free
        rng = np.random.default_rng(7)
        x = rng.standard_normal((2, 2, 8, 8))
        w = rng.standard_normal((3, 2, 3, 3)) * 0.5
        b = rng.standard_normal(3)

        def loss():
            out, _ = conv2d_forward(x, w, b, stride=stride, padding=padding, dilation=dilation)
            return float(np.sum(out, dtype=np.float64))

        out, cache = conv2d_forward(x, w, b, stride=stride, padding=padding, dilation=dilation)
        dx, dw, db = conv2d_backward(np.ones_like(out), cache)
        assert_grads_close(dx, fd_param_grads(loss, x))
        assert_grads_close(dw, fd_param_grads(loss, w))
        assert_grads_close(db, fd_param_grads(loss, b))

    def test_channel_mismatch_names_dimension(self):
        x = np.zeros((1, 3, 4, 4), dtype=np.float32)
        w = np.zeros((2, 4, 3, 3), dtype=np.float32)
        with pytest.raises(ShapeError, match="Cin=3.*Cin=4"):
            conv2d_forward(x, w, np.zeros(2, dtype=np.float32))

    def test_determinism(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 4, 16, 16)).astype(np.float32)
        w = rng.standard_normal((8, 4, 3, 3)).astype(np.float32)
        b = rng.standard_normal(8).astype(np.float32)
        a, ca = conv2d_forward(x, w, b, padding=2, dilation=2)
        bb, cb = conv2d_forward(x, w, b, padding=2, dilation=2)
        npt.assert_array_equal(a, bb)
        ga = conv2d_backward(a, ca)
        gb = conv2d_backward(bb, cb)
        for u, v in zip(ga, gb):
            npt.assert_array_equal(u, v)


class TestDense:
    def test_identity(self):
        x = np.arange(6, dtype=np.float32).reshape(2, 3)
        out, _ = dense_forward(x, np.eye(3, dtype=np.float32), np.zeros(3, dtype=np.float32))
        npt.assert_array_equal(out, x)

    def test_hand_matrix_multiply(self):
        # weights [[1,2],[3,4]] applied to input [1,1] -> [3, 7]
        w = np.array([[1, 2], [3, 4]], dtype=np.float32)
        x = np.array([[1, 1]], dtype=np.float32)
        out, _ = dense_forward(x, w, np.zeros(2, dtype=np.float32))
        npt.assert_array_equal(out, np.array([[3, 7]], dtype=np.float32))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((4, 5))
        w = rng.standard_normal((3, 5))
        b = rng.standard_normal(3)
        coeff = rng.standard_normal((4, 3))

        def loss():
            out, _ = dense_forward(x, w, b)
            return float(np.sum(out * coeff))

        out, cache = dense_forward(x, w, b)
        dx, dw, db = dense_backward(coeff, cache)
        assert_grads_close(dx, fd_param_grads(loss, x))
        assert_grads_close(dw, fd_param_grads(loss, w))
        assert_grads_close(db, fd_param_grads(loss, b))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError, match="Din=4.*Din=5"):
            dense_forward(np.zeros((1, 4), dtype=np.float32), np.zeros((2, 5), dtype=np.float32), None)


class TestActivations:
    def test_sigmoid_at_zero(self):
        out, _ = sigmoid_forward(np.zeros(3, dtype=np.float32))
        npt.assert_array_equal(out, np.full(3, 0.5, dtype=np.float32))

    def test_relu_definition(self):
        out, _ = relu_forward(np.array([-3.0, 3.0], dtype=np.float32))
        npt.assert_array_equal(out, np.array([0.0, 3.0], dtype=np.float32))

    def test_sigmoid_derivative_at_zero(self):
        # analytic derivative sigmoid'(0) = 0.25, cross-checked by central differences
        x = np.zeros(1, dtype=np.float32)
        out, cache = sigmoid_forward(x)
        d = sigmoid_backward(np.ones(1, dtype=np.float32), cache)
        assert abs(float(d[0]) - 0.25) < 1e-6

        def loss():
            o, _ = sigmoid_forward(x)
            return float(o.astype(np.float64).sum())

        assert_grads_close(d, fd_param_grads(loss, x))

    def test_relu_gradient(self):
        x = np.array([-1.0, 0.5, 2.0], dtype=np.float32)
        out, cache = relu_forward(x)
        d = relu_backward(np.ones(3, dtype=np.float32), cache)
        npt.assert_array_equal(d, np.array([0.0, 1.0, 1.0], dtype=np.float32))

    def test_sigmoid_extreme_values_finite(self):
        out, _ = sigmoid_forward(np.array([-500.0, 500.0], dtype=np.float32))
        assert np.all(np.isfinite(out))
        assert out[0] == 0.0 and out[1] == 1.0


class TestGlobalAvgPool:
    def test_constant_map(self):
        x = np.full((1, 2, 3, 3), 4.5, dtype=np.float32)
        out, _ = global_avg_pool_forward(x)
        npt.assert_allclose(out, np.full((1, 2), 4.5, dtype=np.float32))

    def test_hand_mean(self):
        # map [[1,3],[5,7]] -> 4.0
        x = np.array([[[[1, 3], [5, 7]]]], dtype=np.float32)
        out, _ = global_avg_pool_forward(x)
        assert out[0, 0] == 4.0

    def test_backward_uniform_distribution(self):
        x = np.zeros((1, 1, 4, 5), dtype=np.float32)
        out, cache = global_avg_pool_forward(x)
        d = global_avg_pool_backward(np.ones((1, 1), dtype=np.float32), cache)
        npt.assert_allclose(d, np.full((1, 1, 4, 5), 1.0 / 20.0, dtype=np.float32), rtol=1e-6)

    def test_gradient_vs_finite_differences(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((2, 3, 4, 4))
        coeff = rng.standard_normal((2, 3))

        def loss():
            out, _ = global_avg_pool_forward(x)
            return float(np.sum(out * coeff))

        out, cache = global_avg_pool_forward(x)
        d = global_avg_pool_backward(coeff, cache)
        assert_grads_close(d, fd_param_grads(loss, x))


def test_conv_mse_chain_gradient():
    # conv -> mse, the segmentation training path in miniature
    rng = np.random.default_rng(21)
    x = rng.standard_normal((1, 1, 6, 6))
    w = rng.standard_normal((1, 1, 3, 3))
    b = np.zeros(1)
    target = rng.standard_normal((1, 1, 6, 6))

    def loss():
        out, _ = conv2d_forward(x, w, b, padding=1)
        return loss_mse(out, target)[0]

    out, cache = conv2d_forward(x, w, b, padding=1)
    _, g = loss_mse(out, target)
    dx, dw, db = conv2d_backward(g, cache)
    assert_grads_close(dw, fd_param_grads(loss, w))
    assert_grads_close(dx, fd_param_grads(loss, x))
