import math

import numpy as np
import numpy.testing as npt
import pytest

from cccdetect.nn import ShapeError, loss_bce_logits, loss_mse

from test_layers import assert_grads_close, fd_param_grads


class TestMse:
    def test_identical_inputs(self):
        x = np.arange(6, dtype=np.float32)
        loss, grad = loss_mse(x, x.copy())
        assert loss == 0.0
        npt.assert_array_equal(grad, np.zeros_like(x))

    def test_hand_formula(self):
        # pred [0,1] vs target [1,1]: ((0-1)^2 + 0)/2 = 0.5
        loss, _ = loss_mse(np.array([0.0, 1.0], dtype=np.float32), np.array([1.0, 1.0], dtype=np.float32))
        assert abs(loss - 0.5) < 1e-7

    def test_grad_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        pred = rng.standard_normal(10)
        target = rng.standard_normal(10)
        _, grad = loss_mse(pred, target)
        assert_grads_close(grad, fd_param_grads(lambda: loss_mse(pred, target)[0], pred))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            loss_mse(np.zeros(3, dtype=np.float32), np.zeros(4, dtype=np.float32))


class TestBceLogits:
    def test_logit_zero_target_one_is_ln2(self):
        loss, _ = loss_bce_logits(np.array([0.0]), np.array([1.0]))
        assert abs(loss - math.log(2.0)) < 1e-9

    def test_saturated_logit(self):
        loss, _ = loss_bce_logits(np.array([20.0]), np.array([1.0]))
        assert loss < 1e-8

    def test_grad_at_zero(self):
        # sigmoid(0) - 1 = -0.5 for a single logit
        _, grad = loss_bce_logits(np.array([0.0]), np.array([1.0]))
        assert abs(float(grad[0]) + 0.5) < 1e-9

    def test_rejects_nonbinary_targets(self):
        with pytest.raises(ValueError, match="0 or 1"):
            loss_bce_logits(np.array([0.0]), np.array([0.5]))

    def test_finite_and_bounded_for_large_logits(self):
        z = np.linspace(-50, 50, 201)
        y = (np.arange(201) % 2).astype(np.float64)
        loss, grad = loss_bce_logits(z, y)
        assert np.isfinite(loss)
        assert np.all(np.abs(grad) <= 1.0)

    def test_grad_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        z = rng.standard_normal(8) * 2
        y = (rng.random(8) > 0.5).astype(np.float64)
        _, grad = loss_bce_logits(z, y)
        assert_grads_close(grad, fd_param_grads(lambda: loss_bce_logits(z, y)[0], z))
