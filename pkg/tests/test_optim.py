import numpy as np
import numpy.testing as npt
import pytest

from cccdetect.nn import OptimConfig, Parameter, adam_step


def make_param(name, value, trainable=True):
    return Parameter(name=name, value=np.asarray(value, dtype=np.float32), trainable=trainable)


class TestAdam:
    def test_zero_gradients_leave_values_unchanged(self):
        p = make_param("w", [1.0, -2.0, 3.0])
        before = p.value.copy()
        adam_step([p], OptimConfig())
        npt.assert_array_equal(p.value, before)

    def test_first_step_magnitude(self):
        # grad 1.0 with defaults: m_hat = v_hat = 1, delta = -lr/(1 + eps) ~ -1e-4
        p = make_param("w", [0.0])
        p.grad[:] = 1.0
        cfg = OptimConfig()
        adam_step([p], cfg)
        assert cfg.step_count == 1
        npt.assert_allclose(p.value, [-1e-4], rtol=1e-5)

    def test_identical_params_get_identical_updates(self):
        a = make_param("a", [0.5, -0.5])
        b = make_param("b", [0.5, -0.5])
        for p in (a, b):
            p.grad[:] = [0.3, -0.7]
        cfg = OptimConfig()
        adam_step([a, b], cfg)
        npt.assert_array_equal(a.value, b.value)
        npt.assert_array_equal(a.adam_m, b.adam_m)
        npt.assert_array_equal(a.adam_v, b.adam_v)

    def test_frozen_param_untouched_bitwise(self):
        p = make_param("frozen", [1.25, -3.5], trainable=False)
        p.grad[:] = 10.0
        raw_before = p.value.tobytes()
        m_before = p.adam_m.tobytes()
        v_before = p.adam_v.tobytes()
        cfg = OptimConfig()
        for _ in range(10):
            adam_step([p], cfg)
        assert p.value.tobytes() == raw_before
        assert p.adam_m.tobytes() == m_before
        assert p.adam_v.tobytes() == v_before

    def test_step_count_shared_across_params(self):
        params = [make_param(f"p{i}", [0.0]) for i in range(3)]
        cfg = OptimConfig()
        for p in params:
            p.grad[:] = 1.0
        adam_step(params, cfg)
        adam_step(params, cfg)
        assert cfg.step_count == 2

    def test_bias_correction_against_reference_loop(self):
        # a literal transcription of the update equations, kept independent
        # of the vectorized implementation
        rng = np.random.default_rng(4)
        value = rng.standard_normal(5).astype(np.float32)
        grads = [rng.standard_normal(5).astype(np.float32) for _ in range(7)]

        p = make_param("w", value.copy())
        cfg = OptimConfig(learning_rate=1e-3)
        for g in grads:
            p.grad[:] = g
            adam_step([p], cfg)

        ref = value.astype(np.float64)
        m = np.zeros(5)
        v = np.zeros(5)
        for t, g in enumerate(grads, start=1):
            g = g.astype(np.float64)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            m_hat = m / (1 - 0.9 ** t)
            v_hat = v / (1 - 0.999 ** t)
            ref -= 1e-3 * m_hat / (np.sqrt(v_hat) + 1e-8)
        npt.assert_allclose(p.value, ref.astype(np.float32), rtol=1e-4, atol=1e-6)


class TestOptimConfig:
    def test_rejects_bad_learning_rate(self):
        with pytest.raises(ValueError):
            OptimConfig(learning_rate=0.0)

    def test_rejects_bad_betas(self):
        with pytest.raises(ValueError):
            OptimConfig(beta1=1.0)


class TestParameter:
    def test_moments_start_at_zero(self):
        p = make_param("w", [1.0, 2.0])
        assert not p.adam_m.any()
        assert not p.adam_v.any()

    def test_shape_consistency_enforced(self):
        with pytest.raises(ValueError):
            Parameter(name="bad", value=np.zeros(3, dtype=np.float32), grad=np.zeros(4, dtype=np.float32))
