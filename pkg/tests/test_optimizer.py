"""Tests for gradient clipping, the learning-rate schedule and AdamW."""

import math

import numpy as np
import pytest

from src.model.gradients import GradientSet
from src.training.optimizer import (
    AdamWState,
    ScheduleConfig,
    adamw_step,
    clip_global_norm,
    lr_at,
)
from src.utils.errors import NonFiniteGradient, ShapeMismatch, StepOutOfRange


class TestClipping:

    @pytest.mark.parametrize("scale", [1.0, 1e3, 1e8])
    def test_large_gradients_are_clipped(self, rng, scale):
        grads = GradientSet({
            "ars.W_q": scale * rng.normal(size=(4, 3)),
            "ars.w_att": scale * rng.normal(size=4),
            "loss.log_tau": np.array(scale),
        })
        clipped, norm = clip_global_norm(grads, 0.5)
        assert norm == pytest.approx(grads.global_norm())
        assert clipped.global_norm() <= 0.5 + 1e-9
        # direction is preserved
        np.testing.assert_allclose(clipped["ars.W_q"] * norm / clipped.global_norm(), grads["ars.W_q"], rtol=1e-9)

    def test_small_gradients_untouched(self):
        grads = GradientSet({"w": np.array([0.1, 0.2])})
        clipped, norm = clip_global_norm(grads, 0.5)
        np.testing.assert_array_equal(clipped["w"], [0.1, 0.2])
        assert norm == pytest.approx(math.sqrt(0.05), abs=1e-15)

    @pytest.mark.parametrize("bad", [float("nan"), float("inf")])
    def test_non_finite(self, bad):
        with pytest.raises(NonFiniteGradient):
            clip_global_norm(GradientSet({"w": np.array([1.0, bad])}))


class TestSchedule:

    def test_reference_points(self):
        cfg = ScheduleConfig(total_steps=1000, warmup_fraction=0.1, base_lr=1e-4)
        assert cfg.warmup_steps == 100
        assert abs(lr_at(99, cfg) - 1e-4) < 1e-12
        assert abs(lr_at(100, cfg) - 1e-4) < 1e-12
        assert abs(lr_at(550, cfg) - 0.5e-4) < 1e-12
        assert abs(lr_at(1000, cfg) - 0.0) < 1e-12

    def test_min_lr_at_final_step(self):
        cfg = ScheduleConfig(total_steps=200, warmup_fraction=0.1, base_lr=1e-3, min_lr=1e-5)
        assert abs(lr_at(200, cfg) - 1e-5) < 1e-12

    def test_linear_warmup(self):
        cfg = ScheduleConfig(total_steps=100, warmup_fraction=0.1, base_lr=1e-3)
        assert lr_at(0, cfg) == pytest.approx(1e-4, abs=1e-15)
        assert lr_at(4, cfg) == pytest.approx(5e-4, abs=1e-15)

    def test_monotone_decay(self):
        cfg = ScheduleConfig(total_steps=50, base_lr=1e-3)
        values = [lr_at(step, cfg) for step in range(cfg.warmup_steps, 51)]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_tiny_schedules(self):
        cfg = ScheduleConfig(total_steps=1, base_lr=1e-3)
        assert cfg.warmup_steps == 1
        assert lr_at(0, cfg) == pytest.approx(1e-3)
        assert lr_at(1, cfg) == 0.0

    @pytest.mark.parametrize("step", [-1, 1001])
    def test_out_of_range(self, step):
        with pytest.raises(StepOutOfRange):
            lr_at(step, ScheduleConfig(total_steps=1000))

    def test_invalid_config(self):
        with pytest.raises(StepOutOfRange):
            ScheduleConfig(total_steps=0)


class TestAdamW:

    def test_first_step_moves_by_lr_times_sign(self):
        params = {"w": np.array([1.0, -2.0, 0.5])}
        grads = GradientSet({"w": np.array([0.3, -4.0, 1e-3])})
        state = AdamWState(weight_decay=0.0)
        adamw_step(params, grads, state, lr=0.01)
        np.testing.assert_allclose(params["w"], [0.99, -1.99, 0.49], atol=1e-6)
        assert state.t == 1

    def test_matches_reference_over_steps(self, rng):
        theta = rng.normal(size=5)
        params = {"w": theta.copy()}
        state = AdamWState(beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.01)
        m = np.zeros(5)
        v = np.zeros(5)
        for t in range(1, 6):
            g = rng.normal(size=5)
            lr = 1e-3 * t
            adamw_step(params, GradientSet({"w": g}), state, lr)

            theta = theta - lr * 0.01 * theta
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            theta = theta - lr * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        np.testing.assert_allclose(params["w"], theta, rtol=1e-12, atol=1e-15)

    def test_decoupled_weight_decay(self):
        params = {"ars.w_att": np.array([2.0]), "loss.log_tau": np.array(-2.0)}
        grads = GradientSet({"ars.w_att": np.zeros(1), "loss.log_tau": np.array(0.0)})
        adamw_step(params, grads, AdamWState(weight_decay=0.1), lr=0.5)
        assert params["ars.w_att"][0] == pytest.approx(2.0 - 0.5 * 0.1 * 2.0, abs=1e-15)
        # the temperature is never decayed
        assert float(params["loss.log_tau"]) == -2.0

    def test_updates_in_place(self):
        w = np.array([1.0, 1.0])
        params = {"w": w}
        adamw_step(params, GradientSet({"w": np.array([1.0, -1.0])}), AdamWState(), lr=0.1)
        assert params["w"] is w
        assert w[0] < 1.0 < w[1]

    def test_zero_learning_rate_is_identity(self, rng):
        w = rng.normal(size=(3, 2))
        before = w.copy()
        adamw_step({"w": w}, GradientSet({"w": rng.normal(size=(3, 2))}), AdamWState(), lr=0.0)
        np.testing.assert_array_equal(w, before)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            adamw_step({"w": np.zeros(3)}, GradientSet({"w": np.zeros(4)}), AdamWState(), lr=0.1)
        with pytest.raises(ShapeMismatch):
            adamw_step({"w": np.zeros(3)}, GradientSet(), AdamWState(), lr=0.1)
