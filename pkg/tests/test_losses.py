"""Tests for the contrastive, dynamic and regularization losses and their sum."""

import math

import numpy as np
import pytest

from src.model.gradients import GradientSet
from src.model.losses import (
    DYNAMIC_EPS,
    TAU_MAX,
    TAU_MIN,
    LossTerm,
    LossWeights,
    Temperature,
    contrastive_loss,
    dynamic_loss,
    reg_loss,
    total_loss,
)
from src.utils.errors import DimensionMismatch, NegativeCountMismatch, ScoreOutOfRange
from src.utils.finite_diff import central_difference, relative_error


def _unit_rows(array):
    return array / np.linalg.norm(array, axis=-1, keepdims=True)


def _random_batch(rng, batch=3, dim=4):
    q = _unit_rows(rng.normal(size=(batch, dim)))
    pos = _unit_rows(rng.normal(size=(batch, dim)))
    neg = _unit_rows(rng.normal(size=(batch, 5, dim)))
    return q, pos, neg


class TestContrastiveLoss:

    def test_uniform_similarities_give_ln6(self):
        v = np.array([0.6, 0.8])
        q = np.tile(v, (2, 1))
        neg = np.tile(v, (2, 5, 1))
        term = contrastive_loss(q, q.copy(), neg, Temperature.from_tau(0.07))
        assert abs(term.value - math.log(6.0)) < 1e-9

    def test_orthogonal_negatives_at_unit_temperature(self):
        eye = np.eye(6)
        q = eye[:1]
        neg = eye[1:][None, :, :]
        term = contrastive_loss(q, q.copy(), neg, Temperature.from_tau(1.0))
        expected = -math.log(math.e / (math.e + 5.0))
        assert term.value == pytest.approx(expected, abs=1e-12)
        assert term.value == pytest.approx(1.043592, abs=1e-6)

    def test_nonnegative_and_below_ln6_when_positive_wins(self, rng):
        q, pos, neg = _random_batch(rng)
        assert contrastive_loss(q, pos, neg, Temperature.from_tau(0.3)).value >= 0.0
        easy = contrastive_loss(q, q.copy(), -np.repeat(q[:, None, :], 5, axis=1), Temperature.from_tau(0.3))
        assert easy.value < math.log(6.0)

    def test_invariant_to_negative_order(self, rng):
        q, pos, neg = _random_batch(rng)
        temp = Temperature.from_tau(0.2)
        base = contrastive_loss(q, pos, neg, temp).value
        permuted = contrastive_loss(q, pos, neg[:, [3, 0, 4, 1, 2], :], temp).value
        assert permuted == pytest.approx(base, abs=1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_gradients_match_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        q, pos, neg = _random_batch(rng)
        temp = Temperature.from_tau(float(rng.uniform(0.2, 1.0)))

        def loss():
            return contrastive_loss(q, pos, neg, temp).value

        grads = contrastive_loss(q, pos, neg, temp).grads
        for name, array in (("q", q), ("pos", pos), ("neg", neg), ("log_tau", temp.log_tau)):
            assert relative_error(grads[name], central_difference(loss, array, step=1e-5)) < 1e-4, name

    def test_tiny_temperature_stays_finite(self, rng):
        q, _, _ = _random_batch(rng, batch=2)
        neg = -np.repeat(q[:, None, :], 5, axis=1)
        neg[:, 0, :] = q
        term = contrastive_loss(q, -q, neg, Temperature.from_tau(TAU_MIN))
        assert math.isfinite(term.value)
        assert term.grads.all_finite()

    def test_wrong_negative_count(self, rng):
        q, pos, neg = _random_batch(rng)
        with pytest.raises(NegativeCountMismatch):
            contrastive_loss(q, pos, neg[:, :4, :], Temperature())

    def test_dimension_mismatch(self, rng):
        q, pos, neg = _random_batch(rng)
        with pytest.raises(DimensionMismatch):
            contrastive_loss(q, pos[:2], neg, Temperature())
        with pytest.raises(DimensionMismatch):
            contrastive_loss(q, pos, neg[:, :, :3], Temperature())


class TestTemperature:

    def test_default_and_clamp(self):
        assert Temperature().tau == pytest.approx(0.07, abs=1e-15)
        temp = Temperature.from_tau(50.0)
        temp.clamp_()
        assert temp.tau == pytest.approx(TAU_MAX, rel=1e-12)
        temp = Temperature.from_tau(1e-6)
        temp.clamp_()
        assert temp.tau == pytest.approx(TAU_MIN, rel=1e-12)

    def test_clamp_is_in_place(self):
        temp = Temperature.from_tau(100.0)
        log_tau = temp.log_tau
        temp.clamp_()
        assert temp.log_tau is log_tau


class TestDynamicLoss:

    def test_half_scores(self):
        term = dynamic_loss([0.5], [0.5])
        assert term.value == pytest.approx(-2.0 * math.log(0.5 + DYNAMIC_EPS), abs=1e-12)
        assert term.value == pytest.approx(2.0 * math.log(2.0), abs=1e-6)

    def test_near_perfect_scores(self):
        term = dynamic_loss([1.0 - 1e-9], [1e-9])
        assert abs(term.value) < 1e-6

    def test_batch_mean(self):
        r_pos, r_neg = [0.9, 0.3], [0.2, 0.6]
        per_item = [-(math.log(p + DYNAMIC_EPS) + math.log(1.0 - n + DYNAMIC_EPS)) for p, n in zip(r_pos, r_neg)]
        assert dynamic_loss(r_pos, r_neg).value == pytest.approx(sum(per_item) / 2.0, abs=1e-12)

    def test_gradient_signs_and_values(self, rng):
        r_pos = rng.uniform(0.05, 0.95, size=6)
        r_neg = rng.uniform(0.05, 0.95, size=6)
        grads = dynamic_loss(r_pos, r_neg).grads
        assert np.all(grads["r_pos"] < 0.0)
        assert np.all(grads["r_neg"] > 0.0)

        def loss():
            return dynamic_loss(r_pos, r_neg).value

        assert relative_error(grads["r_pos"], central_difference(loss, r_pos, step=1e-6)) < 1e-6
        assert relative_error(grads["r_neg"], central_difference(loss, r_neg, step=1e-6)) < 1e-6

    @pytest.mark.parametrize("r_pos, r_neg", [
        ([1.5], [0.5]),
        ([0.5], [-0.1]),
        ([float("nan")], [0.5]),
    ])
    def test_out_of_range(self, r_pos, r_neg):
        with pytest.raises(ScoreOutOfRange):
            dynamic_loss(r_pos, r_neg)

    def test_saturated_endpoints_are_accepted(self):
        assert math.isfinite(dynamic_loss([0.0], [1.0]).value)


class TestRegLoss:

    def test_constant_sets(self):
        term = reg_loss([0.3, 0.3, 0.3], [-1.0, -1.0])
        assert term.value == 0.0
        assert not np.any(term.grads["s_pos"]) and not np.any(term.grads["s_neg"])

    def test_population_std(self):
        assert reg_loss([0.0, 2.0], [-1.0, 1.0]).value == -2.0

    def test_single_element_sets_contribute_nothing(self):
        term = reg_loss([1.0], [0.0, 4.0])
        assert term.value == -2.0
        assert term.grads["s_pos"].tolist() == [0.0]

    def test_cap_flattens_spread_sets(self):
        term = reg_loss([0.0, 2.0], [-3.0, 3.0], std_cap=2.0)
        assert term.value == -3.0
        assert term.grads["s_pos"].tolist() == [0.5, -0.5]
        assert term.grads["s_neg"].tolist() == [0.0, 0.0]

    def test_cap_above_both_stds_changes_nothing(self):
        s_pos, s_neg = [0.1, -0.4, 0.3], [1.0, 0.2]
        capped, plain = reg_loss(s_pos, s_neg, std_cap=5.0), reg_loss(s_pos, s_neg)
        assert capped.value == plain.value
        np.testing.assert_array_equal(capped.grads["s_pos"], plain.grads["s_pos"])
        np.testing.assert_array_equal(capped.grads["s_neg"], plain.grads["s_neg"])

    @pytest.mark.parametrize("seed", range(20))
    def test_gradients_match_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        s_pos, s_neg = rng.normal(size=8), rng.normal(size=8)

        def loss():
            return reg_loss(s_pos, s_neg).value

        grads = reg_loss(s_pos, s_neg).grads
        assert reg_loss(s_pos, s_neg).value <= 0.0
        assert relative_error(grads["s_pos"], central_difference(loss, s_pos)) < 1e-4
        assert relative_error(grads["s_neg"], central_difference(loss, s_neg)) < 1e-4


class TestTotalLoss:

    @staticmethod
    def _term(value, grad=None):
        return LossTerm(value, GradientSet({} if grad is None else {"x": grad}))

    def test_unit_components(self):
        total = total_loss(self._term(1.0), self._term(1.0), self._term(1.0), LossWeights())
        assert total.value == pytest.approx(1.0, abs=1e-12)

    def test_reference_components(self):
        total = total_loss(
            self._term(math.log(6.0)), self._term(2.0 * math.log(2.0)), self._term(0.0), LossWeights()
        )
        assert total.value == pytest.approx(1.271221, abs=1e-6)

    def test_gradients_combine_with_weights(self):
        ones = np.ones(3)
        total = total_loss(
            self._term(0.0, ones), self._term(0.0, 2.0 * ones), self._term(0.0, -ones), LossWeights(0.5, 0.25, 1.0)
        )
        np.testing.assert_allclose(total.grads["x"], 0.5 + 0.5 - 1.0, atol=1e-15)

    def test_zero_gradients_stay_zero(self):
        zeros = np.zeros(4)
        total = total_loss(self._term(1.0, zeros), self._term(2.0, zeros), self._term(3.0, zeros), LossWeights())
        assert not np.any(total.grads["x"])

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            LossWeights(alpha=-0.1)
