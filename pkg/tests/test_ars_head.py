"""Tests for the attentive relevance scoring head."""

import math

import numpy as np
import pytest

from src.model.ars_head import (
    ArsParams,
    ars_backward,
    ars_forward,
    init_ars_params,
    score_candidates,
    select_option,
    stable_sigmoid,
)
from src.utils.errors import DimensionMismatch, EmptyCandidates
from src.utils.finite_diff import central_difference, relative_error

LETTERS = ["A", "B", "C", "D", "E", "F"]


def _unit(vector):
    return vector / np.linalg.norm(vector)


class TestForward:

    def test_zero_attention_scores_half(self, rng):
        params = init_ars_params(8, 16, rng)
        for _ in range(5):
            trace = ars_forward(params, _unit(rng.normal(size=8)), _unit(rng.normal(size=8)))
            assert trace.logit == 0.0
            assert trace.score == 0.5

    def test_trace_shapes(self, rng):
        params = init_ars_params(4, 6, rng)
        trace = ars_forward(params, _unit(rng.normal(size=4)), _unit(rng.normal(size=4)))
        assert trace.h_q.shape == trace.h_c.shape == trace.v_int.shape == (6,)
        assert np.all(np.abs(trace.v_int) < 1.0)

    def test_matches_closed_form(self, rng):
        params = init_ars_params(3, 5, rng)
        params.w_att[:] = rng.normal(size=5)
        q, c = _unit(rng.normal(size=3)), _unit(rng.normal(size=3))
        expected = float(params.w_att @ np.tanh((params.W_q @ q) * (params.W_c @ c)))
        trace = ars_forward(params, q, c)
        assert trace.logit == pytest.approx(expected, abs=1e-15)
        assert trace.score == pytest.approx(1.0 / (1.0 + math.exp(-expected)), abs=1e-15)

    def test_scalar_reference(self):
        one = np.array([1.0])
        params = ArsParams(W_q=np.array([[1.0]]), W_c=np.array([[1.0]]), w_att=one.copy())
        trace = ars_forward(params, one, one)
        assert trace.logit == pytest.approx(0.761594, abs=1e-6)
        assert trace.score == pytest.approx(0.681724, abs=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_shared_projection_and_same_text(self, seed):
        rng = np.random.default_rng(seed)
        W = rng.normal(size=(6, 4))
        params = ArsParams(W_q=W, W_c=W.copy(), w_att=np.abs(rng.normal(size=6)))
        x = _unit(rng.normal(size=4))
        trace = ars_forward(params, x, x.copy())
        assert np.all(trace.v_int >= 0.0)
        assert trace.logit >= 0.0
        assert trace.score >= 0.5

    def test_dimension_mismatch(self, rng):
        params = init_ars_params(4, 6, rng)
        with pytest.raises(DimensionMismatch):
            ars_forward(params, np.ones(4) / 2.0, np.ones(5))

    def test_params_validate_shapes(self):
        with pytest.raises(DimensionMismatch):
            ArsParams(W_q=np.zeros((3, 2)), W_c=np.zeros((3, 4)), w_att=np.zeros(3))
        with pytest.raises(DimensionMismatch):
            ArsParams(W_q=np.zeros((3, 2)), W_c=np.zeros((3, 2)), w_att=np.zeros(2))

    def test_glorot_init(self, rng):
        params = init_ars_params(64, 256, rng)
        limit = math.sqrt(6.0 / (64 + 256))
        assert params.W_q.shape == (256, 64)
        assert np.max(np.abs(params.W_q)) <= limit
        assert np.max(np.abs(params.W_c)) <= limit
        assert not np.any(params.w_att)

    def test_stable_sigmoid_extremes(self):
        assert stable_sigmoid(1000.0) == 1.0
        assert stable_sigmoid(-1000.0) == 0.0
        assert stable_sigmoid(0.0) == 0.5
        assert stable_sigmoid(2.0) + stable_sigmoid(-2.0) == pytest.approx(1.0, abs=1e-15)


class TestBackward:

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        params = init_ars_params(4, 5, rng)
        params.w_att[:] = rng.normal(size=5)
        q, c = _unit(rng.normal(size=4)), _unit(rng.normal(size=4))
        upstream_dr, upstream_ds = 0.7, -0.3

        def loss():
            trace = ars_forward(params, q, c)
            return upstream_dr * trace.score + upstream_ds * trace.logit

        grads = ars_backward(params, q, c, ars_forward(params, q, c), upstream_dr, upstream_ds)
        for name, array in (("W_q", params.W_q), ("W_c", params.W_c), ("w_att", params.w_att), ("q", q), ("c", c)):
            numeric = central_difference(loss, array)
            assert relative_error(grads[name], numeric) < 1e-6, name

    def test_zero_upstream_gives_zero_gradients(self, rng):
        params = init_ars_params(3, 4, rng)
        params.w_att[:] = 1.0
        q, c = _unit(rng.normal(size=3)), _unit(rng.normal(size=3))
        grads = ars_backward(params, q, c, ars_forward(params, q, c), 0.0)
        for name in grads.names():
            assert not np.any(grads[name])


class TestSelection:

    def test_score_candidates_preserves_order(self, rng):
        params = init_ars_params(4, 6, rng)
        params.w_att[:] = rng.normal(size=6)
        q = _unit(rng.normal(size=4))
        candidates = [_unit(rng.normal(size=4)) for _ in range(3)]
        pairs = score_candidates(params, q, candidates)
        assert len(pairs) == 3
        for (logit, score), c in zip(pairs, candidates):
            trace = ars_forward(params, q, c)
            assert (logit, score) == (trace.logit, trace.score)

    def test_empty_candidates(self, rng):
        params = init_ars_params(4, 6, rng)
        with pytest.raises(EmptyCandidates):
            score_candidates(params, np.ones(4) / 2.0, [])
        with pytest.raises(EmptyCandidates):
            select_option([], [])

    def test_ties_go_to_earliest_letter(self):
        assert select_option([0.5, 0.5, 0.5], ["A", "B", "C"]) == "A"
        assert select_option([0.1, 0.9, 0.9, 0.2], ["A", "B", "C", "D"]) == "B"
        assert select_option([-1.0, -2.0], ["C", "E"]) == "C"

    def test_scores_and_logits_pick_the_same_letter(self):
        """Argmax over sigmoid scores equals argmax over logits, ties included."""
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            n = int(rng.integers(2, 7))
            # one decimal place makes exact ties common
            logits = np.round(rng.uniform(-10.0, 10.0, size=n), 1).tolist()
            if rng.random() < 0.2:
                logits = [logits[0]] * n
            scores = [stable_sigmoid(s) for s in logits]
            letters = LETTERS[:n]
            assert select_option(scores, letters) == select_option(logits, letters)
