"""
Composite Training Objective

Three loss components, each returned with exact gradients with respect to
its inputs, and their weighted sum:

    L_total = alpha * L_cons + beta * L_dyn + gamma * L_reg

    L_cons - InfoNCE over (q, c+, 5 x c-) with sim(a, b) = a.b / tau and a
             trainable temperature tau = exp(log_tau)
    L_dyn  - log-likelihood on the sigmoid scores of the positive and one
             sampled negative per item
    L_reg  - negative population standard deviation of the positive and
             negative logit sets (rewards a wide score range), optionally
             capped so it stops pushing once a set is spread enough

Usage:
    from src.model.losses import contrastive_loss, Temperature

    temp = Temperature.from_tau(0.07)
    term = contrastive_loss(q_embs, pos_embs, neg_embs, temp)
    print(term.value, term.grads["log_tau"])
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from src.model.gradients import GradientSet
from src.utils.errors import DimensionMismatch, NegativeCountMismatch, ScoreOutOfRange

NUM_NEGATIVES = 5
DYNAMIC_EPS = 1e-7
STD_FLOOR = 1e-8
TAU_MIN = 1e-3
TAU_MAX = 10.0
DEFAULT_TAU = 0.07


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.4
    beta: float = 0.4
    gamma: float = 0.2

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass
class Temperature:
    """tau = exp(log_tau); log_tau is a 0-d array so optimizers update it in place."""

    log_tau: np.ndarray = field(default_factory=lambda: np.array(math.log(DEFAULT_TAU)))

    @classmethod
    def from_tau(cls, tau: float) -> "Temperature":
        return cls(log_tau=np.array(math.log(tau), dtype=np.float64))

    @property
    def tau(self) -> float:
        return math.exp(float(self.log_tau))

    def clamp_(self) -> None:
        """Keeps tau within [1e-3, 10] after an optimizer update."""
        self.log_tau[...] = np.clip(self.log_tau, math.log(TAU_MIN), math.log(TAU_MAX))


@dataclass
class LossTerm:
    value: float
    grads: GradientSet


def contrastive_loss(
    q_embs: np.ndarray, pos_embs: np.ndarray, neg_embs: np.ndarray, temp: Temperature
) -> LossTerm:
    """
    InfoNCE with one positive and exactly five negatives per item.

    Args:
        q_embs: (B, d) question embeddings.
        pos_embs: (B, d) correct-option embeddings.
        neg_embs: (B, 5, d) incorrect-option embeddings.
        temp: Temperature holding the trainable log_tau.

    Returns:
        LossTerm with grads "q" (B, d), "pos" (B, d), "neg" (B, 5, d), "log_tau" ().
    """
    q_embs = np.asarray(q_embs, dtype=np.float64)
    pos_embs = np.asarray(pos_embs, dtype=np.float64)
    neg_embs = np.asarray(neg_embs, dtype=np.float64)
    if q_embs.ndim != 2 or pos_embs.shape != q_embs.shape:
        raise DimensionMismatch(f"q {q_embs.shape} and pos {pos_embs.shape} must both be (B, d)")
    if neg_embs.ndim != 3 or neg_embs.shape[0] != q_embs.shape[0] or neg_embs.shape[2] != q_embs.shape[1]:
        raise DimensionMismatch(f"neg {neg_embs.shape} must be (B, {NUM_NEGATIVES}, d)")
    if neg_embs.shape[1] != NUM_NEGATIVES:
        raise NegativeCountMismatch(f"expected {NUM_NEGATIVES} negatives per item, got {neg_embs.shape[1]}")

    batch = q_embs.shape[0]
    tau = temp.tau
    # candidates[:, 0] is the positive
    candidates = np.concatenate([pos_embs[:, None, :], neg_embs], axis=1)  # (B, 6, d)
    sims = np.einsum("bd,bkd->bk", q_embs, candidates)
    logits = sims / tau

    row_max = logits.max(axis=1, keepdims=True)
    shifted = logits - row_max
    exp_shifted = np.exp(shifted)
    denom = exp_shifted.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(denom)
    value = float(-log_probs[:, 0].sum() / batch)

    probs = exp_shifted / denom
    d_logits = probs.copy()
    d_logits[:, 0] -= 1.0
    d_logits /= batch

    d_sims = d_logits / tau
    d_q = np.einsum("bk,bkd->bd", d_sims, candidates)
    d_candidates = d_sims[:, :, None] * q_embs[:, None, :]
    # logits = sims * exp(-log_tau)
    d_log_tau = float(-(d_logits * logits).sum())

    return LossTerm(value=value, grads=GradientSet({
        "q": d_q,
        "pos": d_candidates[:, 0, :],
        "neg": d_candidates[:, 1:, :],
        "log_tau": np.array(d_log_tau),
    }))


def dynamic_loss(r_pos: Sequence[float], r_neg: Sequence[float]) -> LossTerm:
    """
    -(1/B) sum[log(r+ + eps) + log(1 - r- + eps)] with eps = 1e-7.

    Raises:
        ScoreOutOfRange: a score is non-finite or outside [0, 1] (sigmoid
                         saturation may legitimately reach the endpoints).
    """
    r_pos = np.asarray(r_pos, dtype=np.float64)
    r_neg = np.asarray(r_neg, dtype=np.float64)
    if r_pos.shape != r_neg.shape or r_pos.ndim != 1 or r_pos.size == 0:
        raise DimensionMismatch(f"r_pos {r_pos.shape} and r_neg {r_neg.shape} must be equal-length vectors")
    for name, scores in (("r_pos", r_pos), ("r_neg", r_neg)):
        if not np.all(np.isfinite(scores)) or np.any(scores < 0.0) or np.any(scores > 1.0):
            raise ScoreOutOfRange(f"{name} must lie in [0, 1], got {scores.tolist()}")

    batch = r_pos.size
    pos_term = r_pos + DYNAMIC_EPS
    neg_term = 1.0 - r_neg + DYNAMIC_EPS
    value = float(-(np.log(pos_term) + np.log(neg_term)).sum() / batch)
    return LossTerm(value=value, grads=GradientSet({
        "r_pos": -1.0 / (batch * pos_term),
        "r_neg": 1.0 / (batch * neg_term),
    }))


def _neg_std(values: np.ndarray, cap: Optional[float] = None) -> tuple[float, np.ndarray]:
    """(-Std, gradient) with population std; degenerate sets give (0, 0)."""
    n = values.size
    if n < 2:
        return 0.0, np.zeros_like(values)
    centered = values - values.mean()
    std = math.sqrt(float(np.mean(centered * centered)))
    if std < STD_FLOOR:
        return 0.0, np.zeros_like(values)
    if cap is not None and std >= cap:
        return -cap, np.zeros_like(values)
    return -std, -centered / (n * std)


def reg_loss(
    logits_pos: Sequence[float], logits_neg: Sequence[float], std_cap: Optional[float] = None
) -> LossTerm:
    """
    -(Std(s+) + Std(s-)), population standard deviation.

    With ``std_cap`` each set contributes -min(Std, std_cap): a set already
    spread past the cap adds a constant and no gradient.
    """
    logits_pos = np.asarray(logits_pos, dtype=np.float64)
    logits_neg = np.asarray(logits_neg, dtype=np.float64)
    pos_value, pos_grad = _neg_std(logits_pos, std_cap)
    neg_value, neg_grad = _neg_std(logits_neg, std_cap)
    return LossTerm(value=pos_value + neg_value, grads=GradientSet({
        "s_pos": pos_grad,
        "s_neg": neg_grad,
    }))


def total_loss(
    contrastive: LossTerm, dynamic: LossTerm, regularization: LossTerm, weights: LossWeights
) -> LossTerm:
    """
    alpha * L_cons + beta * L_dyn + gamma * L_reg; gradients combined with the
    same weights over the union of their names (merged in that fixed order).
    """
    value = (
        weights.alpha * contrastive.value
        + weights.beta * dynamic.value
        + weights.gamma * regularization.value
    )
    grads = (
        contrastive.grads.scaled(weights.alpha)
        .merged(dynamic.grads, weights.beta)
        .merged(regularization.grads, weights.gamma)
    )
    return LossTerm(value=float(value), grads=grads)
