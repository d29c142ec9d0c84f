"""
Per-batch composite objective with exact gradients.

Shared by the trainer (one call per optimizer step) and by gradcheck (which
also calls it gradient-free for finite differences). Each distinct text of
the batch is encoded once; the contrastive, dynamic and regularization
terms all read those embeddings, and their gradients are merged on the
embedding level before a single encoder backward pass per text.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.data.dataset import QUESTION_ROLE, TrainBatch, text_key
from src.model.ars_head import ars_backward, ars_forward
from src.model.encoder import EncodedText
from src.model.gradients import GradientSet
from src.model.losses import (
    LossTerm,
    LossWeights,
    contrastive_loss,
    dynamic_loss,
    reg_loss,
    total_loss,
)
from src.model.relevance_model import RelevanceModel

EMB_PREFIX = "emb:"


@dataclass
class BatchObjective:
    total: float
    contrastive: float
    dynamic: float
    regularization: float
    grads: Optional[GradientSet]
    pos_logits: list[float]
    neg_logits: list[float]


def sample_dynamic_negatives(batch: TrainBatch, rng: np.random.Generator) -> list[str]:
    """One incorrect letter per item, drawn uniformly from that item's incorrect options."""
    picks = []
    for entry in batch.entries:
        incorrect = entry.item.incorrect_letters
        picks.append(incorrect[int(rng.integers(0, len(incorrect)))])
    return picks


def _encode_batch(model: RelevanceModel, batch: TrainBatch) -> dict[str, EncodedText]:
    cache: dict[str, EncodedText] = {}
    for entry in batch.entries:
        item = entry.item
        roles = [(QUESTION_ROLE, item.question)] + list(item.options.items())
        for role, text in roles:
            key = text_key(item.id, role)
            if key not in cache:
                cache[key] = model.encoder.embed(key, text)
    return cache


def batch_objective(
    model: RelevanceModel,
    batch: TrainBatch,
    dynamic_negatives: Sequence[str],
    weights: LossWeights,
    with_grad: bool = True,
    reg_std_cap: Optional[float] = None,
) -> BatchObjective:
    """
    Forward (and optionally backward) pass of L_total on one batch.

    Args:
        model: Parameters and encoder backend.
        batch: Items with their positives and five contrastive negatives.
        dynamic_negatives: One incorrect letter per entry for L_dyn / L_reg.
        weights: alpha, beta, gamma.
        with_grad: False skips every backward computation.
        reg_std_cap: Logit std past which L_reg is flat (None: uncapped).

    Returns:
        BatchObjective whose grads (when requested) cover every name of
        model.named_parameters(); parameters a batch does not reach get zeros.
    """
    if len(dynamic_negatives) != len(batch):
        raise ValueError("one dynamic negative per batch entry is required")

    encoded = _encode_batch(model, batch)
    q_keys = [text_key(e.item.id, QUESTION_ROLE) for e in batch.entries]
    pos_keys = [text_key(e.item.id, e.positive) for e in batch.entries]
    neg_keys = [[text_key(e.item.id, letter) for letter in e.negatives] for e in batch.entries]
    dyn_keys = [text_key(e.item.id, letter) for e, letter in zip(batch.entries, dynamic_negatives)]

    q_embs = np.stack([encoded[k].vector for k in q_keys])
    pos_embs = np.stack([encoded[k].vector for k in pos_keys])
    neg_embs = np.stack([np.stack([encoded[k].vector for k in row]) for row in neg_keys])

    cons = contrastive_loss(q_embs, pos_embs, neg_embs, model.temperature)

    pos_traces = [ars_forward(model.ars, encoded[q].vector, encoded[p].vector) for q, p in zip(q_keys, pos_keys)]
    neg_traces = [ars_forward(model.ars, encoded[q].vector, encoded[n].vector) for q, n in zip(q_keys, dyn_keys)]
    dyn = dynamic_loss([t.score for t in pos_traces], [t.score for t in neg_traces])
    reg = reg_loss([t.logit for t in pos_traces], [t.logit for t in neg_traces], reg_std_cap)

    pos_logits = [t.logit for t in pos_traces]
    neg_logits = [t.logit for t in neg_traces]

    if not with_grad:
        total = weights.alpha * cons.value + weights.beta * dyn.value + weights.gamma * reg.value
        return BatchObjective(float(total), cons.value, dyn.value, reg.value, None, pos_logits, neg_logits)

    # Re-express each component's gradient over the shared namespace
    # (head parameters, log_tau, per-text embeddings), then merge.
    cons_grads = GradientSet({"loss.log_tau": cons.grads["log_tau"]})
    for i in range(len(batch)):
        cons_grads.add(EMB_PREFIX + q_keys[i], cons.grads["q"][i])
        cons_grads.add(EMB_PREFIX + pos_keys[i], cons.grads["pos"][i])
        for j, key in enumerate(neg_keys[i]):
            cons_grads.add(EMB_PREFIX + key, cons.grads["neg"][i, j])

    dyn_grads = GradientSet()
    reg_grads = GradientSet()
    pairs = [
        (q_keys, pos_keys, pos_traces, dyn.grads["r_pos"], reg.grads["s_pos"]),
        (q_keys, dyn_keys, neg_traces, dyn.grads["r_neg"], reg.grads["s_neg"]),
    ]
    for qs, cs, traces, d_scores, d_logits in pairs:
        for i, (qk, ck, trace) in enumerate(zip(qs, cs, traces)):
            q_vec, c_vec = encoded[qk].vector, encoded[ck].vector
            _accumulate_head(dyn_grads, ars_backward(model.ars, q_vec, c_vec, trace, float(d_scores[i])), qk, ck)
            _accumulate_head(reg_grads, ars_backward(model.ars, q_vec, c_vec, trace, 0.0, float(d_logits[i])), qk, ck)

    merged = total_loss(
        LossTerm(cons.value, cons_grads),
        LossTerm(dyn.value, dyn_grads),
        LossTerm(reg.value, reg_grads),
        weights,
    )
    return BatchObjective(
        total=merged.value,
        contrastive=cons.value,
        dynamic=dyn.value,
        regularization=reg.value,
        grads=_to_parameter_grads(model, merged.grads, encoded),
        pos_logits=pos_logits,
        neg_logits=neg_logits,
    )


def _accumulate_head(target: GradientSet, head: GradientSet, q_key: str, c_key: str) -> None:
    target.add("ars.W_q", head["W_q"])
    target.add("ars.W_c", head["W_c"])
    target.add("ars.w_att", head["w_att"])
    target.add(EMB_PREFIX + q_key, head["q"])
    target.add(EMB_PREFIX + c_key, head["c"])


def _to_parameter_grads(model: RelevanceModel, merged: GradientSet, encoded: dict[str, EncodedText]) -> GradientSet:
    """Pushes embedding gradients through the encoder; fills unreached parameters with zeros."""
    params = model.named_parameters()
    out = GradientSet()
    for name, grad in merged.items():
        if not name.startswith(EMB_PREFIX):
            out.add(name, grad)

    if "encoder.table" in params:
        table_grad = np.zeros_like(params["encoder.table"])
        for name, grad in merged.items():
            if name.startswith(EMB_PREFIX):
                sparse = model.encoder.backward(encoded[name[len(EMB_PREFIX):]], grad)
                table_grad[sparse.rows] += sparse.values
        out.add("encoder.table", table_grad)

    for name, value in params.items():
        if name not in out:
            out.add(name, np.zeros_like(value))
    return out
