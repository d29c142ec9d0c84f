"""
Attentive Relevance Scoring Head

Scores one (question, candidate) pair of unit embeddings:

    h_q   = W_q q            h_c = W_c c          (shared latent space, size h)
    v_int = tanh(h_q * h_c)                       (element-wise interaction)
    s     = w_att . v_int                         (logit)
    r     = sigmoid(s)                            (relevance score)

No bias terms. The forward pass returns the full trace so the backward pass
can reuse it without recomputation.

Usage:
    from src.model.ars_head import init_ars_params, ars_forward

    params = init_ars_params(embed_dim=64, hidden_dim=256, rng=rng)
    trace = ars_forward(params, q, c)
    print(trace.score)
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.model.gradients import GradientSet
from src.utils.errors import DimensionMismatch, EmptyCandidates

DEFAULT_HIDDEN_DIM = 256


@dataclass
class ArsParams:
    W_q: np.ndarray    # (h, d)
    W_c: np.ndarray    # (h, d)
    w_att: np.ndarray  # (h,)

    def __post_init__(self):
        if self.W_q.ndim != 2 or self.W_q.shape != self.W_c.shape:
            raise DimensionMismatch(
                f"W_q {self.W_q.shape} and W_c {self.W_c.shape} must both be (h, d)"
            )
        if self.w_att.shape != (self.W_q.shape[0],):
            raise DimensionMismatch(f"w_att {self.w_att.shape} must be ({self.W_q.shape[0]},)")

    @property
    def hidden_dim(self) -> int:
        return int(self.W_q.shape[0])

    @property
    def embed_dim(self) -> int:
        return int(self.W_q.shape[1])


@dataclass(frozen=True)
class ArsForwardTrace:
    h_q: np.ndarray
    h_c: np.ndarray
    v_int: np.ndarray
    logit: float
    score: float


def init_ars_params(embed_dim: int, hidden_dim: int, rng: np.random.Generator) -> ArsParams:
    """Glorot-uniform projections (fan_in = d, fan_out = h) and a zero attention vector."""
    limit = math.sqrt(6.0 / (embed_dim + hidden_dim))
    W_q = rng.uniform(-limit, limit, size=(hidden_dim, embed_dim))
    W_c = rng.uniform(-limit, limit, size=(hidden_dim, embed_dim))
    return ArsParams(W_q=W_q, W_c=W_c, w_att=np.zeros(hidden_dim, dtype=np.float64))


def stable_sigmoid(s: float) -> float:
    # branch on sign so exp never overflows
    if s >= 0:
        return 1.0 / (1.0 + math.exp(-s))
    z = math.exp(s)
    return z / (1.0 + z)


def _check_dims(params: ArsParams, *vectors: np.ndarray) -> None:
    for vec in vectors:
        if vec.shape != (params.embed_dim,):
            raise DimensionMismatch(
                f"embedding shape {vec.shape} does not match head input d={params.embed_dim}"
            )


def ars_forward(params: ArsParams, q: np.ndarray, c: np.ndarray) -> ArsForwardTrace:
    q = np.asarray(q, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    _check_dims(params, q, c)

    h_q = params.W_q @ q
    h_c = params.W_c @ c
    v_int = np.tanh(h_q * h_c)
    logit = float(params.w_att @ v_int)
    return ArsForwardTrace(h_q=h_q, h_c=h_c, v_int=v_int, logit=logit, score=stable_sigmoid(logit))


def ars_backward(
    params: ArsParams,
    q: np.ndarray,
    c: np.ndarray,
    trace: ArsForwardTrace,
    upstream_dr: float,
    upstream_ds: float = 0.0,
) -> GradientSet:
    """
    Exact gradients of a scalar loss L given dL/dr (and optionally dL/ds).

    Returns:
        GradientSet with "W_q", "W_c", "w_att", "q", "c".
    """
    q = np.asarray(q, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    _check_dims(params, q, c)

    r = trace.score
    ds = upstream_dr * r * (1.0 - r) + upstream_ds
    dv = ds * params.w_att
    dz = dv * (1.0 - trace.v_int * trace.v_int)
    dz_hc = dz * trace.h_c
    dz_hq = dz * trace.h_q

    return GradientSet({
        "W_q": np.outer(dz_hc, q),
        "W_c": np.outer(dz_hq, c),
        "w_att": ds * trace.v_int,
        "q": params.W_q.T @ dz_hc,
        "c": params.W_c.T @ dz_hq,
    })


def score_candidates(
    params: ArsParams, q: np.ndarray, candidates: Sequence[np.ndarray]
) -> list[tuple[float, float]]:
    """(logit, score) for each candidate, in input order."""
    if len(candidates) == 0:
        raise EmptyCandidates("at least one candidate is required")
    results = []
    for c in candidates:
        trace = ars_forward(params, q, c)
        results.append((trace.logit, trace.score))
    return results


def select_option(values: Sequence[float], letters: Sequence[str]) -> str:
    """
    Letter of the largest value; ties go to the earliest letter.

    ``letters`` must be in ascending order (A before B ...), which McqItem
    guarantees.
    """
    if len(values) == 0:
        raise EmptyCandidates("cannot select from zero options")
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return letters[best]
