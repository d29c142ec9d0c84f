"""
Optimizer: AdamW, warmup + cosine learning-rate schedule, global-norm clipping.

One optimizer step in arsrank is always:

    grads, norm = clip_global_norm(grads, max_norm=0.5)
    lr = lr_at(step, schedule)
    adamw_step(params, grads, state, lr)

Parameters are plain numpy arrays updated in place, keyed by the
RelevanceModel namespace. The contrastive temperature ("loss.log_tau") is
excluded from weight decay.
"""

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from src.model.gradients import GradientSet
from src.utils.errors import NonFiniteGradient, ShapeMismatch, StepOutOfRange

DEFAULT_MAX_NORM = 0.5


# --- Clipping ---

def clip_global_norm(grads: GradientSet, max_norm: float = DEFAULT_MAX_NORM) -> tuple[GradientSet, float]:
    """
    Scales every gradient by max_norm / g when the global norm g exceeds
    max_norm. Returns the (possibly) scaled set and the pre-clip norm.

    Raises:
        NonFiniteGradient: any entry is NaN or Inf.
    """
    if not grads.all_finite():
        bad = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
        raise NonFiniteGradient(f"non-finite gradient in {', '.join(bad)}")
    norm = grads.global_norm()
    if norm > max_norm:
        return grads.scaled(max_norm / norm), norm
    return grads, norm


# --- Schedule ---

@dataclass(frozen=True)
class ScheduleConfig:
    total_steps: int
    warmup_fraction: float = 0.10
    min_lr: float = 0.0
    base_lr: float = 1e-4

    def __post_init__(self):
        if self.total_steps < 1:
            raise StepOutOfRange(f"total_steps must be >= 1, got {self.total_steps}")
        if not 0.0 < self.warmup_fraction < 1.0:
            raise StepOutOfRange(f"warmup_fraction must lie in (0, 1), got {self.warmup_fraction}")

    @property
    def warmup_steps(self) -> int:
        return max(1, round(self.warmup_fraction * self.total_steps))


def lr_at(step: int, cfg: ScheduleConfig) -> float:
    """
    Linear warmup to base_lr over the first warmup_steps, then half-cosine
    decay to min_lr at total_steps. Continuous at the boundary.

    Raises:
        StepOutOfRange: step outside [0, total_steps].
    """
    if not 0 <= step <= cfg.total_steps:
        raise StepOutOfRange(f"step {step} outside [0, {cfg.total_steps}]")
    warmup = cfg.warmup_steps
    if step < warmup:
        return cfg.base_lr * (step + 1) / warmup
    decay_steps = cfg.total_steps - warmup
    progress = 1.0 if decay_steps <= 0 else (step - warmup) / decay_steps
    return cfg.min_lr + 0.5 * (cfg.base_lr - cfg.min_lr) * (1.0 + math.cos(math.pi * progress))


# --- AdamW ---

@dataclass
class AdamWState:
    lr0: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    no_decay: frozenset = frozenset({"loss.log_tau"})
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def hyperparameters(self) -> dict:
        return {
            "lr0": self.lr0,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "weight_decay": self.weight_decay,
            "no_decay": sorted(self.no_decay),
        }


def adamw_step(
    params: Mapping[str, np.ndarray], grads: GradientSet, state: AdamWState, lr: float
) -> AdamWState:
    """
    One bias-corrected AdamW update, in place, in sorted parameter order.

    Decoupled weight decay is applied first: theta <- theta - lr * wd * theta,
    then theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).

    Raises:
        ShapeMismatch: a parameter has no gradient or shapes differ.
    """
    for name in sorted(params):
        if name not in grads:
            raise ShapeMismatch(f"no gradient for parameter '{name}'")
        if grads[name].shape != params[name].shape:
            raise ShapeMismatch(f"gradient {grads[name].shape} does not match parameter '{name}' {params[name].shape}")

    state.t += 1
    bias1 = 1.0 - state.beta1 ** state.t
    bias2 = 1.0 - state.beta2 ** state.t

    for name in sorted(params):
        theta = params[name]
        g = grads[name]
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(theta)
            v = np.zeros_like(theta)

        if state.weight_decay and name not in state.no_decay:
            theta -= lr * state.weight_decay * theta

        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        theta -= lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)

        state.m[name] = m
        state.v[name] = v
    return state
