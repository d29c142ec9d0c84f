"""
arsrank Model Package

Numerical core, all in NumPy with hand-written backward passes:
- Encoder: toy hashed bag-of-words encoder and precomputed embedding store
- ARS head: attentive relevance scoring of (question, option) pairs
- Losses: contrastive, dynamic relevance and logit-variance terms
- RelevanceModel: the parameter namespace shared by optimizer and checkpoints
"""

from src.model.gradients import GradientSet
from src.model.encoder import (
    EncoderBackend,
    PrecomputedEncoder,
    ToyEncoder,
    load_precomputed,
    save_precomputed,
)
from src.model.ars_head import ArsParams, ars_backward, ars_forward, score_candidates, select_option
from src.model.losses import LossWeights, Temperature, contrastive_loss, dynamic_loss, reg_loss, total_loss
from src.model.relevance_model import RelevanceModel

__all__ = [
    'GradientSet',
    'EncoderBackend',
    'PrecomputedEncoder',
    'ToyEncoder',
    'load_precomputed',
    'save_precomputed',
    'ArsParams',
    'ars_forward',
    'ars_backward',
    'score_candidates',
    'select_option',
    'LossWeights',
    'Temperature',
    'contrastive_loss',
    'dynamic_loss',
    'reg_loss',
    'total_loss',
    'RelevanceModel',
]
