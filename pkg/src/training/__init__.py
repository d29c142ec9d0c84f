"""
arsrank Training Package

- Optimizer: AdamW, warmup + cosine schedule, global-norm clipping
- Objective: per-batch composite loss with exact gradients
- Trainer: train / evaluate / predict
- Checkpoint: versioned, checksummed binary checkpoints
- Gradcheck: finite-difference verification of the whole objective
"""

from src.training.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from src.training.gradcheck import gradcheck
from src.training.trainer import evaluate, predict, train

__all__ = [
    'Checkpoint',
    'load_checkpoint',
    'save_checkpoint',
    'gradcheck',
    'train',
    'evaluate',
    'predict',
]
