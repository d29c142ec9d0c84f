"""
arsrank - Attentive Relevance Scoring for multiple-choice question answering

Trains a small scoring head over question/option embeddings with a
contrastive + dynamic relevance + variance-regularized objective, and ranks
candidate answers by relevance at inference time.
"""

__version__ = "1.0.0"
