"""
arsrank Data Package

- Dataset: canonical JSONL loader/writer, validation, batching, field-mapping adapter
- Synthetic: seeded toy items for learnability runs
"""

from src.data.dataset import (
    McqItem,
    FieldMapping,
    load_dataset,
    load_unlabeled_dataset,
    load_with_mapping,
    make_batches,
    save_dataset,
)
from src.data.synthetic import synthesize_toy_dataset

__all__ = [
    'McqItem',
    'FieldMapping',
    'load_dataset',
    'load_unlabeled_dataset',
    'load_with_mapping',
    'make_batches',
    'save_dataset',
    'synthesize_toy_dataset',
]
