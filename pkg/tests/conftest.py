"""Shared fixtures: tiny configs, synthetic items and file writers."""

import json
import os
import tempfile

# module loggers open their file handler at import time
os.environ.setdefault("ARSRANK_LOG_DIR", tempfile.mkdtemp(prefix="arsrank-logs-"))

import numpy as np
import pytest

from src.data.synthetic import synthesize_toy_dataset
from src.utils.config import TrainConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config(tmp_path):
    """Two quick epochs on a small head and table."""
    return TrainConfig(
        epochs=2,
        batch_size=8,
        seed=3,
        hidden_dim=16,
        embed_dim=8,
        vocab_size=512,
        lr=1e-3,
        checkpoint_dir=str(tmp_path / "checkpoints"),
    )


@pytest.fixture
def synthetic_items():
    return synthesize_toy_dataset(24, seed=5)


@pytest.fixture
def write_jsonl(tmp_path):
    """Writes a list of records (dicts or raw strings) as JSON Lines; returns the path."""

    def _write(name, records):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as f:
            for record in records:
                line = record if isinstance(record, str) else json.dumps(record, ensure_ascii=False)
                f.write(line + "\n")
        return str(path)

    return _write

