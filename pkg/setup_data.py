"""
arsrank Data Layer Initialization Script

This script prepares everything a first training run needs under data/:
1. Synthetic splits (JSONL) - train / valid / test, labeled, plus an
   unlabeled copy of the test split for `predict`
2. Sample items (JSONL) - a few hand-written inheritance questions showing
   the canonical format with Arabic text kept verbatim
3. Run config (JSON) - a desk-scale configuration for the toy encoder

Usage:
    python setup_data.py
    python setup_data.py --seed 3 --n-train 500

Then:
    python main.py train --config data/run.json
"""

import argparse
import json
import os

from src.data.dataset import McqItem, save_dataset, validate_item
from src.data.synthetic import synthesize_toy_dataset
from src.utils.config import resolve_seed

# --- CONFIGURATION ---
DATA_DIR = "data"
TRAIN_FILE = os.path.join(DATA_DIR, "train.jsonl")
VALID_FILE = os.path.join(DATA_DIR, "valid.jsonl")
TEST_FILE = os.path.join(DATA_DIR, "test.jsonl")
TEST_UNLABELED_FILE = os.path.join(DATA_DIR, "test_unlabeled.jsonl")
SAMPLE_FILE = os.path.join(DATA_DIR, "sample_items.jsonl")
RUN_CONFIG_FILE = os.path.join(DATA_DIR, "run.json")

# Desk-scale recipe for the toy encoder: a small embedding, the full head,
# default loss weights with the logit-std cap; evaluate checkpoints/best.ckpt
RUN_CONFIG = {
    "epochs": 20,
    "batch_size": 16,
    "embed_dim": 16,
    "hidden_dim": 256,
    "lr": 2e-3,
    "reg_std_cap": 1.0,
    "backend": "toy",
    "checkpoint_dir": "checkpoints",
    "train_data": TRAIN_FILE,
    "valid_data": VALID_FILE,
    "test_data": TEST_FILE,
    "metrics_log": os.path.join("checkpoints", "metrics.jsonl"),
    "report": os.path.join("checkpoints", "eval_report.json"),
}


# --- 1. SYNTHETIC SPLITS ---
def create_synthetic_splits(seed: int, n_train: int, n_valid: int, n_test: int) -> None:
    """
    Draws one synthetic pool and cuts it into disjoint splits, so held-out
    items never repeat a training question.
    """
    items = synthesize_toy_dataset(n_train + n_valid + n_test, seed)
    train_items = items[:n_train]
    valid_items = items[n_train:n_train + n_valid]
    test_items = items[n_train + n_valid:]

    save_dataset(train_items, TRAIN_FILE)
    save_dataset(valid_items, VALID_FILE)
    save_dataset(test_items, TEST_FILE)
    unlabeled = [
        McqItem(id=i.id, question=i.question, options=i.options, label=None, level=i.level)
        for i in test_items
    ]
    save_dataset(unlabeled, TEST_UNLABELED_FILE)
    print(f"✅ [OK] Synthetic splits (seed={seed}): "
          f"{TRAIN_FILE} ({n_train}), {VALID_FILE} ({n_valid}), {TEST_FILE} ({n_test})")
    print(f"✅ [OK] Unlabeled test split: {TEST_UNLABELED_FILE}")


# --- 2. SAMPLE ITEMS ---
def create_sample_items() -> None:
    """
    Writes three hand-written inheritance questions, one per level.

    They document the canonical record layout; the synthetic splits are
    what the acceptance runs train on.
    """
    samples = [
        McqItem(
            id="sample-001",
            question="توفي رجل عن زوجة وابن. ما نصيب الزوجة؟",
            options={"A": "الربع", "B": "الثمن", "C": "النصف", "D": "السدس"},
            label="B",
            level="Beginner",
        ),
        McqItem(
            id="sample-002",
            question="A woman died leaving her husband, her mother and a full brother. What is the mother's share?",
            options={
                "A": "One sixth",
                "B": "One third",
                "C": "One half",
                "D": "The residue",
                "E": "Nothing",
            },
            label="B",
            level="Intermediate",
        ),
        McqItem(
            id="sample-003",
            question="A man died leaving a wife, two daughters, his father and his mother. What is the base of the case after adjustment?",
            options={
                "A": "24",
                "B": "27",
                "C": "12",
                "D": "8",
                "E": "6",
                "F": "13",
            },
            label="B",
            level="Advanced",
        ),
    ]
    save_dataset([validate_item(item) for item in samples], SAMPLE_FILE)
    print(f"✅ [OK] Sample items created: {SAMPLE_FILE}")


# --- 3. RUN CONFIG ---
def create_run_config(seed: int) -> None:
    with open(RUN_CONFIG_FILE, 'w', encoding='utf-8') as f:
        json.dump({**RUN_CONFIG, "seed": seed}, f, indent=4, sort_keys=True)
    print(f"✅ [OK] Run config created: {RUN_CONFIG_FILE}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Create the arsrank data/ directory")
    parser.add_argument("--seed", type=int, default=None, help="seed (default: $ARSRANK_SEED or 0)")
    parser.add_argument("--n-train", dest="n_train", type=int, default=500)
    parser.add_argument("--n-valid", dest="n_valid", type=int, default=100)
    parser.add_argument("--n-test", dest="n_test", type=int, default=100)
    args = parser.parse_args()

    os.makedirs(DATA_DIR, exist_ok=True)
    seed = resolve_seed(args.seed)

    print("=" * 60)
    print("📚 arsrank Data Layer Initialization")
    print("=" * 60)

    create_synthetic_splits(seed, args.n_train, args.n_valid, args.n_test)
    create_sample_items()
    create_run_config(seed)

    print("=" * 60)
    print("✅ Setup Complete - run: python main.py train --config data/run.json")
    print("   then: python main.py eval --config data/run.json --checkpoint checkpoints/best.ckpt")
    print("=" * 60)
