"""
Configuration Module for arsrank

This module owns every tunable of a run and the rules for resolving them.

Sources, lowest to highest precedence:
    1. Dataclass defaults (documented in `--help`)
    2. JSON config file (`--config run.json`); unknown keys are rejected
    3. Command-line flags

The seed has one more fallback: when neither the file nor a flag sets it,
the ARSRANK_SEED environment variable is used (a .env file in the project
root is loaded at import), then 0.

Usage:
    from src.utils.config import resolve_run_config
    cfg = resolve_run_config("run.json", {"epochs": 3})
    train_cfg = cfg.to_train_config()
"""

import json
import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Mapping, Optional

from dotenv import load_dotenv

from src.utils.errors import ConfigError

# Load environment variables from .env file in the project root
load_dotenv()

SEED_ENV_VAR = "ARSRANK_SEED"
BACKENDS = ("toy", "precomputed")


@dataclass
class TrainConfig:
    """Everything `train` needs besides the data; echoed into checkpoints."""

    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    # Composite objective weights
    alpha: float = 0.4
    beta: float = 0.4
    gamma: float = 0.2
    # L_reg stops rewarding a logit set once its std reaches this (None: never)
    reg_std_cap: Optional[float] = 1.0
    # Model shape
    hidden_dim: int = 256
    embed_dim: int = 64
    vocab_size: int = 65536
    backend: str = "toy"
    embedding_store: Optional[str] = None
    toy_init_scale: float = 0.05
    init_temperature: float = 0.07
    # AdamW + schedule
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.01
    warmup_fraction: float = 0.10
    min_lr: float = 0.0
    max_grad_norm: float = 0.5
    checkpoint_dir: str = "checkpoints"

    def validate(self) -> "TrainConfig":
        """Raises ConfigError on the first violated constraint; returns self."""
        positive_ints = ("epochs", "batch_size", "hidden_dim", "embed_dim", "vocab_size")
        for name in positive_ints:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"'{name}' must be a positive integer, got {value!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"'seed' must be a nonnegative integer, got {self.seed!r}")
        for name in ("alpha", "beta", "gamma", "weight_decay", "min_lr", "lr"):
            if getattr(self, name) < 0:
                raise ConfigError(f"'{name}' must be nonnegative")
        if not 0.0 < self.warmup_fraction < 1.0:
            raise ConfigError("'warmup_fraction' must lie in (0, 1)")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ConfigError("'beta1' and 'beta2' must lie in [0, 1)")
        if self.adam_eps <= 0 or self.max_grad_norm <= 0 or self.toy_init_scale <= 0:
            raise ConfigError("'adam_eps', 'max_grad_norm' and 'toy_init_scale' must be positive")
        if self.reg_std_cap is not None and not self.reg_std_cap > 0:
            raise ConfigError(f"'reg_std_cap' must be positive or null, got {self.reg_std_cap!r}")
        if not 1e-3 <= self.init_temperature <= 10.0:
            raise ConfigError("'init_temperature' must lie in [1e-3, 10]")
        if self.backend not in BACKENDS:
            raise ConfigError(f"'backend' must be one of {BACKENDS}, got {self.backend!r}")
        if self.backend == "precomputed" and not self.embedding_store:
            raise ConfigError("backend 'precomputed' requires 'embedding_store'")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown TrainConfig keys: {', '.join(unknown)}")
        return cls(**dict(data))


@dataclass
class RunConfig(TrainConfig):
    """TrainConfig plus the file paths and verbosity of one CLI invocation."""

    train_data: Optional[str] = None
    valid_data: Optional[str] = None
    test_data: Optional[str] = None
    checkpoint: Optional[str] = None
    output: Optional[str] = None
    metrics_log: Optional[str] = None
    report: Optional[str] = None
    verbosity: int = 0

    def to_train_config(self) -> TrainConfig:
        train_keys = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in asdict(self).items() if k in train_keys})


RUN_CONFIG_HELP = {
    "epochs": "training epochs",
    "batch_size": "items per batch (B)",
    "seed": f"master seed (fallback: ${SEED_ENV_VAR}, then 0)",
    "alpha": "weight of the contrastive loss",
    "beta": "weight of the dynamic relevance loss",
    "gamma": "weight of the logit-variance regularizer",
    "reg_std_cap": "logit std past which the regularizer is flat (null: uncapped)",
    "hidden_dim": "shared latent dimension h of the scoring head",
    "embed_dim": "embedding dimension d",
    "vocab_size": "hash buckets V of the toy encoder",
    "backend": "encoder backend: toy | precomputed",
    "embedding_store": "JSONL embedding store (precomputed backend)",
    "toy_init_scale": "toy table init range (+/-)",
    "init_temperature": "initial contrastive temperature tau",
    "lr": "peak learning rate",
    "beta1": "AdamW first-moment decay",
    "beta2": "AdamW second-moment decay",
    "adam_eps": "AdamW epsilon",
    "weight_decay": "decoupled weight decay (temperature excluded)",
    "warmup_fraction": "fraction of steps spent in linear warmup",
    "min_lr": "learning rate at the end of the cosine decay",
    "max_grad_norm": "global gradient-norm clipping threshold",
    "checkpoint_dir": "directory for checkpoints written by train",
    "train_data": "labeled training JSONL",
    "valid_data": "labeled validation JSONL",
    "test_data": "dataset for eval / predict",
    "checkpoint": "checkpoint file to read (eval/predict/export)",
    "output": "output path (predict CSV, synth JSONL, exported store)",
    "metrics_log": "JSONL metrics log written by train",
    "report": "JSON report written by eval",
    "verbosity": "console log level (0 = file only)",
}


def config_help_lines() -> list[str]:
    """One line per config key with its default, for `--help` epilogs."""
    lines = []
    for f in fields(RunConfig):
        default = f.default if f.default is not None else "null"
        lines.append(f"  {f.name:<18} {RUN_CONFIG_HELP.get(f.name, '')} (default: {default})")
    return lines


def read_config_file(path: str) -> dict:
    """
    Reads a JSON run config file into a plain dict.

    Raises:
        ConfigError: file not found, invalid JSON, non-object root or
                     unknown keys.
    """
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in config file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")

    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {', '.join(unknown)}")
    return data


def resolve_run_config(path: Optional[str], overrides: Mapping[str, Any]) -> RunConfig:
    """
    Layers defaults < config file < flags (None-valued flags are ignored).

    The seed falls back to $ARSRANK_SEED when neither layer sets it.
    """
    values: dict = read_config_file(path) if path else {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in RUN_CONFIG_HELP:
            raise ConfigError(f"unknown config key: {key}")
        values[key] = value
    if "seed" not in values:
        values["seed"] = resolve_seed(None)
    return RunConfig(**values)


def resolve_seed(explicit: Optional[int]) -> int:
    """
    Seed precedence: explicit value, then $ARSRANK_SEED, then 0.

    Raises:
        ConfigError: If ARSRANK_SEED is set but not an integer.
    """
    if explicit is not None:
        return int(explicit)
    raw = os.getenv(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from e
