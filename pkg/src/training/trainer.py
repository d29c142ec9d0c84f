"""
Trainer for arsrank

Orchestrates the full lifecycle of a relevance model:

    train     - epochs of (encode, score, L_total, backprop, clip, AdamW at
                the scheduled lr), per-step and per-epoch metrics, one
                checkpoint per epoch plus the best-validation checkpoint
    evaluate  - argmax option selection, overall and per-level accuracy
    predict   - CSV of predicted letters and per-option scores for
                unlabeled items

Determinism:
    With a fixed seed every random draw comes from a named stream
    (src.utils.seeding), reductions run in a fixed order and the metrics log
    carries no wall-clock fields, so two runs produce byte-identical
    checkpoints and metrics logs.

Usage:
    from src.training.trainer import train, evaluate

    result = train(config, train_items, metrics_path="logs/metrics.jsonl")
    report = evaluate(result.checkpoint, valid_items)
    print(report.accuracy)
"""

import copy
import csv
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Optional, Union

from tqdm import tqdm

from src.data.dataset import LEVELS, OPTION_LETTERS, McqItem, make_batches
from src.model.ars_head import select_option
from src.model.losses import LossWeights
from src.model.relevance_model import RelevanceModel
from src.training.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from src.training.objective import batch_objective, sample_dynamic_negatives
from src.training.optimizer import AdamWState, ScheduleConfig, adamw_step, clip_global_norm, lr_at
from src.utils.config import TrainConfig
from src.utils.errors import ConfigError, EmptyDataset, NonFiniteLoss, ValidationError
from src.utils.logger import setup_logger
from src.utils.seeding import named_rng

logger = setup_logger("Trainer")

CHECKPOINT_NAME = "last.ckpt"
BEST_CHECKPOINT_NAME = "best.ckpt"
SCORERS = ("ars", "cosine")


# --- Reports ---

@dataclass
class ItemPrediction:
    id: str
    level: str
    label: Optional[str]
    predicted: str
    scores: dict     # letter -> relevance score r (or cosine for the baseline)
    logits: dict     # letter -> logit s

    @property
    def correct(self) -> bool:
        return self.label is not None and self.predicted == self.label


@dataclass
class EvalReport:
    accuracy: float
    correct: int
    total: int
    per_level: dict          # level -> {"correct", "total", "accuracy"}
    predictions: list = field(default_factory=list)
    scorer: str = "ars"

    def to_dict(self) -> dict:
        return {
            "scorer": self.scorer,
            "accuracy": self.accuracy,
            "correct": self.correct,
            "total": self.total,
            "per_level": self.per_level,
            "predictions": [
                {
                    "id": p.id, "level": p.level, "label": p.label, "predicted": p.predicted,
                    "scores": p.scores, "logits": p.logits,
                }
                for p in self.predictions
            ],
        }

    def recombined_accuracy(self) -> Fraction:
        """Per-level accuracies weighted by level counts, in exact arithmetic."""
        total = sum(row["total"] for row in self.per_level.values())
        weighted = sum(Fraction(row["correct"], row["total"]) * row["total"] for row in self.per_level.values())
        return weighted / total


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list            # one dict per epoch
    model: RelevanceModel
    best_checkpoint: Optional[Checkpoint] = None   # highest valid_accuracy, earliest on ties


# --- Training ---

def _write_metric(stream: Optional[IO], record: dict) -> None:
    if stream is not None:
        stream.write(json.dumps(record, sort_keys=True) + "\n")


def train(
    config: TrainConfig,
    items: list[McqItem],
    valid_items: Optional[list[McqItem]] = None,
    metrics_path: Optional[str] = None,
    resume_from: Optional[Checkpoint] = None,
    stop_after_epoch: Optional[int] = None,
    progress: bool = False,
) -> TrainResult:
    """
    Trains a relevance model on labeled ``items``.

    Args:
        config: Validated TrainConfig.
        items: Labeled training items.
        valid_items: Optional labeled split whose accuracy is logged per epoch.
        metrics_path: JSONL file receiving one "step" record per optimizer
                      step and one "epoch" record per epoch (appended when
                      resuming, truncated otherwise).
        resume_from: Checkpoint written by a previous run with the same config.
        stop_after_epoch: Stop once this many epochs are complete (the
                          schedule still spans config.epochs).
        progress: Show a tqdm bar per epoch.

    Returns:
        TrainResult with the final checkpoint (also saved to
        <checkpoint_dir>/last.ckpt after every epoch) and the epoch history.
        With valid_items, every epoch that raises the best validation
        accuracy so far is also saved to <checkpoint_dir>/best.ckpt and
        returned as best_checkpoint.

    Raises:
        NonFiniteLoss: a batch produced a NaN/Inf loss; its item ids are named.
    """
    config.validate()
    if not items:
        raise EmptyDataset("training set is empty")
    weights = LossWeights(config.alpha, config.beta, config.gamma)
    steps_per_epoch = math.ceil(len(items) / config.batch_size)
    schedule = ScheduleConfig(
        total_steps=config.epochs * steps_per_epoch,
        warmup_fraction=config.warmup_fraction,
        min_lr=config.min_lr,
        base_lr=config.lr,
    )

    if resume_from is not None:
        if resume_from.config != config:
            raise ConfigError("resume checkpoint was written with a different configuration")
        model = resume_from.to_model()
        state = copy.deepcopy(resume_from.optimizer)
        start_epoch, global_step = resume_from.epoch, resume_from.step
        history = [dict(row) for row in resume_from.history]
    else:
        model = RelevanceModel.initialize(config)
        state = AdamWState(
            lr0=config.lr, beta1=config.beta1, beta2=config.beta2,
            eps=config.adam_eps, weight_decay=config.weight_decay,
        )
        start_epoch, global_step, history = 0, 0, []

    last_epoch = config.epochs if stop_after_epoch is None else min(config.epochs, stop_after_epoch)
    checkpoint_path = os.path.join(config.checkpoint_dir, CHECKPOINT_NAME)
    best_path = os.path.join(config.checkpoint_dir, BEST_CHECKPOINT_NAME)
    best_checkpoint, best_accuracy = None, -1.0
    if resume_from is not None and valid_items:
        seen = [row["valid_accuracy"] for row in history if row["valid_accuracy"] is not None]
        best_accuracy = max(seen, default=-1.0)
        if os.path.exists(best_path):
            best_checkpoint = load_checkpoint(best_path)
    params = model.named_parameters()
    logger.info(
        f"[TRAIN_START] items={len(items)} epochs={config.epochs} batch_size={config.batch_size} "
        f"steps={schedule.total_steps} params={model.parameter_count()} backend={config.backend} "
        f"resume_epoch={start_epoch}"
    )

    metrics_stream = None
    if metrics_path:
        directory = os.path.dirname(metrics_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        metrics_stream = open(metrics_path, "a" if resume_from is not None else "w", encoding="utf-8")

    checkpoint = resume_from
    try:
        for epoch in range(start_epoch, last_epoch):
            batches = make_batches(items, config.batch_size, config.seed, epoch)
            dyn_rng = named_rng(config.seed, "dynamic_negatives", epoch)
            epoch_loss = 0.0

            for batch in tqdm(batches, desc=f"epoch {epoch + 1}/{config.epochs}", disable=not progress, leave=False):
                dyn_negatives = sample_dynamic_negatives(batch, dyn_rng)
                objective = batch_objective(model, batch, dyn_negatives, weights, reg_std_cap=config.reg_std_cap)
                if not all(math.isfinite(v) for v in (objective.total, objective.contrastive,
                                                      objective.dynamic, objective.regularization)):
                    logger.error(f"[NUMERICAL_ABORT] step={global_step} loss={objective.total} ids={batch.ids}")
                    raise NonFiniteLoss(f"non-finite loss at step {global_step}", batch.ids)

                grads, grad_norm = clip_global_norm(objective.grads, config.max_grad_norm)
                lr = lr_at(global_step, schedule)
                adamw_step(params, grads, state, lr)
                model.temperature.clamp_()

                _write_metric(metrics_stream, {
                    "event": "step", "epoch": epoch + 1, "step": global_step, "lr": lr,
                    "loss": objective.total, "l_cons": objective.contrastive,
                    "l_dyn": objective.dynamic, "l_reg": objective.regularization,
                    "grad_norm": grad_norm, "tau": model.temperature.tau,
                })
                logger.debug(f"[TRAIN_STEP] step={global_step} lr={lr:.3e} loss={objective.total:.6f} |g|={grad_norm:.4f}")
                epoch_loss += objective.total * len(batch)
                global_step += 1

            row = {
                "event": "epoch",
                "epoch": epoch + 1,
                "step": global_step,
                "mean_loss": epoch_loss / len(items),
                "train_accuracy": evaluate(model, items).accuracy,
                "valid_accuracy": evaluate(model, valid_items).accuracy if valid_items else None,
                "tau": model.temperature.tau,
            }
            history.append(row)
            _write_metric(metrics_stream, row)
            logger.info(
                f"[EPOCH_END] epoch={row['epoch']} mean_loss={row['mean_loss']:.6f} "
                f"train_acc={row['train_accuracy']:.4f} valid_acc={row['valid_accuracy']}"
            )

            checkpoint = Checkpoint.capture(model, config, state, global_step, epoch + 1, history)
            save_checkpoint(checkpoint, checkpoint_path)
            if row["valid_accuracy"] is not None and row["valid_accuracy"] > best_accuracy:
                best_accuracy, best_checkpoint = row["valid_accuracy"], checkpoint
                save_checkpoint(checkpoint, best_path)
                logger.info(f"[BEST] epoch={row['epoch']} valid_acc={best_accuracy:.4f}")
    finally:
        if metrics_stream is not None:
            metrics_stream.close()

    if checkpoint is None:
        checkpoint = Checkpoint.capture(model, config, state, global_step, start_epoch, history)
    logger.info(f"[TRAIN_END] steps={global_step} epochs_done={checkpoint.epoch}")
    return TrainResult(checkpoint=checkpoint, history=history, model=model, best_checkpoint=best_checkpoint)


# --- Evaluation ---

def _as_model(source: Union[RelevanceModel, Checkpoint]) -> RelevanceModel:
    return source.to_model() if isinstance(source, Checkpoint) else source


def _predict_item(model: RelevanceModel, item: McqItem, scorer: str) -> ItemPrediction:
    scored = model.score_item(item) if scorer == "ars" else model.cosine_item(item)
    # logits are strictly monotone in the scores and never saturate
    predicted = select_option(scored.logits, scored.letters)
    return ItemPrediction(
        id=item.id,
        level=item.level,
        label=item.label,
        predicted=predicted,
        scores=dict(zip(scored.letters, scored.scores)),
        logits=dict(zip(scored.letters, scored.logits)),
    )


def evaluate(
    source: Union[RelevanceModel, Checkpoint], items: list[McqItem], scorer: str = "ars"
) -> EvalReport:
    """
    Accuracy of argmax option selection (earliest letter wins ties).

    Args:
        source: A model or a checkpoint to rebuild one from.
        items: Labeled items.
        scorer: "ars" (the trained head) or "cosine" (embedding similarity
                baseline, no head).

    Raises:
        EmptyDataset / ValidationError: no items, or an unlabeled item.
        DimensionMismatch: checkpoint d differs from the backend's d.
    """
    if scorer not in SCORERS:
        raise ValueError(f"scorer must be one of {SCORERS}, got {scorer!r}")
    if not items:
        raise EmptyDataset("cannot evaluate an empty dataset")
    model = _as_model(source)

    predictions = []
    for item in items:
        if item.label is None:
            raise ValidationError("evaluation requires labeled items", item.id)
        predictions.append(_predict_item(model, item, scorer))

    per_level = {}
    for level in LEVELS:
        level_preds = [p for p in predictions if p.level == level]
        if level_preds:
            correct = sum(p.correct for p in level_preds)
            per_level[level] = {"correct": correct, "total": len(level_preds), "accuracy": correct / len(level_preds)}

    correct = sum(p.correct for p in predictions)
    return EvalReport(
        accuracy=correct / len(predictions),
        correct=correct,
        total=len(predictions),
        per_level=per_level,
        predictions=predictions,
        scorer=scorer,
    )


def predict(source: Union[RelevanceModel, Checkpoint], items: list[McqItem], output_path: str) -> int:
    """
    Writes "id,prediction,score_A,...,score_F" (blank for absent options).

    Scores are sigmoid relevance scores written with full float64 precision.
    Returns the number of rows written.
    """
    model = _as_model(source)
    directory = os.path.dirname(output_path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    with open(output_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["id", "prediction"] + [f"score_{letter}" for letter in OPTION_LETTERS])
        for item in items:
            pred = _predict_item(model, item, "ars")
            writer.writerow(
                [item.id, pred.predicted]
                + [repr(pred.scores[letter]) if letter in pred.scores else "" for letter in OPTION_LETTERS]
            )
    logger.info(f"[PREDICT] {output_path}: {len(items)} rows")
    return len(items)
