"""
arsrank - Main Application Entry Point

Command-line interface for training and using Attentive Relevance Scoring
(ARS) models on multiple-choice questions.

Subcommands:
    train              Train a model; writes <checkpoint_dir>/last.ckpt (plus
                       best.ckpt when validating) and a JSONL metrics log
    eval               Accuracy (overall and per level) of a checkpoint on a
                       labeled split; prints a table and writes a JSON report
    predict            Prediction CSV for an unlabeled split
    gradcheck          Analytic vs finite-difference gradients of the full
                       objective on a tiny model
    synth              Write a synthetic dataset for desk-scale runs
    export-embeddings  Freeze a trained toy encoder into a precomputed store

Configuration precedence (lowest to highest):
    built-in defaults < JSON file given by --config < command-line flags
The seed additionally falls back to $ARSRANK_SEED when no layer sets it.

Usage:
    python setup_data.py
    python main.py train --config data/run.json
    python main.py eval --config data/run.json --checkpoint checkpoints/best.ckpt
    python main.py predict --config data/run.json --checkpoint checkpoints/last.ckpt \\
        --output predictions.csv
    python main.py gradcheck --seed 7

Exit codes:
    0  success
    1  configuration or checkpoint error (including a missing checkpoint)
    2  data error (malformed or invalid input files)
    3  numerical error (non-finite loss, failed gradcheck)
"""

import argparse
import json
import os
import sys
from dataclasses import fields
from typing import Callable, Optional

from colorama import just_fix_windows_console
from termcolor import colored

from src.data.dataset import LEVELS, QUESTION_ROLE, load_dataset, save_dataset, text_key
from src.data.synthetic import DEFAULT_PLANTED, synthesize_toy_dataset
from src.model.encoder import EmbeddingRecord, ToyEncoder, save_precomputed
from src.training.checkpoint import load_checkpoint
from src.training.gradcheck import TOLERANCE, gradcheck_config, gradcheck_seeds
from src.training.trainer import BEST_CHECKPOINT_NAME, CHECKPOINT_NAME, SCORERS, evaluate, predict, train
from src.utils.config import (
    RUN_CONFIG_HELP,
    RunConfig,
    config_help_lines,
    resolve_run_config,
    resolve_seed,
)
from src.utils.errors import CheckpointError, ConfigError, DataError, NumericalError
from src.utils.logger import set_verbosity, setup_logger

logger = setup_logger("CLI")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3
EXIT_INTERRUPTED = 130

DEFAULT_METRICS_NAME = "metrics.jsonl"
DEFAULT_PREDICTIONS = "predictions.csv"
DEFAULT_SYNTH_ITEMS = 500


# --- Output helpers ---

def _ok(message: str) -> None:
    print(colored(f"✅ {message}", "green"))


def _info(message: str) -> None:
    print(colored(message, "cyan"))


def _fail(message: str) -> None:
    print(colored(f"❌ Error: {message}", "red"), file=sys.stderr)


def _require(value: Optional[str], key: str, command: str) -> str:
    if not value:
        flag = "--" + key.replace("_", "-")
        raise ConfigError(f"'{command}' needs '{key}' (flag {flag} or the config file)")
    return value


# --- Config plumbing ---

def _flag_type(default) -> Callable:
    if isinstance(default, bool) or default is None:
        return str
    return type(default)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One flag per RunConfig key; every flag defaults to None so the file layer shows through."""
    parser.add_argument("--config", default=None, help="JSON run config file")
    for f in fields(RunConfig):
        if f.name == "verbosity":
            continue
        parser.add_argument(
            "--" + f.name.replace("_", "-"),
            dest=f.name,
            type=_flag_type(f.default),
            default=None,
            help=f"{RUN_CONFIG_HELP[f.name]} (default: {f.default})",
        )
    parser.add_argument("-v", "--verbose", dest="verbosity", action="count", default=None,
                        help="echo log records to the console (-vv for debug)")


def _run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
    cfg = resolve_run_config(args.config, overrides)
    set_verbosity(cfg.verbosity)
    cfg.to_train_config().validate()
    return cfg


# --- Commands ---

def cmd_train(args: argparse.Namespace) -> int:
    """Trains on `train_data` (validating on `valid_data` when given)."""
    cfg = _run_config(args)
    train_items = load_dataset(_require(cfg.train_data, "train_data", "train"))
    valid_items = load_dataset(cfg.valid_data) if cfg.valid_data else None
    resume = load_checkpoint(args.resume) if args.resume else None
    metrics_path = cfg.metrics_log or os.path.join(cfg.checkpoint_dir, DEFAULT_METRICS_NAME)

    _info(f"🧠 Training on {len(train_items)} items for {cfg.epochs} epochs (seed={cfg.seed})")
    result = train(
        cfg.to_train_config(),
        train_items,
        valid_items=valid_items,
        metrics_path=metrics_path,
        resume_from=resume,
        progress=True,
    )

    for row in result.history:
        valid = "-" if row["valid_accuracy"] is None else f"{row['valid_accuracy']:.4f}"
        print(f"  epoch {row['epoch']:>3}  loss {row['mean_loss']:.6f}  "
              f"train_acc {row['train_accuracy']:.4f}  valid_acc {valid}  tau {row['tau']:.4f}")
    _ok(f"Checkpoint: {os.path.join(cfg.checkpoint_dir, CHECKPOINT_NAME)} | metrics: {metrics_path} | "
        f"params: {result.model.parameter_count()}")
    if result.best_checkpoint is not None:
        best = result.best_checkpoint
        _ok(f"Best: {os.path.join(cfg.checkpoint_dir, BEST_CHECKPOINT_NAME)} (epoch {best.epoch}, "
            f"valid_acc {best.history[-1]['valid_accuracy']:.4f})")
    return EXIT_OK


def _format_report_table(report) -> list[str]:
    lines = [f"{'Level':<14}{'Correct':>9}{'Total':>8}{'Accuracy':>11}"]
    for level in LEVELS:
        row = report.per_level.get(level)
        if row:
            lines.append(f"{level:<14}{row['correct']:>9}{row['total']:>8}{row['accuracy']:>11.4f}")
    lines.append(f"{'Overall':<14}{report.correct:>9}{report.total:>8}{report.accuracy:>11.4f}")
    return lines


def cmd_eval(args: argparse.Namespace) -> int:
    """Evaluates a checkpoint on `test_data`; writes `report` (JSON)."""
    cfg = _run_config(args)
    checkpoint = load_checkpoint(_require(cfg.checkpoint, "checkpoint", "eval"))
    items = load_dataset(_require(cfg.test_data, "test_data", "eval"))
    model = checkpoint.to_model()
    report = evaluate(model, items, scorer=args.scorer)

    report_path = cfg.report or os.path.splitext(cfg.checkpoint)[0] + ".eval.json"
    directory = os.path.dirname(report_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)

    _info(f"📊 {args.scorer} scorer on {cfg.test_data} (params: {model.parameter_count()})")
    for line in _format_report_table(report):
        print("  " + line)
    _ok(f"Report written to {report_path}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    """Writes id,prediction,score_A..score_F for the (unlabeled) `test_data`."""
    cfg = _run_config(args)
    checkpoint = load_checkpoint(_require(cfg.checkpoint, "checkpoint", "predict"))
    items = load_dataset(_require(cfg.test_data, "test_data", "predict"), require_labels=False)
    output = cfg.output or DEFAULT_PREDICTIONS
    rows = predict(checkpoint, items, output)
    _ok(f"{rows} predictions written to {output}")
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    """Exit 0 iff every seed's max relative error is below the tolerance."""
    set_verbosity(args.verbosity or 0)
    first_seed = resolve_seed(args.seed)
    config = gradcheck_config(
        embed_dim=args.embed_dim, hidden_dim=args.hidden_dim, batch_size=args.batch_size
    )
    summary = gradcheck_seeds(config, range(first_seed, first_seed + args.seeds))

    for report in summary["reports"]:
        mark = "✅" if report["status"] == "pass" else "❌"
        print(f"{mark} seed {report['seed']}: max relative error {report['max_relative_error']:.3e}")
        for name, err in report["blocks"].items():
            print(f"     {name:<14} {err:.3e}")
    if summary["status"] == "pass":
        _ok(f"gradcheck passed (max {summary['max_relative_error']:.3e} < {TOLERANCE})")
        return EXIT_OK
    _fail(f"gradcheck failed (max {summary['max_relative_error']:.3e} >= {TOLERANCE})")
    logger.error(f"[GRADCHECK] failed: max_rel_err={summary['max_relative_error']:.3e}")
    return EXIT_NUMERICAL


def cmd_synth(args: argparse.Namespace) -> int:
    seed = resolve_seed(args.seed)
    items = synthesize_toy_dataset(args.n_items, seed, n_planted=args.planted)
    count = save_dataset(items, args.output)
    _ok(f"{count} synthetic items (seed={seed}) written to {args.output}")
    return EXIT_OK


def cmd_export_embeddings(args: argparse.Namespace) -> int:
    """Embeds every question and option of `test_data` with a toy checkpoint's encoder."""
    cfg = _run_config(args)
    checkpoint = load_checkpoint(_require(cfg.checkpoint, "checkpoint", "export-embeddings"))
    model = checkpoint.to_model()
    if not isinstance(model.encoder, ToyEncoder):
        raise ConfigError("export-embeddings needs a checkpoint trained with the toy backend")
    items = load_dataset(_require(cfg.test_data, "test_data", "export-embeddings"), require_labels=False)
    output = _require(cfg.output, "output", "export-embeddings")

    records = []
    for item in items:
        for role, text in [(QUESTION_ROLE, item.question)] + list(item.options.items()):
            key = text_key(item.id, role)
            records.append(EmbeddingRecord(key, model.encoder.embed(key, text).vector))
    directory = os.path.dirname(output)
    if directory:
        os.makedirs(directory, exist_ok=True)
    count = save_precomputed(records, output)
    _ok(f"{count} embeddings (d={model.encoder.embed_dim}) written to {output}")
    return EXIT_OK


# --- Parser ---

def build_parser() -> argparse.ArgumentParser:
    epilog = "Config keys (JSON file or --flag):\n" + "\n".join(config_help_lines())
    parser = argparse.ArgumentParser(
        prog="arsrank",
        description="arsrank - Attentive Relevance Scoring for multiple-choice QA",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="cmd", required=True)

    def add(name: str, func: Callable, help_text: str) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, help=help_text, epilog=epilog,
                                    formatter_class=argparse.RawDescriptionHelpFormatter)
        sub.set_defaults(func=func)
        return sub

    train_parser = add("train", cmd_train, "train a relevance model")
    _add_config_flags(train_parser)
    train_parser.add_argument("--resume", default=None, help="continue from this checkpoint")

    eval_parser = add("eval", cmd_eval, "evaluate a checkpoint on a labeled split")
    _add_config_flags(eval_parser)
    eval_parser.add_argument("--scorer", choices=SCORERS, default="ars",
                             help="ars head or raw cosine baseline (default: ars)")

    predict_parser = add("predict", cmd_predict, "write predictions for an unlabeled split")
    _add_config_flags(predict_parser)

    export_parser = add("export-embeddings", cmd_export_embeddings,
                        "freeze a toy encoder into a precomputed store")
    _add_config_flags(export_parser)

    grad_parser = add("gradcheck", cmd_gradcheck, "finite-difference check of all gradients")
    grad_parser.add_argument("--seed", type=int, default=None, help="first seed (default: $ARSRANK_SEED or 0)")
    grad_parser.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds (default: 1)")
    grad_parser.add_argument("--embed-dim", dest="embed_dim", type=int, default=4, help="d (default: 4, max 8)")
    grad_parser.add_argument("--hidden-dim", dest="hidden_dim", type=int, default=4, help="h (default: 4, max 8)")
    grad_parser.add_argument("--batch-size", dest="batch_size", type=int, default=2, help="B (default: 2, max 4)")
    grad_parser.add_argument("-v", "--verbose", dest="verbosity", action="count", default=None)

    synth_parser = add("synth", cmd_synth, "write a synthetic dataset")
    synth_parser.add_argument("--output", required=True, help="JSONL file to write")
    synth_parser.add_argument("--n-items", dest="n_items", type=int, default=DEFAULT_SYNTH_ITEMS,
                              help=f"number of items (default: {DEFAULT_SYNTH_ITEMS})")
    synth_parser.add_argument("--seed", type=int, default=None, help="seed (default: $ARSRANK_SEED or 0)")
    synth_parser.add_argument("--planted", type=int, default=DEFAULT_PLANTED,
                              help=f"tokens shared by question and answer (default: {DEFAULT_PLANTED})")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """
    Parses ``argv`` (default: sys.argv[1:]), runs the subcommand and maps
    library errors onto exit codes.
    """
    just_fix_windows_console()
    args = build_parser().parse_args(argv)
    logger.info(f"=== arsrank {args.cmd} starting ===")

    try:
        code = args.func(args)
    except (ConfigError, CheckpointError) as e:
        _fail(str(e))
        logger.error(f"[CONFIG_ERROR] {args.cmd}: {e}")
        return EXIT_CONFIG
    except DataError as e:
        _fail(str(e))
        logger.error(f"[DATA_ERROR] {args.cmd}: {e}")
        return EXIT_DATA
    except OSError as e:
        # unreadable or missing input files
        _fail(str(e))
        logger.error(f"[DATA_ERROR] {args.cmd}: {e}")
        return EXIT_DATA
    except NumericalError as e:
        _fail(str(e))
        logger.error(f"[NUMERICAL_ABORT] {args.cmd}: {e}")
        return EXIT_NUMERICAL
    except KeyboardInterrupt:
        print("\n⚠️  Interrupted by user.")
        logger.info(f"{args.cmd} interrupted by user")
        return EXIT_INTERRUPTED

    logger.info(f"=== arsrank {args.cmd} finished (exit {code}) ===")
    return code


if __name__ == "__main__":
    sys.exit(main())
