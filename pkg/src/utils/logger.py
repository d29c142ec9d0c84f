"""
Logging Utility for arsrank

This module configures the centralized logging system. Every module asks
for a named logger at import time; all of them write to one file so a
training run, its checkpoints and any numerical abort can be traced in
order.

The log file lives in the directory named by ARSRANK_LOG_DIR (default
'logs/'). Log lines carry bracketed event tags ([TRAIN_STEP],
[EPOCH_END], [CHECKPOINT_SAVE], ...) so they are easy to grep.

Usage:
    from src.utils.logger import setup_logger

    logger = setup_logger("Trainer")
    logger.info("[EPOCH_END] epoch=1 loss=0.8123")
"""

import logging
import os

LOG_FORMAT = '%(asctime)s - [%(levelname)s] - %(name)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'
LOG_FILE_NAME = "arsrank.log"

# Root of the arsrank logger tree; module loggers are its children
ROOT_LOGGER_NAME = "arsrank"


def _root_logger() -> logging.Logger:
    root = logging.getLogger(ROOT_LOGGER_NAME)
    if root.handlers:
        return root

    root.setLevel(logging.INFO)
    root.propagate = False

    log_dir = os.getenv("ARSRANK_LOG_DIR", "logs")
    os.makedirs(log_dir, exist_ok=True)

    formatter = logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT)
    file_handler = logging.FileHandler(
        os.path.join(log_dir, LOG_FILE_NAME), encoding='utf-8'
    )
    file_handler.setFormatter(formatter)
    file_handler.setLevel(logging.INFO)
    root.addHandler(file_handler)
    return root


def setup_logger(name: str = "arsrank") -> logging.Logger:
    """
    Configures and returns a named logger writing to the shared log file.

    Args:
        name (str): The logger name (typically the module role, e.g. "Trainer").

    Returns:
        logging.Logger: Child of the 'arsrank' logger; handlers live on the
                        parent so repeated calls never duplicate output.

    Example:
        >>> logger = setup_logger("Dataset")
        >>> logger.info("[DATASET_LOAD] 3 items")
        2026-01-15 10:30:45 - [INFO] - arsrank.Dataset - [DATASET_LOAD] 3 items
    """
    _root_logger()
    if name == ROOT_LOGGER_NAME:
        return logging.getLogger(ROOT_LOGGER_NAME)
    return logging.getLogger(f"{ROOT_LOGGER_NAME}.{name}")


def set_verbosity(verbosity: int) -> None:
    """
    Mirrors log records to stderr when the CLI is run with -v / -vv.

    0 keeps the file handler only, 1 echoes INFO, 2 and above echoes DEBUG.
    """
    root = _root_logger()
    for handler in list(root.handlers):
        if getattr(handler, "_arsrank_console", False):
            root.removeHandler(handler)
    if verbosity <= 0:
        return

    level = logging.INFO if verbosity == 1 else logging.DEBUG
    console = logging.StreamHandler()
    console.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT))
    console.setLevel(level)
    console._arsrank_console = True
    root.addHandler(console)
    root.setLevel(min(root.level, level))
