"""
Error Hierarchy for arsrank

Every failure raised by the library derives from ArsRankError. The four
category bases decide the CLI exit code:

    ConfigError / CheckpointError -> exit 1
    DataError                     -> exit 2
    NumericalError                -> exit 3

Usage:
    from src.utils.errors import DimensionMismatch
    raise DimensionMismatch(f"expected d={d}, got {len(vec)}")
"""


class ArsRankError(Exception):
    """Base class for all arsrank errors."""


# --- Categories ---

class ConfigError(ArsRankError):
    """Invalid or missing configuration."""


class DataError(ArsRankError):
    """Malformed or inconsistent input data."""


class NumericalError(ArsRankError):
    """Non-finite or out-of-range numerical state."""


class CheckpointError(ArsRankError):
    """Unreadable, corrupted or incompatible checkpoint."""


# --- Encoder ---

class EmptyInput(DataError):
    pass


class DegenerateNorm(NumericalError):
    pass


class FormatError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionMismatch(DataError):
    pass


class DuplicateKey(DataError):
    pass


class KeyNotFound(DataError):
    pass


# --- ARS head / losses ---

class EmptyCandidates(DataError):
    pass


class NegativeCountMismatch(DataError):
    pass


class ScoreOutOfRange(NumericalError):
    pass


# --- Optimizer ---

class NonFiniteGradient(NumericalError):
    pass


class StepOutOfRange(ConfigError):
    pass


class ShapeMismatch(CheckpointError):
    pass


# --- Dataset ---

class EmptyDataset(DataError):
    pass


class ValidationError(DataError):
    def __init__(self, message: str, item_id: str | None = None):
        self.item_id = item_id
        if item_id is not None:
            message = f"item '{item_id}': {message}"
        super().__init__(message)


# --- Trainer / checkpoints ---

class NonFiniteLoss(NumericalError):
    def __init__(self, message: str, batch_ids: list[str] | None = None):
        self.batch_ids = list(batch_ids or [])
        if self.batch_ids:
            message = f"{message} | batch ids: {', '.join(self.batch_ids)}"
        super().__init__(message)


class ChecksumMismatch(CheckpointError):
    pass


class VersionMismatch(CheckpointError):
    pass
