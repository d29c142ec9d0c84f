"""
Multiple-Choice Dataset for arsrank

Loads, validates, saves and batches multiple-choice items (Arabic
inheritance questions: up to six options A-F, one correct, three
difficulty levels).

Canonical format (UTF-8 JSON Lines, text preserved verbatim):
    {"id": "q-17", "question": "...", "options": {"A": "...", ..., "F": "..."},
     "label": "C", "level": "Beginner"}

"label" may be omitted only when loading with ``require_labels=False`` (the
unlabeled test split read by `predict`).

Third-party files are converted through a FieldMapping (see
load_with_mapping) so the rest of the pipeline only ever sees McqItems.

Usage:
    from src.data.dataset import load_dataset, make_batches

    items = load_dataset("data/train.jsonl")
    for batch in make_batches(items, batch_size=32, seed=7):
        ...
"""

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from src.utils.errors import EmptyDataset, FormatError, ValidationError
from src.utils.logger import setup_logger
from src.utils.seeding import named_rng

logger = setup_logger("Dataset")

OPTION_LETTERS = ("A", "B", "C", "D", "E", "F")
LEVELS = ("Beginner", "Intermediate", "Advanced")
MIN_OPTIONS = 2
NUM_CONTRASTIVE_NEGATIVES = 5
QUESTION_ROLE = "q"


def text_key(item_id: str, role: str) -> str:
    """Embedding-store key of a text: "<item_id>:q" or "<item_id>:<letter>"."""
    return f"{item_id}:{role}"


@dataclass(frozen=True)
class McqItem:
    id: str
    question: str
    options: Mapping[str, str]
    label: Optional[str]
    level: str

    @property
    def incorrect_letters(self) -> list[str]:
        return [letter for letter in self.options if letter != self.label]

    def to_record(self) -> dict:
        record = {"id": self.id, "question": self.question, "options": dict(self.options)}
        if self.label is not None:
            record["label"] = self.label
        record["level"] = self.level
        return record


@dataclass(frozen=True)
class BatchEntry:
    """One item of a batch with its positive and five contrastive negatives."""

    item: McqItem
    positive: str                  # option letter
    negatives: tuple[str, ...]     # exactly five letters, resampled if needed


@dataclass(frozen=True)
class TrainBatch:
    entries: tuple[BatchEntry, ...]

    @property
    def ids(self) -> list[str]:
        return [entry.item.id for entry in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


# --- Validation ---

def validate_item(item: McqItem, require_label: bool = True) -> McqItem:
    """
    Raises ValidationError naming the violated invariant and item id.

    Invariants: 2 <= |options| <= 6; letters from A-F, strictly increasing;
    label present among the options; level known; option texts nonempty;
    no incorrect option repeats the correct option's text.
    """
    letters = list(item.options)
    if not MIN_OPTIONS <= len(letters) <= len(OPTION_LETTERS):
        raise ValidationError(f"expected 2 to 6 options, found {len(letters)}", item.id)
    if any(letter not in OPTION_LETTERS for letter in letters):
        raise ValidationError(f"option letters must be within A-F, found {letters}", item.id)
    order = [OPTION_LETTERS.index(letter) for letter in letters]
    if any(b <= a for a, b in zip(order, order[1:])):
        raise ValidationError(f"option letters must be strictly increasing, found {letters}", item.id)
    for letter, text in item.options.items():
        if not isinstance(text, str) or not text.strip():
            raise ValidationError(f"option {letter} has empty text", item.id)
    if not isinstance(item.question, str) or not item.question.strip():
        raise ValidationError("question text is empty", item.id)
    if item.level not in LEVELS:
        raise ValidationError(f"level must be one of {LEVELS}, found {item.level!r}", item.id)
    if item.label is None:
        if require_label:
            raise ValidationError("label is missing", item.id)
        return item
    if item.label not in item.options:
        raise ValidationError(f"label {item.label!r} is not among the options {letters}", item.id)
    positive = item.options[item.label]
    for letter in item.incorrect_letters:
        if item.options[letter] == positive:
            raise ValidationError(f"incorrect option {letter} repeats the correct option's text", item.id)
    return item


def _item_from_record(record, line: int) -> McqItem:
    if not isinstance(record, dict):
        raise FormatError("record must be a JSON object", line=line)
    for key in ("id", "question", "options", "level"):
        if key not in record:
            raise FormatError(f"missing field '{key}'", line=line)
    unknown = sorted(set(record) - {"id", "question", "options", "label", "level"})
    if unknown:
        raise FormatError(f"unknown fields {unknown}", line=line)
    if not isinstance(record["id"], str) or not isinstance(record["question"], str):
        raise FormatError("'id' and 'question' must be strings", line=line)
    if not isinstance(record["options"], dict):
        raise FormatError("'options' must be an object mapping letters to texts", line=line)
    label = record.get("label")
    if label is not None and not isinstance(label, str):
        raise FormatError("'label' must be a string", line=line)
    # file order is kept; validate_item rejects letters out of order
    options = dict(record["options"])
    return McqItem(
        id=record["id"],
        question=record["question"],
        options=options,
        label=label,
        level=record["level"],
    )


def level_counts(items: Iterable[McqItem]) -> dict[str, int]:
    """Counts per level in canonical order; levels absent from a split count 0."""
    counts = {level: 0 for level in LEVELS}
    for item in items:
        counts[item.level] += 1
    return counts


def _check_unique_ids(items: list[McqItem]) -> None:
    seen: set[str] = set()
    for item in items:
        if item.id in seen:
            raise ValidationError("duplicate item id", item.id)
        seen.add(item.id)


def load_dataset(path: str, require_labels: bool = True) -> list[McqItem]:
    """
    Loads a canonical JSONL file, validating every item, in file order.

    Args:
        path: JSONL file.
        require_labels: False for the permissive loader used by `predict`
                        (unlabeled test split).

    Raises:
        FormatError: unparsable line or wrong field types (with line number).
        ValidationError: violated item invariant (with item id).
    """
    items: list[McqItem] = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"invalid JSON: {e.msg}", line=line_no) from e
            items.append(validate_item(_item_from_record(record, line_no), require_labels))
    _check_unique_ids(items)

    counts = level_counts(items)
    logger.info(
        f"[DATASET_LOAD] {path}: {len(items)} items | "
        + " | ".join(f"{level}: {n}" for level, n in counts.items())
    )
    return items


def load_unlabeled_dataset(path: str) -> list[McqItem]:
    return load_dataset(path, require_labels=False)


def save_dataset(items: Iterable[McqItem], path: str) -> int:
    """Writes items in canonical JSONL (Arabic text kept verbatim); returns the count."""
    count = 0
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for item in items:
            f.write(json.dumps(item.to_record(), ensure_ascii=False) + "\n")
            count += 1
    logger.info(f"[DATASET_SAVE] {path}: {count} items")
    return count


# --- Adapter hook for third-party files ---

@dataclass(frozen=True)
class FieldMapping:
    """
    How a foreign record maps onto McqItem.

    Fields:
        id_field / question_field / level_field: source column names.
        option_fields: letter -> source column (empty cells are skipped).
        label_field: source column holding the correct letter, or None.
        level_values: optional renaming of source level names
                      (e.g. {"easy": "Beginner"}).
        label_values: optional renaming of source labels
                      (e.g. {"1": "A", "2": "B"}).
    """

    id_field: str = "id"
    question_field: str = "question"
    option_fields: Mapping[str, str] = field(
        default_factory=lambda: {letter: f"option_{letter}" for letter in OPTION_LETTERS}
    )
    label_field: Optional[str] = "label"
    level_field: str = "level"
    level_values: Mapping[str, str] = field(default_factory=dict)
    label_values: Mapping[str, str] = field(default_factory=dict)


def _read_foreign_records(path: str) -> list[dict]:
    ext = os.path.splitext(path)[1].lower()
    with open(path, 'r', encoding='utf-8', newline='') as f:
        if ext == ".csv":
            return list(csv.DictReader(f))
        if ext == ".jsonl":
            records = []
            for line_no, line in enumerate(f, start=1):
                if line.strip():
                    try:
                        records.append(json.loads(line))
                    except json.JSONDecodeError as e:
                        raise FormatError(f"invalid JSON: {e.msg}", line=line_no) from e
            return records
        if ext == ".json":
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise FormatError(f"invalid JSON in {path}: {e.msg}") from e
            if not isinstance(data, list):
                raise FormatError(f"{path} must hold a JSON array of records")
            return data
    raise FormatError(f"unsupported file extension '{ext}' (expected .csv, .json or .jsonl)")


def adapt_records(records: Iterable[Mapping], mapping: FieldMapping, require_labels: bool = True) -> list[McqItem]:
    items = []
    for index, record in enumerate(records, start=1):
        try:
            item_id = str(record[mapping.id_field])
            question = str(record[mapping.question_field])
            level = str(record[mapping.level_field])
        except KeyError as e:
            raise FormatError(f"record {index} lacks mapped field {e}") from None
        options = {}
        for letter in OPTION_LETTERS:
            source = mapping.option_fields.get(letter)
            value = record.get(source) if source else None
            if value is not None and str(value).strip():
                options[letter] = str(value)
        label = None
        if mapping.label_field and record.get(mapping.label_field) not in (None, ""):
            raw = str(record[mapping.label_field]).strip()
            label = mapping.label_values.get(raw, raw)
        item = McqItem(
            id=item_id,
            question=question,
            options=options,
            label=label,
            level=mapping.level_values.get(level, level),
        )
        items.append(validate_item(item, require_labels))
    _check_unique_ids(items)
    return items


def load_with_mapping(path: str, mapping: FieldMapping, require_labels: bool = True) -> list[McqItem]:
    """Reads CSV / JSON / JSONL with ``mapping`` and validates the result."""
    items = adapt_records(_read_foreign_records(path), mapping, require_labels)
    logger.info(f"[DATASET_ADAPT] {path}: {len(items)} items via field mapping")
    return items


# --- Batching ---

def contrastive_negatives(item: McqItem, rng) -> tuple[str, ...]:
    """
    All incorrect letters (in order), topped up to five by sampling with
    replacement from the same item's incorrect letters.
    """
    incorrect = item.incorrect_letters
    if not incorrect:
        raise ValidationError("item has no incorrect options", item.id)
    negatives = list(incorrect[:NUM_CONTRASTIVE_NEGATIVES])
    missing = NUM_CONTRASTIVE_NEGATIVES - len(negatives)
    if missing > 0:
        picks = rng.integers(0, len(incorrect), size=missing)
        negatives.extend(incorrect[int(i)] for i in picks)
    return tuple(negatives)


def make_batches(items: list[McqItem], batch_size: int, seed: int, epoch: int = 0) -> list[TrainBatch]:
    """
    Seeded shuffle into batches of ``batch_size`` (last short batch kept).

    The shuffle and the negative top-up draw from the "shuffle" and
    "negatives" streams of ``(seed, epoch)``, so the same arguments always
    yield the same batches.

    Raises:
        EmptyDataset: ``items`` is empty.
        ValueError: ``batch_size`` < 1.
    """
    if not items:
        raise EmptyDataset("cannot batch an empty dataset")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")

    order = named_rng(seed, "shuffle", epoch).permutation(len(items))
    neg_rng = named_rng(seed, "negatives", epoch)

    entries = []
    for index in order:
        item = items[int(index)]
        if item.label is None:
            raise ValidationError("training requires labeled items", item.id)
        entries.append(BatchEntry(item=item, positive=item.label, negatives=contrastive_negatives(item, neg_rng)))

    return [
        TrainBatch(entries=tuple(entries[start:start + batch_size]))
        for start in range(0, len(entries), batch_size)
    ]
