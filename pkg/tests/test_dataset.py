"""Tests for dataset loading, validation, batching, the adapter hook and synthesis."""

import csv

import pytest

from src.data.dataset import (
    LEVELS,
    NUM_CONTRASTIVE_NEGATIVES,
    FieldMapping,
    McqItem,
    level_counts,
    load_dataset,
    load_unlabeled_dataset,
    load_with_mapping,
    make_batches,
    save_dataset,
    validate_item,
)
from src.data.synthetic import synthesize_toy_dataset
from src.model.encoder import tokenize
from src.utils.errors import EmptyDataset, FormatError, ValidationError


def _record(item_id="q-1", label="B", level="Beginner", **options):
    return {
        "id": item_id,
        "question": "توفي رجل عن زوجة وابن. ما نصيب الزوجة؟",
        "options": options or {"A": "الربع", "B": "الثمن", "C": "النصف", "D": "السدس"},
        "label": label,
        "level": level,
    }


class TestLoading:

    def test_load_in_file_order(self, write_jsonl):
        path = write_jsonl("train.jsonl", [
            _record("q-2", level="Advanced"),
            _record("q-1"),
            _record("q-3", level="Intermediate"),
        ])
        items = load_dataset(path)
        assert [item.id for item in items] == ["q-2", "q-1", "q-3"]
        assert items[1].options["B"] == "الثمن"
        assert level_counts(items) == {"Beginner": 1, "Intermediate": 1, "Advanced": 1}
        assert list(level_counts(items)) == list(LEVELS)

    def test_blank_lines_are_skipped(self, write_jsonl):
        path = write_jsonl("train.jsonl", [_record("q-1"), "", _record("q-2")])
        assert len(load_dataset(path)) == 2

    def test_format_error_line_number(self, write_jsonl):
        path = write_jsonl("train.jsonl", [_record("q-1"), _record("q-2"), "{oops"])
        with pytest.raises(FormatError) as excinfo:
            load_dataset(path)
        assert excinfo.value.line == 3

    @pytest.mark.parametrize("record", [
        {"id": "q-1", "question": "x", "options": {"A": "a", "B": "b"}, "label": "A"},
        {"id": 7, "question": "x", "options": {"A": "a", "B": "b"}, "label": "A", "level": "Beginner"},
        {"id": "q-1", "question": "x", "options": ["a", "b"], "label": "A", "level": "Beginner"},
        {"id": "q-1", "question": "x", "options": {"A": "a", "B": "b"}, "label": "A", "level": "Beginner", "x": 1},
    ])
    def test_malformed_records(self, write_jsonl, record):
        with pytest.raises(FormatError):
            load_dataset(write_jsonl("bad.jsonl", [record]))

    def test_missing_label_rejected_unless_permissive(self, write_jsonl):
        record = _record()
        del record["label"]
        path = write_jsonl("test.jsonl", [record])
        with pytest.raises(ValidationError):
            load_dataset(path)
        items = load_unlabeled_dataset(path)
        assert items[0].label is None

    def test_duplicate_ids(self, write_jsonl):
        with pytest.raises(ValidationError) as excinfo:
            load_dataset(write_jsonl("dup.jsonl", [_record("q-1"), _record("q-1")]))
        assert excinfo.value.item_id == "q-1"

    def test_out_of_order_letters_are_rejected(self, write_jsonl):
        record = _record("q-7", label="A", B="الثمن", A="الربع")
        with pytest.raises(ValidationError, match="strictly increasing") as excinfo:
            load_dataset(write_jsonl("unordered.jsonl", [record]))
        assert excinfo.value.item_id == "q-7"

    def test_save_keeps_text_verbatim(self, tmp_path, write_jsonl):
        items = load_dataset(write_jsonl("in.jsonl", [_record("q-1")]))
        out = tmp_path / "out.jsonl"
        assert save_dataset(items, str(out)) == 1
        assert "الثمن" in out.read_text(encoding="utf-8")
        assert load_dataset(str(out)) == items


class TestValidation:

    def _item(self, **overrides):
        values = {
            "id": "q-1",
            "question": "who inherits",
            "options": {"A": "a", "B": "b", "C": "c"},
            "label": "A",
            "level": "Beginner",
        }
        values.update(overrides)
        return McqItem(**values)

    def test_valid_item(self):
        item = self._item()
        assert validate_item(item) is item
        assert item.incorrect_letters == ["B", "C"]

    @pytest.mark.parametrize("overrides", [
        {"options": {"A": "a"}},
        {"options": {"A": "a", "B": "b", "C": "c", "D": "d", "E": "e", "F": "f", "G": "g"}},
        {"options": {"A": "a", "G": "g"}},
        {"options": {"B": "b", "A": "a"}},
        {"options": {"A": "a", "B": "  "}},
        {"question": ""},
        {"level": "Expert"},
        {"label": "D"},
        {"options": {"A": "same", "B": "same"}},
    ])
    def test_invalid_items(self, overrides):
        with pytest.raises(ValidationError) as excinfo:
            validate_item(self._item(**overrides))
        assert excinfo.value.item_id == "q-1"


class TestBatching:

    def test_batches_cover_every_item_once(self, synthetic_items):
        batches = make_batches(synthetic_items, batch_size=10, seed=1)
        assert [len(b) for b in batches] == [10, 10, 4]
        ids = [item_id for batch in batches for item_id in batch.ids]
        assert sorted(ids) == sorted(item.id for item in synthetic_items)

    def test_deterministic_per_seed_and_epoch(self, synthetic_items):
        first = make_batches(synthetic_items, 8, seed=4, epoch=2)
        again = make_batches(synthetic_items, 8, seed=4, epoch=2)
        other_epoch = make_batches(synthetic_items, 8, seed=4, epoch=3)
        assert first == again
        assert [b.ids for b in first] != [b.ids for b in other_epoch]

    def test_five_negatives_from_incorrect_options(self, synthetic_items):
        for batch in make_batches(synthetic_items, 8, seed=0):
            for entry in batch.entries:
                assert entry.positive == entry.item.label
                assert len(entry.negatives) == NUM_CONTRASTIVE_NEGATIVES
                assert sorted(entry.negatives) == entry.item.incorrect_letters

    def test_short_items_resample_negatives(self):
        item = McqItem("q-1", "who", {"A": "a", "B": "b", "C": "c"}, "B", "Beginner")
        entry = make_batches([item], 4, seed=9)[0].entries[0]
        assert len(entry.negatives) == NUM_CONTRASTIVE_NEGATIVES
        assert entry.negatives[:2] == ("A", "C")
        assert set(entry.negatives) <= {"A", "C"}

    def test_empty_and_invalid(self, synthetic_items):
        with pytest.raises(EmptyDataset):
            make_batches([], 4, seed=0)
        with pytest.raises(ValueError):
            make_batches(synthetic_items, 0, seed=0)
        unlabeled = McqItem("q-9", "who", {"A": "a", "B": "b"}, None, "Beginner")
        with pytest.raises(ValidationError):
            make_batches([unlabeled], 4, seed=0)


class TestFieldMapping:

    def test_csv_with_numeric_labels(self, tmp_path):
        path = tmp_path / "foreign.csv"
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["qid", "text", "opt1", "opt2", "opt3", "answer", "difficulty"])
            writer.writerow(["a-1", "who inherits", "the wife", "the son", "", "2", "easy"])
            writer.writerow(["a-2", "who inherits", "one half", "one third", "one sixth", "3", "hard"])
        mapping = FieldMapping(
            id_field="qid",
            question_field="text",
            option_fields={"A": "opt1", "B": "opt2", "C": "opt3"},
            label_field="answer",
            level_field="difficulty",
            level_values={"easy": "Beginner", "hard": "Advanced"},
            label_values={"1": "A", "2": "B", "3": "C"},
        )
        items = load_with_mapping(str(path), mapping)
        assert [item.label for item in items] == ["B", "C"]
        assert list(items[0].options) == ["A", "B"]
        assert items[1].level == "Advanced"

    def test_unmapped_level_fails_validation(self, write_jsonl):
        path = write_jsonl("foreign.jsonl", [{
            "id": "x", "question": "q", "option_A": "a", "option_B": "b", "label": "A", "level": "medium",
        }])
        with pytest.raises(ValidationError):
            load_with_mapping(path, FieldMapping())

    def test_missing_mapped_field(self, write_jsonl):
        path = write_jsonl("foreign.jsonl", [{"id": "x", "option_A": "a"}])
        with pytest.raises(FormatError):
            load_with_mapping(path, FieldMapping())

    def test_unsupported_extension(self, tmp_path):
        path = tmp_path / "foreign.xml"
        path.write_text("<items/>", encoding="utf-8")
        with pytest.raises(FormatError):
            load_with_mapping(str(path), FieldMapping())


class TestSynthetic:

    def test_deterministic(self):
        assert synthesize_toy_dataset(30, seed=2) == synthesize_toy_dataset(30, seed=2)
        assert synthesize_toy_dataset(30, seed=2) != synthesize_toy_dataset(30, seed=3)

    def test_answer_shares_tokens_with_question(self):
        for item in synthesize_toy_dataset(50, seed=11):
            question = set(item.question.split())
            assert set(item.options[item.label].split()) <= question
            for letter in item.incorrect_letters:
                assert not set(item.options[letter].split()) & question

    def test_levels_and_labels(self):
        items = synthesize_toy_dataset(60, seed=0)
        assert level_counts(items) == {"Beginner": 20, "Intermediate": 20, "Advanced": 20}
        assert len({item.label for item in items}) > 1
        assert all(len(item.options) == 6 for item in items)
        assert all(tokenize(item.question) for item in items)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            synthesize_toy_dataset(0, seed=0)
        with pytest.raises(ValueError):
            synthesize_toy_dataset(5, seed=0, n_planted=9)
