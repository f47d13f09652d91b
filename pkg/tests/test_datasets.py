"""Dataset ingestion: interchange loader, sampling, gold conversion."""

from __future__ import annotations

import io
import json

import pytest

from rulebeam.datasets import (
    LoadReport,
    RelationSample,
    gold_hypothesis_for,
    load_gold_hypotheses,
    load_relation_dataset,
    sample_relation_subset,
    save_relation_dataset,
)
from rulebeam.errors import DatasetFormatError, InvalidRelationError, ParameterError


def _write_jsonl(path, records):
    path.write_text(
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records), encoding="utf-8"
    )


GOOD = [
    {"text": "Steve Jobs founded Apple.", "head": [0, 10], "tail": [19, 24], "relation": "founderOf"},
    {"text": "Tokyo is in Japan.", "head": [0, 5], "tail": [12, 17], "relation": "locatedIn"},
    {"text": "Ada wrote Notes.", "head": [0, 3], "tail": [10, 15], "relation": "authorOf"},
]


class TestLoader:
    def test_loads_valid_lines(self, tmp_path):
        path = tmp_path / "data.jsonl"
        _write_jsonl(path, GOOD)
        samples = load_relation_dataset(path)
        assert len(samples) == 3
        assert samples[0].to_premise_atom().template == "[X] founded [Y]."

    def test_overlapping_spans_skipped_and_counted(self, tmp_path):
        path = tmp_path / "data.jsonl"
        bad = {"text": "abcdefgh.", "head": [0, 5], "tail": [3, 8], "relation": "r"}
        _write_jsonl(path, GOOD + [bad])
        report = LoadReport()
        samples = load_relation_dataset(path, report=report)
        assert len(samples) == 3
        assert report.skipped == 1

    def test_empty_file_is_format_error(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(DatasetFormatError):
            load_relation_dataset(path)

    def test_mostly_malformed_is_format_error(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text(
            json.dumps(GOOD[0]) + "\n" + "not json\n" + "{\"x\": 1}\n", encoding="utf-8"
        )
        with pytest.raises(DatasetFormatError):
            load_relation_dataset(path)

    def test_unreadable_file_is_io_error(self, tmp_path):
        with pytest.raises(OSError):
            load_relation_dataset(tmp_path / "missing.jsonl")

    def test_round_trip(self, tmp_path):
        path = tmp_path / "data.jsonl"
        _write_jsonl(path, GOOD)
        samples = load_relation_dataset(path)
        buf = io.StringIO()
        save_relation_dataset(buf, samples)
        path2 = tmp_path / "again.jsonl"
        path2.write_text(buf.getvalue(), encoding="utf-8")
        assert load_relation_dataset(path2) == samples


class TestSampling:
    def _samples(self, n_per: dict[str, int]) -> list[RelationSample]:
        out = []
        for relation, count in n_per.items():
            for idx in range(count):
                text = f"E{idx} {relation} T{idx}."
                out.append(
                    RelationSample(
                        text,
                        (0, len(f"E{idx}")),
                        (len(text) - len(f"T{idx}") - 1, len(text) - 1),
                        relation,
                    )
                )
        return out

    def test_deterministic_for_fixed_seed(self):
        samples = self._samples({"a": 100, "b": 40})
        first = sample_relation_subset(samples, per_relation=5, seed=7)
        second = sample_relation_subset(samples, per_relation=5, seed=7)
        assert first == second
        assert len(first) == 10

    def test_seed_changes_subset(self):
        samples = self._samples({"a": 100})
        assert sample_relation_subset(samples, 5, seed=1) != sample_relation_subset(
            samples, 5, seed=2
        )

    def test_small_relation_takes_all(self, caplog):
        samples = self._samples({"tiny": 3})
        with caplog.at_level("WARNING"):
            chosen = sample_relation_subset(samples, per_relation=5, seed=0)
        assert len(chosen) == 3
        assert any("tiny" in rec.message for rec in caplog.records)

    def test_per_relation_validation(self):
        with pytest.raises(ParameterError):
            sample_relation_subset([], per_relation=0, seed=0)


class TestGoldConversion:
    def test_paper_relation(self):
        assert gold_hypothesis_for("<founderOf>").template == "[X] is founder of [Y]."

    def test_copular_fallback(self):
        assert gold_hypothesis_for("spouse").template == "[X] is spouse of [Y]."

    def test_empty_is_error(self):
        with pytest.raises(InvalidRelationError):
            gold_hypothesis_for("")


class TestGoldFile:
    def test_load(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        _write_jsonl(
            path,
            [
                {
                    "premise": "[X] is founder of [Y].",
                    "hypotheses": ["[X] leads [Y].", "[X] owns [Y]."],
                }
            ],
        )
        pairs = load_gold_hypotheses(path)
        assert pairs[0][0].template == "[X] is founder of [Y]."
        assert [h.template for h in pairs[0][1]] == ["[X] leads [Y].", "[X] owns [Y]."]

    def test_empty_gold_is_format_error(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        path.write_text("\n", encoding="utf-8")
        with pytest.raises(DatasetFormatError):
            load_gold_hypotheses(path)
