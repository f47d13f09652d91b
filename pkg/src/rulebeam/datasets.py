"""Loading relation-extraction samples and gold hypothesis files.

Heterogeneous relation-extraction datasets are expected in one normalized
interchange format, JSONL with ``{"text", "head": [s, e], "tail": [s, e],
"relation"}`` per line; per-dataset converters stay outside this package.
Gold files pair a premise template with annotated hypothesis templates:
``{"premise": str, "hypotheses": [str, ...]}``.
"""

from __future__ import annotations

import json
import logging
import random
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO

from .atoms import Atom, make_premise_atom, sample_to_premise_atom
from .errors import DatasetFormatError, ParameterError, RulebeamError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RelationSample:
    text: str
    head_span: tuple[int, int]
    tail_span: tuple[int, int]
    relation: str

    def to_premise_atom(self) -> Atom:
        return sample_to_premise_atom(self.text, self.head_span, self.tail_span)


@dataclass
class LoadReport:
    loaded: int = 0
    skipped: int = 0


def load_relation_dataset(
    path: str | Path, fmt: str = "jsonl_spans", report: LoadReport | None = None
) -> list[RelationSample]:
    """Parse and validate interchange records; malformed lines are counted
    and skipped, but a file that is empty or mostly malformed is an error."""
    if fmt != "jsonl_spans":
        raise ParameterError(f"unknown dataset format: {fmt!r}")
    report = report if report is not None else LoadReport()
    samples: list[RelationSample] = []
    with open(path, encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    for line in lines:
        try:
            rec = json.loads(line)
            sample = RelationSample(
                text=rec["text"],
                head_span=(int(rec["head"][0]), int(rec["head"][1])),
                tail_span=(int(rec["tail"][0]), int(rec["tail"][1])),
                relation=str(rec["relation"]),
            )
            sample.to_premise_atom()  # spans and template must validate
        except (KeyError, IndexError, TypeError, ValueError, RulebeamError) as exc:
            report.skipped += 1
            logger.warning("skipping malformed dataset line: %s", exc)
            continue
        report.loaded += 1
        samples.append(sample)
    if not lines:
        raise DatasetFormatError(f"dataset file is empty: {path}")
    if report.skipped > len(lines) / 2:
        raise DatasetFormatError(
            f"{report.skipped} of {len(lines)} lines malformed in {path}"
        )
    return samples


def save_relation_dataset(fh: TextIO, samples: Sequence[RelationSample]) -> None:
    for sample in samples:
        fh.write(
            json.dumps(
                {
                    "text": sample.text,
                    "head": list(sample.head_span),
                    "tail": list(sample.tail_span),
                    "relation": sample.relation,
                },
                ensure_ascii=False,
            )
        )
        fh.write("\n")


def sample_relation_subset(
    samples: Sequence[RelationSample], per_relation: int, seed: int
) -> list[RelationSample]:
    """Seeded uniform sampling without replacement within each relation.

    Relations with fewer samples than requested contribute everything,
    with a warning.  Deterministic for a fixed seed.
    """
    if per_relation < 1:
        raise ParameterError(f"per_relation must be >= 1, got {per_relation}")
    by_relation: dict[str, list[RelationSample]] = defaultdict(list)
    for sample in samples:
        by_relation[sample.relation].append(sample)
    rng = random.Random(seed)
    chosen: list[RelationSample] = []
    for relation in sorted(by_relation):
        group = by_relation[relation]
        if len(group) < per_relation:
            logger.warning(
                "relation %r has only %d samples, requested %d; taking all",
                relation,
                len(group),
                per_relation,
            )
            chosen.extend(group)
        else:
            chosen.extend(rng.sample(group, per_relation))
    return chosen


def gold_hypothesis_for(relation: str, style: str = "copular") -> Atom:
    """The ground-truth hypothesis atom for a relation label."""
    return make_premise_atom(relation, style)


def load_gold_hypotheses(path: str | Path) -> list[tuple[Atom, list[Atom]]]:
    """Gold JSONL: one premise template and its annotated hypotheses per line."""
    pairs: list[tuple[Atom, list[Atom]]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            premise = Atom(rec["premise"])
            hypotheses = [Atom(h) for h in rec["hypotheses"]]
            if not hypotheses:
                raise DatasetFormatError(f"premise {rec['premise']!r} has no hypotheses")
            pairs.append((premise, hypotheses))
    if not pairs:
        raise DatasetFormatError(f"gold file is empty: {path}")
    return pairs
