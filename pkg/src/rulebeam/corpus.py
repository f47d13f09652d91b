"""Weak-supervision corpus construction from raw text.

From entity-bearing sentences the builder derives two training corpora:

* entity-masked examples (inputs hide the entities, targets restore them)
  train the instantiation scorer;
* relation-masked examples (inputs keep the entities, targets restore the
  relation description with the entities rewritten as ``[X]`` / ``[Y]``,
  or ``<z>`` in new-variable mode) train the applicability scorer.

Entity tagging is pluggable; a deterministic rule-based tagger
(capitalized-run heuristic plus an optional gazetteer) ships as the
default so no statistical NER model is required.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Protocol, Sequence

from .atoms import MASK, MASK_X, MASK_Y, MASK_Z, X_PLACEHOLDER, Y_PLACEHOLDER, Z_PLACEHOLDER
from .errors import SpanConflictError
from .vocab import SEP_PIECE

logger = logging.getLogger(__name__)

Span = tuple[int, int]
Tag = tuple[Span, str]

DATE_LABEL = "DATE"
NUMBER_LABEL = "NUMBER"
ENTITY_LABEL = "ENT"

_RESERVED_MARKERS = (
    MASK_X,
    MASK_Y,
    MASK_Z,
    MASK,
    SEP_PIECE,
    X_PLACEHOLDER,
    Y_PLACEHOLDER,
    Z_PLACEHOLDER,
)

# --- shared numeric/date surface patterns ------------------------------------

_MONTHS = {
    "january", "february", "march", "april", "may", "june", "july",
    "august", "september", "october", "november", "december",
    "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept",
    "oct", "nov", "dec",
}

_NUMBER_TOKEN_RE = re.compile(r"\d+(?:[.,:/\-]\d+)*(?:st|nd|rd|th)?")


def _is_number_token(token: str) -> bool:
    return bool(_NUMBER_TOKEN_RE.fullmatch(token))


def _is_month_token(token: str) -> bool:
    return token.rstrip(".").lower() in _MONTHS


def matches_numeric_or_date(surface: str) -> bool:
    """True for pure digits, digit-punctuation mixes, and month + digits."""
    tokens = surface.split()
    if not tokens:
        return False
    if all(_is_number_token(t) for t in tokens):
        return True
    has_month = any(_is_month_token(t) for t in tokens)
    has_digits = any(_is_number_token(t) for t in tokens)
    if has_month and has_digits:
        return all(_is_month_token(t) or _is_number_token(t) for t in tokens)
    return False


# --- tagging ------------------------------------------------------------------

class Tagger(Protocol):
    def tag(self, sentence: str) -> list[Tag]: ...


_FUNCTION_WORDS = frozenset(
    """the a an it he she they we i you this that these those there his her its
    their our my your if but and or nor so yet as at by for from in into of on
    to with is was are were be been being after before when while however
    although because since during until unless many some most few several all
    both each every other another such""".split()
)

_CAP_TOKEN_RE = re.compile(r"[A-Z][\w.'\-]*")


@dataclass
class RuleBasedTagger:
    """Deterministic tagger: gazetteer phrases, date/number tokens, and
    maximal runs of capitalized tokens (function words excluded)."""

    gazetteer: dict[str, str] = field(default_factory=dict)

    def tag(self, sentence: str) -> list[Tag]:
        occupied = bytearray(len(sentence))
        tags: list[Tag] = []
        for phrase in sorted(self.gazetteer, key=len, reverse=True):
            for m in re.finditer(rf"(?<!\w){re.escape(phrase)}(?!\w)", sentence):
                if any(occupied[m.start() : m.end()]):
                    continue
                occupied[m.start() : m.end()] = b"\x01" * (m.end() - m.start())
                tags.append(((m.start(), m.end()), self.gazetteer[phrase]))

        tokens = self._tokens(sentence)
        free = [t for t in tokens if not any(occupied[t[0] : t[1]])]
        tags.extend(self._date_number_tags(free))
        tagged_starts = {span[0] for span, _ in tags}
        tags.extend(self._capitalized_runs(free, tagged_starts))
        return sorted(tags, key=lambda t: t[0])

    @staticmethod
    def _tokens(sentence: str) -> list[tuple[int, int, str]]:
        out = []
        matches = list(re.finditer(r"\S+", sentence))
        for idx, m in enumerate(matches):
            start, end, text = m.start(), m.end(), m.group()
            # trailing commas and quotes never belong to a surface form; a
            # trailing period does, except at the very end of the sentence
            while text and text[-1] in ",;:!?)\"'":
                text = text[:-1]
                end -= 1
            if idx == len(matches) - 1 and text.endswith(".") and len(text) > 1:
                text = text[:-1]
                end -= 1
            while text and text[0] in "(\"'":
                text = text[1:]
                start += 1
            if text:
                out.append((start, end, text))
        return out

    @staticmethod
    def _date_number_tags(tokens: list[tuple[int, int, str]]) -> list[Tag]:
        tags: list[Tag] = []
        used: set[int] = set()
        for idx in range(len(tokens) - 1):
            if idx in used or idx + 1 in used:
                continue
            a, b = tokens[idx], tokens[idx + 1]
            pair = (_is_month_token(a[2]) and _is_number_token(b[2])) or (
                _is_number_token(a[2]) and _is_month_token(b[2])
            )
            if pair:
                tags.append(((a[0], b[1]), DATE_LABEL))
                used.update((idx, idx + 1))
        for idx, (start, end, text) in enumerate(tokens):
            if idx in used:
                continue
            if _is_number_token(text):
                tags.append(((start, end), NUMBER_LABEL))
                used.add(idx)
        return tags

    @staticmethod
    def _capitalized_runs(
        tokens: list[tuple[int, int, str]], taken_starts: set[int]
    ) -> list[Tag]:
        tags: list[Tag] = []
        run: list[tuple[int, int, str]] = []

        def flush() -> None:
            if run:
                tags.append(((run[0][0], run[-1][1]), ENTITY_LABEL))
                run.clear()

        for start, end, text in tokens:
            qualifies = (
                start not in taken_starts
                and _CAP_TOKEN_RE.fullmatch(text) is not None
                and text.rstrip(".").lower() not in _FUNCTION_WORDS
            )
            if qualifies and run and start == run[-1][1] + 1:
                run.append((start, end, text))
            elif qualifies:
                flush()
                run.append((start, end, text))
            else:
                flush()
        flush()
        return tags


def load_gazetteer(path: str | Path) -> dict[str, str]:
    """Read ``phrase<TAB>label`` lines; missing labels default to ENT."""
    gazetteer: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        phrase, _, label = line.partition("\t")
        gazetteer[phrase.strip()] = label.strip() or ENTITY_LABEL
    return gazetteer


def filter_entities(sentence: str, tags: Sequence[Tag]) -> list[Tag]:
    """Drop date/number tags, by label or by surface pattern."""
    kept = []
    for (start, end), label in tags:
        if label in (DATE_LABEL, NUMBER_LABEL):
            continue
        if matches_numeric_or_date(sentence[start:end]):
            continue
        kept.append(((start, end), label))
    return kept


# --- sentence splitting --------------------------------------------------------

DEFAULT_ABBREVIATIONS = frozenset(
    """mr mrs ms dr prof st jr sr inc ltd co corp vs etc fig al no vol e.g i.e""".split()
)


def load_abbreviations(path: str | Path) -> frozenset[str]:
    """One abbreviation per line (without the trailing period); # comments."""
    entries = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip().lower().rstrip(".")
        if line and not line.startswith("#"):
            entries.add(line)
    return frozenset(entries)


def split_sentences(text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> list[str]:
    """Split on terminal ``.?!`` followed by whitespace and an uppercase letter."""
    boundaries: list[int] = []
    for m in re.finditer(r"[.!?]+", text):
        rest = text[m.end() :].lstrip()
        if rest and not rest[0].isupper():
            continue
        word_match = re.search(r"[\w.'\-]+$", text[: m.start()])
        if word_match and m.group() == ".":
            word = word_match.group().lower().rstrip(".")
            if word in abbreviations or len(word) == 1:
                continue
        boundaries.append(m.end())
    sentences = []
    cursor = 0
    for boundary in boundaries:
        chunk = text[cursor:boundary].strip()
        if chunk:
            sentences.append(chunk)
        cursor = boundary
    tail = text[cursor:].strip()
    if tail:
        sentences.append(tail)
    return sentences


# --- masked examples ------------------------------------------------------------

ENTITY_MASKED = "entity_masked"
RELATION_MASKED = "relation_masked"


@dataclass(frozen=True)
class MaskedExample:
    """One weak-supervision training record."""

    source_text: str
    kind: str
    input_text: str
    target_text: str
    entity_spans: tuple[Span, ...]

    def __post_init__(self) -> None:
        if self.kind not in (ENTITY_MASKED, RELATION_MASKED):
            raise ValueError(f"unknown example kind: {self.kind}")
        if not 1 <= len(self.entity_spans) <= 2:
            raise SpanConflictError("a masked example carries one or two entity spans")
        _check_disjoint_spans(self.source_text, self.entity_spans)


def _check_disjoint_spans(text: str, spans: Sequence[Span]) -> None:
    last_end = -1
    for start, end in sorted(spans):
        if not (0 <= start < end <= len(text)):
            raise SpanConflictError(f"span ({start}, {end}) out of bounds or empty")
        if start < last_end:
            raise SpanConflictError(f"span ({start}, {end}) overlaps a previous span")
        last_end = end


def _replace_spans(text: str, spans: Sequence[Span], replacements: Sequence[str]) -> str:
    out: list[str] = []
    cursor = 0
    for (start, end), repl in zip(spans, replacements):
        out.append(text[cursor:start])
        out.append(repl)
        cursor = end
    out.append(text[cursor:])
    return "".join(out)


@dataclass
class CorpusStats:
    sentences_seen: int = 0
    emitted: int = 0
    filtered_entities: int = 0
    tagger_failures: int = 0

    def to_json(self) -> dict:
        return {
            "sentences_seen": self.sentences_seen,
            "emitted": self.emitted,
            "filtered_entities": self.filtered_entities,
            "tagger_failures": self.tagger_failures,
        }


def extract_relational_sentences(
    documents: Iterable[str],
    tagger: Tagger,
    stats: CorpusStats | None = None,
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
) -> Iterator[tuple[str, list[Span]]]:
    """Yield (sentence, entity spans) for sentences with 1 or 2 entities.

    Tagger failures skip the sentence with a counted warning; they never
    abort the stream.
    """
    stats = stats if stats is not None else CorpusStats()
    for document in documents:
        for sentence in split_sentences(document, abbreviations):
            stats.sentences_seen += 1
            if any(marker in sentence for marker in _RESERVED_MARKERS):
                continue  # would break round-trip reconstruction
            try:
                tags = tagger.tag(sentence)
            except Exception as exc:  # noqa: BLE001 - contract: never abort the stream
                stats.tagger_failures += 1
                logger.warning("tagger failed on %r: %s", sentence[:60], exc)
                continue
            kept = filter_entities(sentence, tags)
            stats.filtered_entities += len(tags) - len(kept)
            if len(kept) in (1, 2):
                stats.emitted += 1
                yield sentence, [span for span, _ in kept]


def build_instantiation_corpus(
    sentences: Iterable[tuple[str, Sequence[Span]]],
) -> Iterator[MaskedExample]:
    """Entity-masked examples: hide the entities, predict their surfaces."""
    for sentence, spans in sentences:
        spans = sorted(spans)
        surfaces = [sentence[s:e] for s, e in spans]
        masks = [MASK_X, MASK_Y][: len(spans)]
        yield MaskedExample(
            source_text=sentence,
            kind=ENTITY_MASKED,
            input_text=_replace_spans(sentence, spans, masks),
            target_text=f" {SEP_PIECE} ".join(surfaces),
            entity_spans=tuple(spans),
        )


def build_applicability_corpus(
    sentences: Iterable[tuple[str, Sequence[Span]]],
    new_variable: bool = False,
) -> Iterator[MaskedExample]:
    """Relation-masked examples: keep the entities, predict the description.

    Standard mode rewrites the entities as ``[X]`` / ``[Y]`` in the target
    so decoding happens in placeholder space.  New-variable mode keeps the
    first entity surface and rewrites only the second as ``<z>``; it needs
    two entities and skips one-entity sentences.
    """
    for sentence, spans in sentences:
        spans = sorted(spans)
        surfaces = [sentence[s:e] for s, e in spans]
        if new_variable:
            if len(spans) != 2:
                continue
            input_text = f"{surfaces[0]} {MASK_Z}"
            target_text = _replace_spans(sentence, spans[1:], [Z_PLACEHOLDER])
        elif len(spans) == 2:
            input_text = f"{surfaces[0]} {MASK} {surfaces[1]}."
            target_text = _replace_spans(sentence, spans, [X_PLACEHOLDER, Y_PLACEHOLDER])
        else:
            input_text = f"{surfaces[0]} {MASK}"
            target_text = _replace_spans(sentence, spans, [X_PLACEHOLDER])
        yield MaskedExample(
            source_text=sentence,
            kind=RELATION_MASKED,
            input_text=input_text,
            target_text=target_text,
            entity_spans=tuple(spans),
        )


def reconstruct_source(example: MaskedExample) -> str:
    """Invert the masking; the result must equal ``source_text`` byte-exactly."""
    surfaces = [example.source_text[s:e] for s, e in example.entity_spans]
    if example.kind == ENTITY_MASKED:
        fills = example.target_text.split(f" {SEP_PIECE} ")
        text = example.input_text.replace(MASK_X, fills[0], 1)
        if len(fills) > 1:
            text = text.replace(MASK_Y, fills[1], 1)
        return text
    if Z_PLACEHOLDER in example.target_text:
        return example.target_text.replace(Z_PLACEHOLDER, surfaces[1], 1)
    text = example.target_text.replace(X_PLACEHOLDER, surfaces[0], 1)
    if len(surfaces) > 1:
        text = text.replace(Y_PLACEHOLDER, surfaces[1], 1)
    return text


# --- files -----------------------------------------------------------------------

def example_record(example: MaskedExample) -> dict:
    return {
        "source_text": example.source_text,
        "kind": example.kind,
        "input_text": example.input_text,
        "target_text": example.target_text,
        "entity_spans": [list(span) for span in example.entity_spans],
    }


def read_masked_examples(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def iter_documents(paths: Sequence[str | Path]) -> Iterator[str]:
    """Documents from plain-text files (one document per file) or JSONL
    files with a ``text`` field (one document per record)."""
    for path in paths:
        path = Path(path)
        if path.suffix == ".jsonl":
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        yield json.loads(line)["text"]
        else:
            yield path.read_text(encoding="utf-8")


def write_corpora(
    documents: Iterable[str],
    tagger: Tagger,
    out_dir: str | Path,
    new_variable: bool = False,
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
) -> CorpusStats:
    """Stream both corpora to ``instantiation.jsonl`` / ``applicability.jsonl``
    plus a ``stats.json`` summary, one pass over the input."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats = CorpusStats()

    def dump(fh, example: MaskedExample) -> None:
        fh.write(json.dumps(example_record(example), ensure_ascii=False))
        fh.write("\n")

    with open(out_dir / "instantiation.jsonl", "w", encoding="utf-8") as ins_fh, open(
        out_dir / "applicability.jsonl", "w", encoding="utf-8"
    ) as app_fh:
        for sentence, spans in extract_relational_sentences(
            documents, tagger, stats, abbreviations
        ):
            for example in build_instantiation_corpus([(sentence, spans)]):
                dump(ins_fh, example)
            for example in build_applicability_corpus([(sentence, spans)], new_variable):
                dump(app_fh, example)
    (out_dir / "stats.json").write_text(
        json.dumps(stats.to_json(), indent=2) + "\n", encoding="utf-8"
    )
    return stats
