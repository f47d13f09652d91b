"""Canonical data model: atoms, rules, instantiations, prompt rendering.

An atom is a natural-language sentence template relating placeholder
variables, e.g. ``"[X] is founder of [Y]."``.  Placeholder spellings are
fixed byte-exactly for interoperability:

* atoms use ``[X]``, ``[Y]`` and, for an unbound new variable, ``<z>``;
* prompts use ``<mask_x>``, ``<mask_y>``, ``<mask>`` and ``<mask_z>``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

from .errors import AtomError, InvalidRelationError, ModeConflictError, SpanConflictError

X_PLACEHOLDER = "[X]"
Y_PLACEHOLDER = "[Y]"
Z_PLACEHOLDER = "<z>"

MASK_X = "<mask_x>"
MASK_Y = "<mask_y>"
MASK = "<mask>"
MASK_Z = "<mask_z>"

SENTENCE_TERMINATORS = (".", "!", "?")

# Trailing prepositions that already bind the object; the copular template
# appends "of" only when none of these is present.
_TRAILING_PREPOSITIONS = {
    "of", "to", "in", "on", "at", "by", "for", "with", "from", "as", "about",
}

_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z])(?=[A-Z])")


def validate_template(template: str) -> None:
    """Raise :class:`AtomError` unless ``template`` satisfies the atom invariants."""
    if template != template.strip():
        raise AtomError(f"template has surrounding whitespace: {template!r}")
    if template.count(X_PLACEHOLDER) != 1:
        raise AtomError(f"template needs exactly one {X_PLACEHOLDER}: {template!r}")
    n_y = template.count(Y_PLACEHOLDER)
    n_z = template.count(Z_PLACEHOLDER)
    if (n_y, n_z) not in ((1, 0), (0, 1)):
        raise AtomError(
            f"template needs exactly one {Y_PLACEHOLDER} or exactly one {Z_PLACEHOLDER}: {template!r}"
        )
    if not template.endswith(SENTENCE_TERMINATORS):
        raise AtomError(f"template must end with a sentence terminator: {template!r}")
    stripped = (
        template.replace(X_PLACEHOLDER, " ")
        .replace(Y_PLACEHOLDER, " ")
        .replace(Z_PLACEHOLDER, " ")
    )
    if not re.search(r"\w", stripped):
        raise AtomError(f"template carries no relation description: {template!r}")


@dataclass(frozen=True)
class Atom:
    """A sentence template with one ``[X]`` and one ``[Y]`` (or ``<z>``)."""

    template: str

    def __post_init__(self) -> None:
        validate_template(self.template)

    @property
    def new_variable(self) -> bool:
        return Z_PLACEHOLDER in self.template

    def normalized(self) -> str:
        """Whitespace-collapsed lowercase form used for equality checks."""
        return " ".join(self.template.lower().split())


@dataclass(frozen=True)
class Instantiation:
    """A concrete surface-form binding of an atom's variables.

    ``log_weight`` is the log-probability of this binding given the premise;
    within one generated set the weights are renormalized to sum to one in
    probability space.  ``y_surface`` is ``None`` in new-variable mode.
    """

    x_surface: str
    y_surface: str | None
    log_weight: float

    def __post_init__(self) -> None:
        if not self.x_surface:
            raise ModeConflictError("instantiation requires a non-empty x surface form")


@dataclass(frozen=True)
class OpenRule:
    """An implication from a premise atom to a hypothesis atom.

    ``log_score`` is the log of the instantiation-weighted hypothesis
    probability; with renormalized instantiation weights it is <= 0.
    """

    premise: Atom
    hypothesis: Atom
    log_score: float

    def __post_init__(self) -> None:
        if self.hypothesis.normalized() == self.premise.normalized():
            raise AtomError("hypothesis must differ from the premise")
        if self.log_score > 1e-9 or math.isnan(self.log_score):
            raise AtomError(f"log_score must be a log-probability, got {self.log_score}")


def split_relation_words(relation_name: str) -> list[str]:
    """Lower-cased word list from a camelCase / snake_case relation name.

    Splits at lower-to-upper boundaries only; digits stay attached to the
    word they follow.  Angle brackets and surrounding whitespace are
    stripped first.
    """
    name = relation_name.strip().strip("<>").strip()
    name = name.replace("_", " ")
    name = _CAMEL_BOUNDARY.sub(" ", name)
    words = [w.lower() for w in name.split() if re.search(r"[0-9A-Za-z]", w)]
    return words


def make_premise_atom(relation_name: str, style: str = "copular") -> Atom:
    """Convert an external relation name into a premise atom.

    ``copular`` renders ``"[X] is <words> of [Y]."`` and ``verbatim``
    renders ``"[X] <words> [Y]."``.  The copular form skips the trailing
    ``of`` when the name already ends in a preposition, and does not double
    a leading ``is``.
    """
    if style not in ("copular", "verbatim"):
        raise ValueError(f"unknown style: {style!r}")
    words = split_relation_words(relation_name)
    if not words:
        raise InvalidRelationError(f"relation name has no usable words: {relation_name!r}")
    if style == "verbatim":
        return Atom(f"{X_PLACEHOLDER} {' '.join(words)} {Y_PLACEHOLDER}.")
    if words[0] == "is":
        words = words[1:]
    if not words:
        raise InvalidRelationError(f"relation name has no usable words: {relation_name!r}")
    phrase = " ".join(words)
    if words[-1] in _TRAILING_PREPOSITIONS:
        return Atom(f"{X_PLACEHOLDER} is {phrase} {Y_PLACEHOLDER}.")
    return Atom(f"{X_PLACEHOLDER} is {phrase} of {Y_PLACEHOLDER}.")


def sample_to_premise_atom(
    text: str, head_span: tuple[int, int], tail_span: tuple[int, int]
) -> Atom:
    """Turn an entity-annotated sentence into a premise atom.

    The head span becomes ``[X]`` and the tail span ``[Y]``, wherever they
    sit in the sentence.
    """
    _check_spans(text, head_span, tail_span)
    pieces = sorted(
        ((head_span, X_PLACEHOLDER), (tail_span, Y_PLACEHOLDER)), key=lambda p: p[0][0]
    )
    out: list[str] = []
    cursor = 0
    for (start, end), placeholder in pieces:
        out.append(text[cursor:start])
        out.append(placeholder)
        cursor = end
    out.append(text[cursor:])
    return Atom("".join(out).strip())


def _check_spans(text: str, head_span: tuple[int, int], tail_span: tuple[int, int]) -> None:
    for span in (head_span, tail_span):
        start, end = span
        if not (0 <= start < end <= len(text)):
            raise SpanConflictError(f"span {span} out of bounds or empty for text of length {len(text)}")
    (hs, he), (ts, te) = head_span, tail_span
    if hs < te and ts < he:
        raise SpanConflictError(f"spans {head_span} and {tail_span} overlap")


def render_instantiation_prompt(premise: Atom) -> str:
    """Prompt probing which surface forms fill the premise's variables."""
    rendered = premise.template.replace(X_PLACEHOLDER, MASK_X)
    rendered = rendered.replace(Y_PLACEHOLDER, MASK_Y)
    return rendered.replace(Z_PLACEHOLDER, MASK_Z)


def render_applicability_prompt(ins: Instantiation, new_variable: bool = False) -> str:
    """Prompt probing which relation descriptions fit a concrete binding."""
    if new_variable:
        if ins.y_surface is not None:
            raise ModeConflictError("new-variable prompts take x-only instantiations")
        return f"{ins.x_surface} {MASK_Z}"
    if ins.y_surface is None:
        raise ModeConflictError("standard prompts require a y surface form")
    return f"{ins.x_surface} {MASK} {ins.y_surface}."


# --- rule JSONL interchange -------------------------------------------------
#
# One object per line, UTF-8:
#   {"premise": str, "hypothesis": str, "log_score": float,
#    "instantiations": [{"x": str, "y": str | null, "log_weight": float}, ...]}


def rule_record(rule: OpenRule, instantiations: Sequence[Instantiation]) -> dict:
    return {
        "premise": rule.premise.template,
        "hypothesis": rule.hypothesis.template,
        "log_score": rule.log_score,
        "instantiations": [
            {"x": ins.x_surface, "y": ins.y_surface, "log_weight": ins.log_weight}
            for ins in instantiations
        ],
    }


def write_rules_jsonl(
    fh: TextIO, rules: Iterable[OpenRule], instantiations: Sequence[Instantiation]
) -> int:
    n = 0
    for rule in rules:
        fh.write(json.dumps(rule_record(rule, instantiations), ensure_ascii=False))
        fh.write("\n")
        n += 1
    return n


def read_rules_jsonl(fh: TextIO) -> list[tuple[OpenRule, list[Instantiation]]]:
    out: list[tuple[OpenRule, list[Instantiation]]] = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        rule = OpenRule(
            premise=Atom(rec["premise"]),
            hypothesis=Atom(rec["hypothesis"]),
            log_score=float(rec["log_score"]),
        )
        ins = [
            Instantiation(r["x"], r.get("y"), float(r["log_weight"]))
            for r in rec.get("instantiations", [])
        ]
        out.append((rule, ins))
    return out
