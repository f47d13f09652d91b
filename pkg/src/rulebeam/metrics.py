"""Text-overlap metrics for rule quality and diversity, from scratch.

All metrics live on a 0..100 scale and share one tokenization: lowercase,
whitespace and punctuation split.  Implementations are deterministic and
dependency-free: BLEU uses clipped modified n-gram precision with
epsilon smoothing and a closest-reference brevity penalty; ROUGE-L is the
LCS F1; the METEOR variant aligns exact matches then stem matches (a
light suffix-stripping stemmer) with the standard fragmentation penalty.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .atoms import Atom
from .errors import ArityError, CoverageInputError, ParameterError
from .vocab import word_tokenize

BLEU_EPSILON = 1e-9

METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5


def metric_tokenize(text: str) -> list[str]:
    return [piece.lower() for piece in word_tokenize(text)]


@dataclass(frozen=True)
class MetricReport:
    bleu1: float
    bleu2: float
    bleu4: float
    rouge_l: float
    meteor: float
    self_bleu2: float

    def __post_init__(self) -> None:
        for name, value in self.to_json().items():
            if not 0.0 <= value <= 100.0:
                raise ParameterError(f"{name} out of range: {value}")

    def to_json(self) -> dict[str, float]:
        return {
            "bleu1": self.bleu1,
            "bleu2": self.bleu2,
            "bleu4": self.bleu4,
            "rouge_l": self.rouge_l,
            "meteor": self.meteor,
            "self_bleu2": self.self_bleu2,
        }


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_n(candidate: str, references: Sequence[str], n: int) -> float:
    """Sentence BLEU over orders 1..n, scaled to [0, 100].

    Zero clipped counts smooth to epsilon; the brevity penalty compares
    against the reference length closest to the candidate's.
    """
    if n not in (1, 2, 4):
        raise ParameterError(f"BLEU order must be 1, 2 or 4, got {n}")
    if not references:
        raise ParameterError("BLEU needs at least one reference")
    cand = metric_tokenize(candidate)
    refs = [metric_tokenize(r) for r in references]
    if not cand:
        return 0.0
    log_precision = 0.0
    for order in range(1, n + 1):
        cand_counts = _ngrams(cand, order)
        max_ref_counts: Counter = Counter()
        for ref in refs:
            for gram, count in _ngrams(ref, order).items():
                max_ref_counts[gram] = max(max_ref_counts[gram], count)
        clipped = sum(min(count, max_ref_counts[gram]) for gram, count in cand_counts.items())
        total = sum(cand_counts.values())
        if order == 1 and clipped == 0:
            return 0.0  # no lexical overlap at all; nothing to smooth
        precision = clipped / total if clipped > 0 and total > 0 else BLEU_EPSILON
        log_precision += math.log(precision) / n
    closest_ref_len = min((abs(len(r) - len(cand)), len(r)) for r in refs)[1]
    brevity = 1.0 if len(cand) >= closest_ref_len else math.exp(1 - closest_ref_len / len(cand))
    return 100.0 * brevity * math.exp(log_precision)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    table = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        prev_diag = 0
        for j in range(1, len(b) + 1):
            prev_diag, table[j] = table[j], (
                prev_diag + 1 if a[i - 1] == b[j - 1] else max(table[j], table[j - 1])
            )
    return table[len(b)]


def rouge_l(candidate: str, references: Sequence[str]) -> float:
    """LCS-based F1 (beta = 1), max over references, scaled to [0, 100]."""
    if not references:
        raise ParameterError("ROUGE-L needs at least one reference")
    cand = metric_tokenize(candidate)
    best = 0.0
    for reference in references:
        ref = metric_tokenize(reference)
        if not cand or not ref:
            continue
        lcs = _lcs_length(cand, ref)
        if lcs == 0:
            continue
        precision = lcs / len(cand)
        recall = lcs / len(ref)
        best = max(best, 2 * precision * recall / (precision + recall))
    return 100.0 * best


def stem(word: str) -> str:
    """Light suffix-stripping stemmer: plural, -ing, -ed, trailing y -> i."""
    w = word.lower()
    if len(w) <= 3:
        return w
    if w.endswith("sses"):
        w = w[:-2]
    elif w.endswith("ies"):
        w = w[:-3] + "i"
    elif w.endswith("s") and not w.endswith("ss"):
        w = w[:-1]
    for suffix in ("ing", "ed"):
        if w.endswith(suffix) and len(w) - len(suffix) >= 3:
            w = w[: -len(suffix)]
            if len(w) >= 2 and w[-1] == w[-2] and w[-1] not in "aeiou":
                w = w[:-1]
            break
    if len(w) > 3 and w.endswith("y"):
        w = w[:-1] + "i"
    return w


def _align(cand: list[str], ref: list[str]) -> list[tuple[int, int]]:
    """Greedy left-to-right alignment: exact matches first, then stems."""
    matches: dict[int, int] = {}
    used_ref: set[int] = set()
    for exact in (True, False):
        for ci, token in enumerate(cand):
            if ci in matches:
                continue
            for ri, ref_token in enumerate(ref):
                if ri in used_ref:
                    continue
                hit = token == ref_token if exact else stem(token) == stem(ref_token)
                if hit:
                    matches[ci] = ri
                    used_ref.add(ri)
                    break
    return sorted(matches.items())


def _chunks(alignment: list[tuple[int, int]]) -> int:
    count = 0
    prev: tuple[int, int] | None = None
    for ci, ri in alignment:
        if prev is None or ci != prev[0] + 1 or ri != prev[1] + 1:
            count += 1
        prev = (ci, ri)
    return count


def meteor(candidate: str, references: Sequence[str]) -> float:
    """Exact+stem METEOR with alpha=0.9, beta=3, gamma=0.5, max over refs."""
    if not references:
        raise ParameterError("METEOR needs at least one reference")
    cand = metric_tokenize(candidate)
    best = 0.0
    for reference in references:
        ref = metric_tokenize(reference)
        if not cand or not ref:
            continue
        alignment = _align(cand, ref)
        m = len(alignment)
        if m == 0:
            continue
        precision = m / len(cand)
        recall = m / len(ref)
        f_mean = precision * recall / (METEOR_ALPHA * precision + (1 - METEOR_ALPHA) * recall)
        penalty = METEOR_GAMMA * (_chunks(alignment) / m) ** METEOR_BETA
        best = max(best, f_mean * (1 - penalty))
    return 100.0 * best


def self_bleu2(hypotheses: Sequence[str]) -> float:
    """Mean BLEU-2 of each hypothesis against all the others.

    Smaller is more diverse; identical hypotheses score 100.
    """
    if len(hypotheses) < 2:
        raise ArityError("self-BLEU needs at least two hypotheses")
    scores = []
    for idx, hypothesis in enumerate(hypotheses):
        others = [h for pos, h in enumerate(hypotheses) if pos != idx]
        scores.append(bleu_n(hypothesis, others, 2))
    return sum(scores) / len(scores)


def coverage_eval(
    premises_with_gold: Sequence[tuple[Atom, Atom | Sequence[Atom]]],
    induced: Mapping[str, Sequence[str]],
) -> MetricReport:
    """Best-hypothesis coverage: per premise and metric, the max over the
    induced hypotheses against the gold; the report holds per-metric means.

    ``induced`` maps premise templates to hypothesis template lists.  The
    diversity column averages per-premise self-BLEU-2 over premises with
    at least two hypotheses (0.0 when none qualifies).
    """
    if not premises_with_gold:
        raise ParameterError("coverage evaluation needs at least one premise")
    sums = {"bleu1": 0.0, "bleu2": 0.0, "bleu4": 0.0, "rouge_l": 0.0, "meteor": 0.0}
    diversity: list[float] = []
    for premise, gold in premises_with_gold:
        if premise.template not in induced:
            raise CoverageInputError(f"no induced hypotheses for {premise.template!r}")
        hypotheses = list(induced[premise.template])
        if not hypotheses:
            raise CoverageInputError(f"empty hypothesis list for {premise.template!r}")
        golds = [gold] if isinstance(gold, Atom) else list(gold)
        references = [g.template for g in golds]
        sums["bleu1"] += max(bleu_n(h, references, 1) for h in hypotheses)
        sums["bleu2"] += max(bleu_n(h, references, 2) for h in hypotheses)
        sums["bleu4"] += max(bleu_n(h, references, 4) for h in hypotheses)
        sums["rouge_l"] += max(rouge_l(h, references) for h in hypotheses)
        sums["meteor"] += max(meteor(h, references) for h in hypotheses)
        if len(hypotheses) >= 2:
            diversity.append(self_bleu2(hypotheses))
    count = len(premises_with_gold)
    return MetricReport(
        bleu1=sums["bleu1"] / count,
        bleu2=sums["bleu2"] / count,
        bleu4=sums["bleu4"] / count,
        rouge_l=sums["rouge_l"] / count,
        meteor=sums["meteor"] / count,
        self_bleu2=sum(diversity) / len(diversity) if diversity else 0.0,
    )
