"""Shared diverse beam-decoding engine.

One engine serves both decode jobs in the pipeline: instantiation decoding
(a single condition) and hypothesis decoding (one condition per
instantiation, aggregated).  The beam set is shared: every condition
scores the same prefixes each step, candidate extensions are ranked by the
weight-aggregated score, and selection keeps one identical beam set.

Selection is diverse: the kept beams are split into groups filled in
sequence from a common candidate pool without replacement; a candidate's
score is reduced by ``penalty`` for every earlier selection of the same
token at this timestep.  With zero penalty this is exactly plain beam
search at the pooled width.

Beams that emit the end-of-sequence token freeze: they stop extending but
stay in the pool with unchanged scores and compete in every later
selection.  At the final timestep still-active beams are forced to
terminate, so every returned sequence ends with the end token and its
score includes that final step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DecodeAbortedError, ParameterError, RulebeamError
from .logmath import logsumexp
from .scoring import Scorer


@dataclass(frozen=True)
class Candidate:
    """One selectable item: a frozen beam or a one-token extension."""

    tokens: tuple[int, ...]
    new_token: int | None  # None for frozen carry-overs
    score: float
    payload: object = field(default=None, compare=False)


def select_diverse(
    candidates: Sequence[Candidate], take: int, groups: int, penalty: float
) -> list[Candidate]:
    """Pick ``take`` candidates in ``groups`` sequential rounds.

    Each group takes the best ``take // groups`` remaining candidates by
    penalized score; ties break toward shorter then lexicographically
    smaller token sequences.  Frozen carry-overs neither pay nor add
    penalty (their last token was penalized when first selected).
    """
    if groups < 1:
        raise ParameterError(f"groups must be >= 1, got {groups}")
    if take % groups != 0:
        raise ParameterError(f"group count {groups} must divide the beam width {take}")
    per_group = take // groups
    counts: dict[int, int] = {}
    remaining = list(range(len(candidates)))
    chosen: list[Candidate] = []
    for _ in range(groups):
        if not remaining:
            break

        def sort_key(idx: int) -> tuple:
            cand = candidates[idx]
            score = cand.score
            if cand.new_token is not None and penalty:
                score -= penalty * counts.get(cand.new_token, 0)
            return (-score, len(cand.tokens), cand.tokens)

        remaining.sort(key=sort_key)
        picked, remaining = remaining[:per_group], remaining[per_group:]
        for idx in picked:
            cand = candidates[idx]
            if cand.new_token is not None:
                counts[cand.new_token] = counts.get(cand.new_token, 0) + 1
            chosen.append(cand)
    return chosen


@dataclass(frozen=True)
class DecodedBeam:
    """A finished shared beam: tokens end with eos, scores are exact."""

    tokens: tuple[int, ...]
    local_logs: tuple[float, ...]  # log P(tokens | condition), one per condition
    global_log: float  # logsumexp(local + weight) over conditions


@dataclass(frozen=True)
class DecodeParams:
    width: int
    max_len: int
    beam_groups: int = 1
    diversity_penalty: float = 0.0
    length_penalty: float = 0.0

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ParameterError(f"beam width must be >= 1, got {self.width}")
        if self.max_len < 1:
            raise ParameterError(f"max_len must be >= 1, got {self.max_len}")
        if self.diversity_penalty < 0:
            raise ParameterError("diversity penalty must be >= 0")
        if self.beam_groups < 1 or self.width % self.beam_groups != 0:
            raise ParameterError(
                f"beam_groups ({self.beam_groups}) must divide the beam width ({self.width})"
            )


@dataclass
class _Live:
    tokens: tuple[int, ...]
    locals: np.ndarray


def rank_key(beam: DecodedBeam, length_penalty: float = 0.0) -> tuple:
    score = beam.global_log
    if length_penalty:
        score = score / (len(beam.tokens) ** length_penalty)
    return (-score, len(beam.tokens), beam.tokens)


def beam_decode(
    scorer: Scorer,
    conditions: Sequence[str],
    log_weights: Sequence[float],
    params: DecodeParams,
) -> list[DecodedBeam]:
    """Decode one shared beam set under every condition at once.

    Returns finished beams ranked by global score (optionally
    length-normalized), best first.  Raises
    :class:`~rulebeam.errors.DecodeAbortedError` if the scorer fails mid
    decode.
    """
    if not conditions or len(conditions) != len(log_weights):
        raise ParameterError("need one log-weight per condition, at least one condition")
    vocab = scorer.vocab()
    size = len(vocab)
    eos = vocab.eos_id
    weights = np.asarray(log_weights, dtype=float)
    n_cond = len(conditions)

    active: list[_Live] = [_Live(tokens=(), locals=np.zeros(n_cond))]
    frozen: list[DecodedBeam] = []

    for step in range(1, params.max_len + 1):
        if not active:
            break
        prefixes = [list(b.tokens) for b in active]
        try:
            # one scorer batch per condition per timestep, merged in
            # condition order so results are deterministic
            rows = np.stack(
                [
                    np.stack(scorer.next_token_logprobs(cond, prefixes))[:, :size]
                    for cond in conditions
                ]
            )
        except RulebeamError as exc:
            raise DecodeAbortedError(
                f"scorer failed at timestep {step}: {exc}",
                timestep=step,
                finished_beams=len(frozen),
            ) from exc
        # rows: (conditions, beams, vocab); locals likewise per extension
        cand_locals = np.stack([b.locals for b in active]).T[:, :, None] + rows
        cand_global = logsumexp(cand_locals + weights[:, None, None], axis=0)

        candidates: list[Candidate] = [
            Candidate(b.tokens, None, b.global_log, payload=("frozen", i))
            for i, b in enumerate(frozen)
        ]
        token_choices = (eos,) if step == params.max_len else range(size)
        for b_idx, live in enumerate(active):
            for tok in token_choices:
                score = float(cand_global[b_idx, tok])
                if score == -np.inf and tok != eos:
                    continue  # unreachable extension, not worth a beam slot
                candidates.append(
                    Candidate(live.tokens + (tok,), tok, score, payload=("extend", b_idx))
                )

        selected = select_diverse(
            candidates, params.width, params.beam_groups, params.diversity_penalty
        )

        next_active: list[_Live] = []
        next_frozen: list[DecodedBeam] = []
        for cand in selected:
            kind, idx = cand.payload
            if kind == "frozen":
                next_frozen.append(frozen[idx])
                continue
            locals_new = active[idx].locals + rows[:, idx, cand.new_token]
            if cand.new_token == eos:
                next_frozen.append(
                    DecodedBeam(cand.tokens, tuple(float(v) for v in locals_new), cand.score)
                )
            else:
                next_active.append(_Live(cand.tokens, locals_new))
        frozen, active = next_frozen, next_active

    return sorted(frozen, key=lambda b: rank_key(b, params.length_penalty))


def rescore_sequence(
    scorer: Scorer,
    conditions: Sequence[str],
    log_weights: Sequence[float],
    tokens: Sequence[int],
) -> tuple[list[float], float]:
    """Independently score a fixed token sequence under every condition.

    Returns the per-condition log-likelihoods and their weight-aggregated
    log score; used to cross-check beams the decoder reports.
    """
    if not tokens:
        raise ParameterError("cannot rescore an empty sequence")
    prefixes = [list(tokens[:t]) for t in range(len(tokens))]
    locals_: list[float] = []
    for cond in conditions:
        rows = scorer.next_token_logprobs(cond, prefixes)
        locals_.append(float(sum(rows[t][tokens[t]] for t in range(len(tokens)))))
    weights = np.asarray(log_weights, dtype=float)
    return locals_, float(logsumexp(np.asarray(locals_) + weights))
