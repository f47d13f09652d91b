"""Supported beam search: hypothesis decoding shared across instantiations.

One beam set is decoded for the whole instantiation set.  Each beam keeps
a local score per instantiation (its log-likelihood under that binding's
applicability prompt) and a global score (the log of the weight-averaged
probability over the set); selection at every timestep is by global
score, so the beams stay identical for every instantiation.  The top-k
finished beams that form valid hypothesis atoms become open rules.

``exhaustive_rule_oracle`` scores every terminated sequence on a toy
alphabet exactly and is the reference the decoder is checked against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .atoms import Atom, Instantiation, OpenRule, render_applicability_prompt
from .decoding import (
    DecodedBeam,
    DecodeParams,
    beam_decode,
    rank_key,
    rescore_sequence,
)
from .errors import AtomError, OracleTooLargeError, ParameterError
from .logmath import logsumexp, normalize_logs
from .scoring import Scorer

ORACLE_SEQUENCE_GUARD = 1_000_000

# A Beam as surfaced by the decoder: token sequence in placeholder space,
# one local log per instantiation, and the aggregated global log.
Beam = DecodedBeam


@dataclass(frozen=True)
class SbsConfig:
    k: int = 10
    max_len: int = 12
    beam_groups: int | None = None  # None: one group per beam slot
    diversity_penalty: float = 1.0
    new_variable: bool = False
    length_penalty: float = 0.0
    dedupe: bool = False

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if self.max_len < 1:
            raise ParameterError(f"max_len must be >= 1, got {self.max_len}")
        if self.beam_groups is not None and self.beam_groups > self.k:
            raise ParameterError("beam_groups cannot exceed k")

    @property
    def groups(self) -> int:
        return self.k if self.beam_groups is None else self.beam_groups


def conditions_and_weights(
    ins_set: Sequence[Instantiation], new_variable: bool = False
) -> tuple[list[str], list[float]]:
    """Applicability prompts plus renormalized log-weights for a set."""
    if not ins_set:
        raise ParameterError("instantiation set must be non-empty")
    conditions = [render_applicability_prompt(ins, new_variable) for ins in ins_set]
    return conditions, normalize_logs([ins.log_weight for ins in ins_set])


def decode_shared_beams(
    ins_set: Sequence[Instantiation], scorer: Scorer, cfg: SbsConfig
) -> list[Beam]:
    """Run the shared-beam decode and return raw ranked beams."""
    conditions, weights = conditions_and_weights(ins_set, cfg.new_variable)
    return beam_decode(
        scorer,
        conditions,
        weights,
        DecodeParams(
            width=cfg.k,
            max_len=cfg.max_len,
            beam_groups=cfg.groups,
            diversity_penalty=cfg.diversity_penalty,
            length_penalty=cfg.length_penalty,
        ),
    )


def beam_to_atom(beam: Beam, scorer: Scorer, new_variable: bool = False) -> Atom:
    """Detokenize a beam into a hypothesis atom, enforcing mode and invariants."""
    template = scorer.detokenize(beam.tokens[:-1])
    atom = Atom(template)
    if atom.new_variable != new_variable:
        mode = "new-variable" if new_variable else "standard"
        raise AtomError(f"hypothesis {template!r} does not fit {mode} mode")
    return atom


def supported_beam_search(
    premise: Atom, ins_set: Sequence[Instantiation], scorer: Scorer, cfg: SbsConfig
) -> list[OpenRule]:
    """Top-k open rules for a premise given its instantiation set.

    Beams that do not form a valid hypothesis atom for the configured mode,
    or that merely restate the premise, are discarded before the top-k cut.
    """
    beams = decode_shared_beams(ins_set, scorer, cfg)
    rules: list[OpenRule] = []
    seen: set[str] = set()
    for beam in beams:
        try:
            atom = beam_to_atom(beam, scorer, cfg.new_variable)
        except AtomError:
            continue
        if atom.normalized() == premise.normalized():
            continue
        if cfg.dedupe:
            if atom.normalized() in seen:
                continue
            seen.add(atom.normalized())
        rules.append(OpenRule(premise, atom, beam.global_log))
        if len(rules) == cfg.k:
            break
    return rules


def rescore_beam(
    ins_set: Sequence[Instantiation],
    scorer: Scorer,
    tokens: Sequence[int],
    new_variable: bool = False,
) -> tuple[list[float], float]:
    """Score a fixed token sequence from scratch; the decoder's reported
    locals and global for that sequence must match this exactly."""
    conditions, weights = conditions_and_weights(ins_set, new_variable)
    return rescore_sequence(scorer, conditions, weights, tokens)


def exhaustive_rule_oracle(
    ins_set: Sequence[Instantiation],
    scorer: Scorer,
    max_len: int,
    vocab_ids: Sequence[int],
    new_variable: bool = False,
) -> list[tuple[tuple[int, ...], float]]:
    """Score every eos-terminated sequence of length <= max_len exactly.

    Enumeration covers all content sequences over ``vocab_ids`` with the
    end token appended; the list comes back ranked by global score with
    the decoder's tie-breaking, so a wide-enough beam search must
    reproduce its head exactly.
    """
    vocab = scorer.vocab()
    if vocab.bos_id in vocab_ids or vocab.eos_id in vocab_ids:
        raise ParameterError("enumeration alphabet must not contain bos or eos")
    total = sum(len(vocab_ids) ** length for length in range(max_len))
    if total > ORACLE_SEQUENCE_GUARD:
        raise OracleTooLargeError(
            f"{total} sequences exceed the enumeration guard of {ORACLE_SEQUENCE_GUARD}"
        )
    conditions, weights = conditions_and_weights(ins_set, new_variable)
    w = np.asarray(weights)
    eos = vocab.eos_id

    results: list[tuple[tuple[int, ...], float]] = []
    prefixes: list[tuple[int, ...]] = [()]
    locals_map: dict[tuple[int, ...], np.ndarray] = {(): np.zeros(len(conditions))}
    for length in range(max_len):
        rows = np.stack(
            [
                np.stack(scorer.next_token_logprobs(cond, [list(p) for p in prefixes]))
                for cond in conditions
            ]
        )
        next_prefixes: list[tuple[int, ...]] = []
        next_locals: dict[tuple[int, ...], np.ndarray] = {}
        for idx, prefix in enumerate(prefixes):
            base = locals_map[prefix]
            finished = base + rows[:, idx, eos]
            results.append((prefix + (eos,), float(logsumexp(finished + w))))
            if length < max_len - 1:
                for tok in vocab_ids:
                    ext = prefix + (tok,)
                    next_prefixes.append(ext)
                    next_locals[ext] = base + rows[:, idx, tok]
        prefixes, locals_map = next_prefixes, next_locals

    ranked = [
        DecodedBeam(tokens, (), global_log) for tokens, global_log in results
    ]
    ranked.sort(key=lambda b: rank_key(b))
    return [(b.tokens, b.global_log) for b in ranked]


def enumerate_sequences(
    vocab_ids: Sequence[int], max_len: int, eos_id: int
) -> list[tuple[int, ...]]:
    """All eos-terminated sequences of length <= max_len, unranked."""
    out: list[tuple[int, ...]] = []
    for length in range(max_len):
        for content in itertools.product(vocab_ids, repeat=length):
            out.append(tuple(content) + (eos_id,))
    return out
