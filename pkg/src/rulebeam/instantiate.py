"""Top-k instantiation generation for a premise atom.

The premise's variables are probed with the instantiation prompt and the
scorer decodes joint ``x <sep> y`` sequences left to right; each finished
beam splits at the separator into the two surface forms, is filtered and
deduplicated, and the survivors' log-weights are renormalized to a proper
distribution over the returned set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .atoms import Atom, Instantiation, render_instantiation_prompt
from .corpus import matches_numeric_or_date
from .decoding import Candidate, DecodeParams, beam_decode, select_diverse
from .errors import EmptyInstantiationError, ParameterError
from .logmath import logaddexp, normalize_logs
from .scoring import LogProbRow, Scorer

GroupBeam = tuple[tuple[int, ...], float]


@dataclass(frozen=True)
class InstantiationConfig:
    k: int = 10
    beam_groups: int = 120
    group_width: int = 1
    diversity_penalty: float = 1.0
    max_len: int = 10
    drop_numeric_date: bool = True
    dedupe_case_insensitive: bool = True

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if self.max_len < 2:
            raise ParameterError("max_len must leave room for a surface form and a separator")
        if self.beam_groups < 1 or self.group_width < 1:
            raise ParameterError("beam_groups and group_width must be >= 1")

    @property
    def beam_width(self) -> int:
        return self.beam_groups * self.group_width


def generate_instantiations(
    premise: Atom, scorer: Scorer, cfg: InstantiationConfig
) -> list[Instantiation]:
    """Decode, parse, filter, deduplicate, renormalize; best weight first."""
    condition = render_instantiation_prompt(premise)
    beams = beam_decode(
        scorer,
        [condition],
        [0.0],
        DecodeParams(
            width=cfg.beam_width,
            max_len=cfg.max_len,
            beam_groups=cfg.beam_groups,
            diversity_penalty=cfg.diversity_penalty,
        ),
    )
    vocab = scorer.vocab()
    survivors: list[tuple[str, str, float]] = []
    seen: set[tuple[str, str]] = set()
    for beam in beams:
        content = beam.tokens[:-1]  # decoder guarantees a trailing eos
        sep_positions = [i for i, tok in enumerate(content) if tok == vocab.sep_id]
        if len(sep_positions) != 1:
            continue
        x_tokens = content[: sep_positions[0]]
        y_tokens = content[sep_positions[0] + 1 :]
        if not x_tokens or not y_tokens:
            continue
        x_surface = scorer.detokenize(x_tokens)
        y_surface = scorer.detokenize(y_tokens)
        if cfg.drop_numeric_date and (
            matches_numeric_or_date(x_surface) or matches_numeric_or_date(y_surface)
        ):
            continue
        # surface pairs are unique within one set; the flag widens the key
        key = (
            (x_surface.lower(), y_surface.lower())
            if cfg.dedupe_case_insensitive
            else (x_surface, y_surface)
        )
        if key in seen:
            continue  # beams are ranked, so the first is the heaviest
        seen.add(key)
        survivors.append((x_surface, y_surface, beam.local_logs[0]))
    if not survivors:
        raise EmptyInstantiationError(
            f"no instantiation survived decoding and filtering for {premise.template!r}"
        )
    top = survivors[: cfg.k]
    weights = normalize_logs([w for _, _, w in top])
    return [
        Instantiation(x, y, weight) for (x, y, _), weight in zip(top, weights)
    ]


def diverse_beam_step(
    groups: Sequence[Sequence[GroupBeam]],
    rows: Sequence[LogProbRow],
    penalty: float,
) -> list[list[GroupBeam]]:
    """Extend grouped beams by one token over a shared candidate pool.

    ``rows`` holds one next-token log-prob row per beam, flattened in group
    order.  Group ``g`` sees each candidate token's score reduced by
    ``penalty`` for every earlier-group selection of that token this step,
    then keeps its top-width candidates; selection is without replacement,
    so a zero penalty reproduces plain beam search at the pooled width.
    """
    flat = [beam for group in groups for beam in group]
    if len(rows) != len(flat):
        raise ParameterError("need exactly one log-prob row per active beam")
    widths = {len(group) for group in groups}
    if len(widths) != 1:
        raise ParameterError("groups must share one width")
    candidates: list[Candidate] = []
    for (tokens, score), row in zip(flat, rows):
        for tok in np.flatnonzero(np.asarray(row) > -np.inf):
            tok = int(tok)
            candidates.append(Candidate(tokens + (tok,), tok, score + float(row[tok])))
    chosen = select_diverse(candidates, len(flat), len(groups), penalty)
    per_group = len(flat) // len(groups)
    return [
        [(c.tokens, c.score) for c in chosen[i : i + per_group]]
        for i in range(0, len(chosen), per_group)
    ]


def marginalize_to_x(instantiations: Sequence[Instantiation]) -> list[Instantiation]:
    """Collapse (x, y) bindings to x-only ones for new-variable decoding.

    Mass is summed per x surface and the result renormalized; ordering is
    by weight, heaviest first.
    """
    if not instantiations:
        raise ParameterError("cannot marginalize an empty instantiation set")
    order: list[str] = []
    mass: dict[str, float] = {}
    for ins in instantiations:
        if ins.x_surface not in mass:
            order.append(ins.x_surface)
            mass[ins.x_surface] = ins.log_weight
        else:
            mass[ins.x_surface] = logaddexp(mass[ins.x_surface], ins.log_weight)
    weights = normalize_logs([mass[x] for x in order])
    merged = sorted(zip(order, weights), key=lambda p: (-p[1], p[0]))
    return [Instantiation(x, None, w) for x, w in merged]
