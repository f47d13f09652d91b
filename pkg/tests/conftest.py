"""Shared fixtures: toy scorers, random decode worlds, a reference decoder."""

from __future__ import annotations

import math
import random

import pytest

from rulebeam.atoms import Atom, Instantiation, render_applicability_prompt
from rulebeam.scoring import NgramScorer

EOS = "</s>"


def founder_instantiation_corpus() -> list[tuple[str, list[str]]]:
    return [
        ("<mask_x> is founder of <mask_y>.", "Steve Jobs <sep> Apple </s>".split()),
        ("<mask_x> is founder of <mask_y>.", "Bill Gates <sep> Microsoft </s>".split()),
    ]


def founder_applicability_corpus() -> list[tuple[str, list[str]]]:
    return [
        ("Steve Jobs <mask> Apple.", "[X] founded [Y] . </s>".split()),
        ("Steve Jobs <mask> Apple.", "[X] leads [Y] . </s>".split()),
        ("Bill Gates <mask> Microsoft.", "[X] founded [Y] . </s>".split()),
    ]


@pytest.fixture
def founder_scorer() -> NgramScorer:
    return NgramScorer.train(founder_instantiation_corpus(), order=3, alpha=0.1)


@pytest.fixture
def applicability_scorer() -> NgramScorer:
    return NgramScorer.train(founder_applicability_corpus(), order=2, alpha=0.2)


@pytest.fixture
def founder_premise() -> Atom:
    return Atom("[X] is founder of [Y].")


def random_decode_world(rng: random.Random, max_ins: int = 3):
    """A random toy scorer plus instantiation set for decode checks.

    Content alphabets stay tiny (3..5 pieces) so exhaustive enumeration of
    every terminated sequence stays cheap; placeholders and a terminator
    are always present so some decoded sequences form valid atoms.
    """
    n_pieces = rng.randint(3, 5)
    alphabet = (["[X]", "[Y]", "."] + ["w%d" % i for i in range(2)])[:n_pieces]
    n_ins = rng.randint(1, max_ins)
    ins_set = []
    for i in range(n_ins):
        weight = rng.uniform(0.2, 2.0)
        ins_set.append(Instantiation(f"x{i}", f"y{i}", math.log(weight)))
    order = rng.randint(1, 3)
    alpha = rng.uniform(0.05, 1.0)
    corpus = []
    for ins in ins_set:
        condition = render_applicability_prompt(ins)
        # one condition occasionally left untrained to exercise backoff
        if rng.random() < 0.15 and len(ins_set) > 1:
            continue
        for _ in range(rng.randint(1, 3)):
            length = rng.randint(1, 3)
            corpus.append(
                (condition, [rng.choice(alphabet) for _ in range(length)] + [EOS])
            )
    # every alphabet piece must be in the support so enumeration stays finite
    corpus.append((render_applicability_prompt(ins_set[0]), list(alphabet) + [EOS]))
    scorer = NgramScorer.train(corpus, order=order, alpha=alpha)
    vocab = scorer.vocab()
    alphabet_ids = [vocab.id_of(p) for p in alphabet]
    return scorer, ins_set, alphabet_ids


def reference_diverse_beam_search(scorer, condition, width, groups, penalty, max_len):
    """Plain-python reference decoder with the same selection semantics.

    Kept free of the package's decoding helpers so engine regressions
    cannot hide in shared code: candidates are (tokens, score) tuples, the
    groups fill in sequence from one pool without replacement, a frozen
    beam pays no penalty, and the final step forces the end token.
    """
    vocab = scorer.vocab()
    eos = vocab.eos_id
    active = [((), 0.0)]
    frozen: list[tuple[tuple[int, ...], float]] = []
    for step in range(1, max_len + 1):
        if not active:
            break
        rows = scorer.next_token_logprobs(condition, [list(t) for t, _ in active])
        candidates = []  # (tokens, new_token or None, score)
        for tokens, score in frozen:
            candidates.append((tokens, None, score))
        tokens_allowed = [eos] if step == max_len else range(len(vocab))
        for (tokens, score), row in zip(active, rows):
            for tok in tokens_allowed:
                value = float(row[tok])
                if value == float("-inf") and tok != eos:
                    continue
                candidates.append((tokens + (tok,), tok, score + value))
        per_group = width // groups
        counts: dict[int, int] = {}
        remaining = list(candidates)
        chosen = []
        for _ in range(groups):
            remaining.sort(
                key=lambda c: (
                    -(c[2] - penalty * counts.get(c[1], 0) if c[1] is not None else c[2]),
                    len(c[0]),
                    c[0],
                )
            )
            picked, remaining = remaining[:per_group], remaining[per_group:]
            for tokens, tok, score in picked:
                if tok is not None:
                    counts[tok] = counts.get(tok, 0) + 1
                chosen.append((tokens, tok, score))
        active, frozen = [], []
        for tokens, tok, score in chosen:
            if tok is None or tok == eos:
                frozen.append((tokens, score))
            else:
                active.append((tokens, score))
    frozen.sort(key=lambda c: (-c[1], len(c[0]), c[0]))
    return frozen
