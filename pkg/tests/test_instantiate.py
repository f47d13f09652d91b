"""Instantiation generation against exhaustive enumeration, plus filters."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from rulebeam.atoms import Atom, Instantiation
from rulebeam.errors import EmptyInstantiationError, ParameterError
from rulebeam.instantiate import (
    InstantiationConfig,
    diverse_beam_step,
    generate_instantiations,
    marginalize_to_x,
)
from rulebeam.scoring import train_ngram



def sequence_loglik(scorer, condition: str, token_ids: list[int]) -> float:
    total = 0.0
    for t, tok in enumerate(token_ids):
        row = scorer.next_token_logprobs(condition, [token_ids[:t]])[0]
        total += float(row[tok])
    return total


def enumerate_pairs(scorer, condition: str, max_len: int):
    """Independent oracle: likelihood-rank every parseable x<sep>y sequence."""
    vocab = scorer.vocab()
    alphabet = [t for t in scorer.support if t != vocab.eos_id]
    scored = []
    for length in range(max_len):
        for content in itertools.product(alphabet, repeat=length):
            seq = list(content) + [vocab.eos_id]
            seps = [i for i, t in enumerate(content) if t == vocab.sep_id]
            if len(seps) != 1 or seps[0] == 0 or seps[0] == len(content) - 1:
                continue
            x = scorer.detokenize(content[: seps[0]])
            y = scorer.detokenize(content[seps[0] + 1 :])
            scored.append((sequence_loglik(scorer, condition, seq), x, y, tuple(seq)))
    scored.sort(key=lambda r: (-r[0], len(r[3]), r[3]))
    return scored


class TestGenerateInstantiations:
    def test_fixture_pairs_match_enumeration(self, founder_scorer, founder_premise):
        cfg = InstantiationConfig(
            k=2, beam_groups=32, group_width=1, diversity_penalty=0.0, max_len=6,
            drop_numeric_date=False, dedupe_case_insensitive=False,
        )
        got = generate_instantiations(founder_premise, founder_scorer, cfg)
        oracle = enumerate_pairs(founder_scorer, "<mask_x> is founder of <mask_y>.", 6)
        assert [(i.x_surface, i.y_surface) for i in got] == [
            (x, y) for _, x, y, _ in oracle[:2]
        ]
        assert {(i.x_surface, i.y_surface) for i in got} == {
            ("Steve Jobs", "Apple"),
            ("Bill Gates", "Microsoft"),
        }
        # renormalized weights keep the enumeration's likelihood ratios
        gap_got = got[0].log_weight - got[1].log_weight
        gap_oracle = oracle[0][0] - oracle[1][0]
        assert gap_got == pytest.approx(gap_oracle, abs=1e-9)

    def test_oracle_bound_with_exhaustive_width(self):
        # beam width >= enumeration size: parse-level output must equal the
        # enumeration oracle exactly, pairs and likelihood gaps alike
        corpus = [
            ("<mask_x> r <mask_y>.", ["a", "<sep>", "b", "</s>"]),
            ("<mask_x> r <mask_y>.", ["b", "<sep>", "a", "</s>"]),
            ("<mask_x> r <mask_y>.", ["a", "<sep>", "a", "</s>"]),
        ]
        scorer = train_ngram(corpus, order=2, alpha=0.3)
        max_len = 4
        enumeration = sum(3 ** length for length in range(max_len))  # alphabet {a, b, <sep>}
        cfg = InstantiationConfig(
            k=enumeration,
            beam_groups=enumeration,
            group_width=1,
            diversity_penalty=0.0,
            max_len=max_len,
            drop_numeric_date=False,
            dedupe_case_insensitive=False,
        )
        got = generate_instantiations(Atom("[X] r [Y]."), scorer, cfg)
        oracle = enumerate_pairs(scorer, "<mask_x> r <mask_y>.", max_len)
        assert [(i.x_surface, i.y_surface) for i in got] == [(x, y) for _, x, y, _ in oracle]
        for earlier, later, (olik_a, *_), (olik_b, *_) in zip(
            got, got[1:], oracle, oracle[1:]
        ):
            assert earlier.log_weight - later.log_weight == pytest.approx(
                olik_a - olik_b, abs=1e-9
            )

    def test_weights_form_distribution_in_order(self, founder_scorer, founder_premise):
        cfg = InstantiationConfig(k=4, beam_groups=32, diversity_penalty=0.0, max_len=6)
        got = generate_instantiations(founder_premise, founder_scorer, cfg)
        total = sum(math.exp(i.log_weight) for i in got)
        assert total == pytest.approx(1.0, abs=1e-9)
        assert all(a.log_weight >= b.log_weight for a, b in zip(got, got[1:]))

    def test_k1_returns_the_mode(self):
        scorer = train_ngram(
            [("<mask_x> made <mask_y>.", ["solo", "<sep>", "thing", "</s>"])],
            order=2,
            alpha=0.01,
        )
        got = generate_instantiations(
            Atom("[X] made [Y]."),
            scorer,
            InstantiationConfig(k=1, beam_groups=8, diversity_penalty=0.0, max_len=5),
        )
        assert [(i.x_surface, i.y_surface, i.log_weight) for i in got] == [
            ("solo", "thing", 0.0)
        ]

    def test_no_separator_anywhere_is_empty_error(self):
        scorer = train_ngram(
            [("<mask_x> made <mask_y>.", ["solo", "</s>"])], order=2, alpha=0.01
        )
        with pytest.raises(EmptyInstantiationError):
            generate_instantiations(
                Atom("[X] made [Y]."),
                scorer,
                InstantiationConfig(k=2, beam_groups=4, diversity_penalty=0.0, max_len=4),
            )

    def test_numeric_date_filter(self):
        corpus = [
            ("<mask_x> opened <mask_y>.", ["Acme", "<sep>", "1976", "</s>"]),
            ("<mask_x> opened <mask_y>.", ["Acme", "<sep>", "Rome", "</s>"]),
        ]
        scorer = train_ngram(corpus, order=3, alpha=0.1)
        cfg = InstantiationConfig(k=4, beam_groups=16, diversity_penalty=0.0, max_len=5)
        got = generate_instantiations(Atom("[X] opened [Y]."), scorer, cfg)
        surfaces = {(i.x_surface, i.y_surface) for i in got}
        assert ("Acme", "1976") not in surfaces
        assert ("Acme", "Rome") in surfaces

    def test_case_insensitive_dedup_keeps_heavier(self):
        corpus = [
            ("<mask_x> runs <mask_y>.", ["Ada", "<sep>", "Lab", "</s>"]),
            ("<mask_x> runs <mask_y>.", ["Ada", "<sep>", "Lab", "</s>"]),
            ("<mask_x> runs <mask_y>.", ["ada", "<sep>", "lab", "</s>"]),
        ]
        scorer = train_ngram(corpus, order=3, alpha=0.1)
        cfg = InstantiationConfig(k=4, beam_groups=16, diversity_penalty=0.0, max_len=5)
        got = generate_instantiations(Atom("[X] runs [Y]."), scorer, cfg)
        pairs = [(i.x_surface, i.y_surface) for i in got]
        assert pairs[0] == ("Ada", "Lab")  # the heavier-cased duplicate survives
        assert ("ada", "lab") not in pairs
        keys = [(x.lower(), y.lower()) for x, y in pairs]
        assert len(keys) == len(set(keys))

    def test_config_validation(self):
        with pytest.raises(ParameterError):
            InstantiationConfig(k=0)
        with pytest.raises(ParameterError):
            InstantiationConfig(max_len=1)


class TestDiverseBeamStep:
    def _rows(self, scores: dict[int, float], size: int) -> np.ndarray:
        row = np.full(size, -np.inf)
        for tok, value in scores.items():
            row[tok] = value
        return row

    def test_zero_penalty_equals_pooled_beam_search(self):
        # two groups of one beam each, zero penalty: picks are exactly the
        # top-2 candidates of the pooled pool
        rows = [self._rows({0: -0.1, 1: -0.5, 2: -2.0}, 3)] * 2
        groups = [[((7,), -1.0)], [((8,), -1.2)]]
        stepped = diverse_beam_step(groups, rows, penalty=0.0)
        flat = [beam for group in stepped for beam in group]
        pooled = sorted(
            [
                (tokens + (tok,), score + rows[0][tok])
                for tokens, score in groups[0] + groups[1]
                for tok in range(3)
            ],
            key=lambda c: (-c[1], len(c[0]), c[0]),
        )[:2]
        assert flat == pooled

    def test_large_penalty_pushes_group_two_to_second_best_token(self):
        rows = [self._rows({0: -0.1, 1: -0.2, 2: -3.0}, 3)] * 2
        groups = [[((7,), -1.0)], [((7,), -1.0)]]
        stepped = diverse_beam_step(groups, rows, penalty=100.0)
        first_tokens = stepped[0][0][0][-1]
        second_tokens = stepped[1][0][0][-1]
        assert first_tokens == 0
        assert second_tokens == 1

    def test_single_group_ignores_penalty(self):
        rows = [self._rows({0: -0.3, 1: -0.6, 2: -0.9}, 3)]
        groups = [[((4,), -2.0)]]
        with_penalty = diverse_beam_step(groups, rows, penalty=50.0)
        without = diverse_beam_step(groups, rows, penalty=0.0)
        assert with_penalty == without

    def test_row_count_mismatch(self):
        with pytest.raises(ParameterError):
            diverse_beam_step([[((1,), 0.0)]], [], penalty=0.0)


class TestMarginalizeToX:
    def test_mass_sums_per_x(self):
        ins = [
            Instantiation("a", "b", math.log(0.5)),
            Instantiation("a", "c", math.log(0.25)),
            Instantiation("d", "e", math.log(0.25)),
        ]
        merged = marginalize_to_x(ins)
        assert [(m.x_surface, m.y_surface) for m in merged] == [("a", None), ("d", None)]
        assert merged[0].log_weight == pytest.approx(math.log(0.75), abs=1e-12)
        assert merged[1].log_weight == pytest.approx(math.log(0.25), abs=1e-12)

    def test_empty_is_error(self):
        with pytest.raises(ParameterError):
            marginalize_to_x([])
