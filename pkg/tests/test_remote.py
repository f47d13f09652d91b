"""Remote scorer client against an in-process wire-protocol double."""

from __future__ import annotations

import random

import numpy as np
import pytest

from rulebeam.errors import ProtocolError, TransportError, VocabularyError
from rulebeam.logmath import logsumexp
from rulebeam.remote import RemoteScorer
from rulebeam.scoring import NgramScorer

from conftest import founder_instantiation_corpus
from wire_double import ScorerServer


@pytest.fixture(scope="module")
def backend() -> NgramScorer:
    return NgramScorer.train(founder_instantiation_corpus(), order=2, alpha=0.25)


@pytest.fixture(scope="module")
def server(backend):
    with ScorerServer(backend) as srv:
        yield srv


def _rows_equal(lhs, rhs, tol=1e-9):
    lhs, rhs = np.asarray(lhs), np.asarray(rhs)
    both_neg_inf = np.isneginf(lhs) & np.isneginf(rhs)
    with np.errstate(invalid="ignore"):
        close = np.abs(lhs - rhs) <= tol
    return bool(np.all(both_neg_inf | close))


class TestRemoteClient:
    def test_vocab_mirrors_service(self, backend, server):
        client = RemoteScorer(server.base_url)
        assert client.vocab() == backend.vocab()

    def test_vocab_stable_within_session(self, server):
        client = RemoteScorer(server.base_url)
        assert client.vocab() is client.vocab()

    def test_rows_match_in_process_backend(self, backend, server):
        client = RemoteScorer(server.base_url)
        vocab = backend.vocab()
        rng = random.Random(3)
        for _ in range(25):
            condition = rng.choice(["<mask_x> is founder of <mask_y>.", "unseen condition"])
            prefixes = [
                [rng.randrange(len(vocab)) for _ in range(rng.randint(0, 3))]
                for _ in range(rng.randint(1, 4))
            ]
            local = backend.next_token_logprobs(condition, prefixes)
            remote = client.next_token_logprobs(condition, prefixes)
            assert all(_rows_equal(l, r) for l, r in zip(local, remote))

    def test_empty_prefixes_short_circuit(self, server):
        client = RemoteScorer(server.base_url)
        assert client.next_token_logprobs("anything", []) == []

    def test_detokenize_round_trip(self, backend, server):
        client = RemoteScorer(server.base_url)
        vocab = backend.vocab()
        ids = [vocab.id_of(p) for p in ("Steve", "Jobs", "<sep>", "Apple")]
        assert client.detokenize(ids) == backend.detokenize(ids)

    def test_detokenize_validates_ids(self, server):
        client = RemoteScorer(server.base_url)
        with pytest.raises(VocabularyError):
            client.detokenize([10_000])

    def test_auth_token_env_sets_bearer_header(self, monkeypatch):
        monkeypatch.setenv("RULEBEAM_SCORER_TOKEN", "sesame")
        client = RemoteScorer("http://127.0.0.1:9")
        assert client._session.headers["Authorization"] == "Bearer sesame"
        monkeypatch.delenv("RULEBEAM_SCORER_TOKEN")
        bare = RemoteScorer("http://127.0.0.1:9")
        assert "Authorization" not in bare._session.headers

    def test_service_down_is_transport_error(self):
        client = RemoteScorer("http://127.0.0.1:9", timeout_ms=200, retries=1, retry_wait_s=0.0)
        with pytest.raises(TransportError):
            client.vocab()

    def test_bad_request_is_protocol_error(self, backend, server):
        client = RemoteScorer(server.base_url)
        client.vocab()
        with pytest.raises(ProtocolError):
            client.next_token_logprobs("C", [[999_999]])


class TestTruncatedRows:
    def test_expansion_keeps_top_and_residual(self, backend, server):
        full = RemoteScorer(server.base_url)
        truncated = RemoteScorer(server.base_url, truncate_top=3)
        vocab = backend.vocab()
        condition = "<mask_x> is founder of <mask_y>."
        prefix = [vocab.id_of("Steve")]
        full_row = full.next_token_logprobs(condition, [prefix])[0]
        trunc_row = truncated.next_token_logprobs(condition, [prefix])[0]
        assert len(trunc_row) == len(vocab) + 1
        top_ids = sorted(range(len(vocab)), key=lambda i: (-full_row[i], i))[:3]
        for tok in top_ids:
            assert trunc_row[tok] == pytest.approx(full_row[tok], abs=1e-12)
        rest = [full_row[i] for i in range(len(vocab)) if i not in top_ids]
        assert trunc_row[len(vocab)] == pytest.approx(logsumexp(rest), abs=1e-9)
        # the widened row still carries the full probability mass
        assert abs(logsumexp(trunc_row)) <= 1e-9

    def test_unlisted_tokens_are_unreachable(self, backend, server):
        truncated = RemoteScorer(server.base_url, truncate_top=2)
        vocab = backend.vocab()
        row = truncated.next_token_logprobs("<mask_x> is founder of <mask_y>.", [[]])[0]
        finite = [i for i in range(len(vocab)) if row[i] != -np.inf]
        assert len(finite) == 2

    def test_decoding_over_truncated_rows(self, backend, server):
        # with a generous cutoff the decoder never needs the pruned tail,
        # so truncated serving reproduces the full-row decode exactly
        from rulebeam.atoms import Atom
        from rulebeam.instantiate import InstantiationConfig, generate_instantiations

        cfg = InstantiationConfig(
            k=2, beam_groups=8, diversity_penalty=0.0, max_len=6,
        )
        premise = Atom("[X] is founder of [Y].")
        full = generate_instantiations(premise, backend, cfg)
        truncated_client = RemoteScorer(server.base_url, truncate_top=6)
        truncated = generate_instantiations(premise, truncated_client, cfg)
        assert [(i.x_surface, i.y_surface) for i in truncated] == [
            (i.x_surface, i.y_surface) for i in full
        ]
