"""Conditional language-model scorer contract and the n-gram reference backend.

A scorer answers three questions:

* ``vocab()`` - the token space decoding happens in;
* ``next_token_logprobs(condition, prefixes)`` - one log-normalized row of
  next-token log-probabilities per prefix, conditioned on an opaque
  condition string (a rendered prompt);
* ``detokenize(tokens)`` - surface text for a token-id sequence.

The n-gram backend is a deterministic desk-scale stand-in for a trained
sequence model: an order-``n`` model with add-alpha smoothing keyed on the
exact condition string, backing off to a pooled model over all conditions
when a condition was never seen.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import ParameterError, VocabularyError
from .vocab import EOS_PIECE, ScorerVocab, build_vocab, join_pieces, word_tokenize

LogProbRow = np.ndarray

NGRAM_TABLE_FORMAT = "ngram-table-v1"


class Scorer(Protocol):
    def vocab(self) -> ScorerVocab: ...

    def next_token_logprobs(
        self, condition: str, prefixes: Sequence[Sequence[int]]
    ) -> list[LogProbRow]: ...

    def detokenize(self, tokens: Sequence[int]) -> str: ...


@dataclass
class NgramScorer:
    """Add-alpha smoothed conditional n-gram tables over a fixed vocabulary.

    Smoothing mass is spread over the support: the token types observed in
    training targets plus the end-of-sequence token.  Tokens outside the
    support have exactly zero probability (``-inf`` log-probability).
    """

    order: int
    alpha: float
    _vocab: ScorerVocab
    support: tuple[int, ...]
    cond_tables: dict[str, dict[tuple[int, ...], dict[int, int]]]
    pooled_table: dict[tuple[int, ...], dict[int, int]]

    @classmethod
    def train(
        cls,
        corpus: Sequence[tuple[str, Sequence[str]]],
        order: int,
        alpha: float,
    ) -> "NgramScorer":
        """Count (condition, history, token) triples from piece sequences."""
        if order < 1:
            raise ParameterError(f"order must be >= 1, got {order}")
        if alpha <= 0:
            raise ParameterError(f"alpha must be > 0, got {alpha}")
        if not corpus:
            raise ParameterError("training corpus is empty")
        pieces: list[str] = []
        for _, target in corpus:
            pieces.extend(target)
        vocab = build_vocab(pieces)
        support = sorted({vocab.id_of(p) for p in pieces} | {vocab.eos_id})
        cond_tables: dict[str, dict[tuple[int, ...], dict[int, int]]] = {}
        pooled: dict[tuple[int, ...], dict[int, int]] = {}
        for condition, target in corpus:
            table = cond_tables.setdefault(condition, {})
            ids = vocab.encode(target)
            padded = [vocab.bos_id] * (order - 1) + ids
            for pos, tok in enumerate(ids):
                hist = tuple(padded[pos : pos + order - 1])
                for tab in (table, pooled):
                    counts = tab.setdefault(hist, {})
                    counts[tok] = counts.get(tok, 0) + 1
        return cls(order, alpha, vocab, tuple(support), cond_tables, pooled)

    def vocab(self) -> ScorerVocab:
        return self._vocab

    def next_token_logprobs(
        self, condition: str, prefixes: Sequence[Sequence[int]]
    ) -> list[LogProbRow]:
        table = self.cond_tables.get(condition, self.pooled_table)
        rows: list[LogProbRow] = []
        for prefix in prefixes:
            for tok in prefix:
                if not 0 <= tok < len(self._vocab):
                    raise VocabularyError(f"unknown token id in prefix: {tok}")
            hist = self._history(prefix)
            counts = table.get(hist, {})
            total = sum(counts.values())
            denom = total + self.alpha * len(self.support)
            row = np.full(len(self._vocab), -np.inf)
            for tok in self.support:
                row[tok] = math.log((counts.get(tok, 0) + self.alpha) / denom)
            rows.append(row)
        return rows

    def detokenize(self, tokens: Sequence[int]) -> str:
        return join_pieces(self._vocab.decode(tokens))

    def _history(self, prefix: Sequence[int]) -> tuple[int, ...]:
        if self.order == 1:
            return ()
        padded = [self._vocab.bos_id] * (self.order - 1) + list(prefix)
        return tuple(padded[len(padded) - (self.order - 1) :])

    # -- persistence (the table file the replay service also reads) ---------

    def save(self, path: str | Path) -> None:
        payload = {
            "format": NGRAM_TABLE_FORMAT,
            "order": self.order,
            "alpha": self.alpha,
            "pieces": list(self._vocab.pieces),
            "reserved": {
                "bos_id": self._vocab.bos_id,
                "eos_id": self._vocab.eos_id,
                "sep_id": self._vocab.sep_id,
                "x_id": self._vocab.x_id,
                "y_id": self._vocab.y_id,
                "z_id": self._vocab.z_id,
            },
            "support": list(self.support),
            "conditions": {
                cond: {
                    " ".join(str(t) for t in hist): {str(k): v for k, v in counts.items()}
                    for hist, counts in table.items()
                }
                for cond, table in self.cond_tables.items()
            },
        }
        Path(path).write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "NgramScorer":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != NGRAM_TABLE_FORMAT:
            raise ParameterError(f"not an n-gram table file: {path}")
        reserved = payload["reserved"]
        vocab = ScorerVocab(
            pieces=tuple(payload["pieces"]),
            bos_id=reserved["bos_id"],
            eos_id=reserved["eos_id"],
            sep_id=reserved["sep_id"],
            x_id=reserved["x_id"],
            y_id=reserved["y_id"],
            z_id=reserved["z_id"],
        )
        cond_tables: dict[str, dict[tuple[int, ...], dict[int, int]]] = {}
        pooled: dict[tuple[int, ...], dict[int, int]] = {}
        for cond, table in payload["conditions"].items():
            parsed: dict[tuple[int, ...], dict[int, int]] = {}
            for hist_key, counts in table.items():
                hist = tuple(int(t) for t in hist_key.split()) if hist_key else ()
                parsed[hist] = {int(k): int(v) for k, v in counts.items()}
                pooled_counts = pooled.setdefault(hist, {})
                for tok, count in parsed[hist].items():
                    pooled_counts[tok] = pooled_counts.get(tok, 0) + count
            cond_tables[cond] = parsed
        return cls(
            order=int(payload["order"]),
            alpha=float(payload["alpha"]),
            _vocab=vocab,
            support=tuple(int(t) for t in payload["support"]),
            cond_tables=cond_tables,
            pooled_table=pooled,
        )


def train_ngram(
    corpus: Sequence[tuple[str, Sequence[str]]], order: int, alpha: float
) -> NgramScorer:
    """Module-level alias for :meth:`NgramScorer.train`."""
    return NgramScorer.train(corpus, order, alpha)


def training_pairs_from_masked_examples(
    records: Iterable[dict],
) -> list[tuple[str, list[str]]]:
    """Turn corpus-builder records into (condition, target-pieces) pairs.

    The model input becomes the condition string and the target text is
    tokenized with an explicit end-of-sequence piece appended.
    """
    pairs: list[tuple[str, list[str]]] = []
    for rec in records:
        pairs.append((rec["input_text"], word_tokenize(rec["target_text"]) + [EOS_PIECE]))
    return pairs
