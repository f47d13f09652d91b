"""Scorer vocabulary and the word-level tokenization convention.

Decoding runs in a shared placeholder space: target sequences carry the
reserved ``[X]`` / ``[Y]`` / ``<z>`` tokens instead of entity surface
forms, so the same beams stay well-defined across instantiations.  The
condition string (which does carry surfaces) is never tokenized; backends
key on it verbatim.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .atoms import X_PLACEHOLDER, Y_PLACEHOLDER, Z_PLACEHOLDER
from .errors import VocabularyError

BOS_PIECE = "<s>"
EOS_PIECE = "</s>"
SEP_PIECE = "<sep>"

RESERVED_PIECES = (BOS_PIECE, EOS_PIECE, SEP_PIECE, X_PLACEHOLDER, Y_PLACEHOLDER, Z_PLACEHOLDER)

# Reserved markers tokenize atomically; everything else splits into word
# characters or single punctuation marks.
_TOKEN_RE = re.compile(
    r"(?:"
    + "|".join(re.escape(p) for p in RESERVED_PIECES)
    + r")|\w+|[^\w\s]",
)

_NO_SPACE_BEFORE = {".", ",", "!", "?", ";", ":", "%", ")", "]", "}"}


@dataclass(frozen=True)
class ScorerVocab:
    """Contiguously numbered token pieces plus the reserved-token ids."""

    pieces: tuple[str, ...]
    bos_id: int
    eos_id: int
    sep_id: int
    x_id: int
    y_id: int
    z_id: int

    def __post_init__(self) -> None:
        if len(set(self.pieces)) != len(self.pieces):
            raise VocabularyError("vocabulary pieces must be unique")
        for piece in RESERVED_PIECES:
            if self.pieces.count(piece) != 1:
                raise VocabularyError(f"reserved piece {piece!r} must appear exactly once")

    def __len__(self) -> int:
        return len(self.pieces)

    @property
    def entries(self) -> list[tuple[int, str]]:
        return list(enumerate(self.pieces))

    def id_of(self, piece: str) -> int:
        try:
            return self.pieces.index(piece)
        except ValueError:
            raise VocabularyError(f"unknown piece: {piece!r}") from None

    def piece_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.pieces):
            raise VocabularyError(f"unknown token id: {token_id}")
        return self.pieces[token_id]

    def encode(self, pieces: Sequence[str]) -> list[int]:
        return [self.id_of(p) for p in pieces]

    def decode(self, token_ids: Sequence[int]) -> list[str]:
        return [self.piece_of(t) for t in token_ids]


def build_vocab(extra_pieces: Sequence[str]) -> ScorerVocab:
    """Reserved pieces first (fixed order), then sorted novel pieces."""
    seen = set(RESERVED_PIECES)
    novel = sorted({p for p in extra_pieces if p not in seen})
    pieces = tuple(RESERVED_PIECES) + tuple(novel)
    return ScorerVocab(
        pieces=pieces,
        bos_id=0,
        eos_id=1,
        sep_id=2,
        x_id=3,
        y_id=4,
        z_id=5,
    )


def word_tokenize(text: str) -> list[str]:
    """Whitespace/punctuation split keeping reserved markers atomic."""
    return _TOKEN_RE.findall(text)


def join_pieces(pieces: Sequence[str]) -> str:
    """Space-join with closing punctuation attached to the previous piece."""
    out: list[str] = []
    for piece in pieces:
        if out and piece in _NO_SPACE_BEFORE:
            out[-1] += piece
        else:
            out.append(piece)
    return " ".join(out)
