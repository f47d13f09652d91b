"""Wire-protocol conventions shared by every backend this shim serves.

These are pinned by the protocol, not by any one implementation:

* tokenization splits on whitespace and punctuation with reserved markers
  kept atomic; detokenization space-joins and reattaches closing
  punctuation;
* log-probability rows are normalized over the full vocabulary and encode
  log(0) as JSON ``null``;
* the optional ``truncate_top`` request field turns a row into its top-m
  ``(id, logprob)`` entries plus one residual mass bucket.
"""

from __future__ import annotations

import math
import re
from typing import Sequence

NEG_INF = float("-inf")

PAD_PIECE = "<pad>"
BOS_PIECE = "<s>"
EOS_PIECE = "</s>"
SEP_PIECE = "<sep>"
X_PIECE = "[X]"
Y_PIECE = "[Y]"
Z_PIECE = "<z>"
UNK_PIECE = "<unk>"
MASK_PIECES = ("<mask>", "<mask_x>", "<mask_y>", "<mask_z>")

ATOMIC_MARKERS = (
    PAD_PIECE,
    BOS_PIECE,
    EOS_PIECE,
    SEP_PIECE,
    X_PIECE,
    Y_PIECE,
    Z_PIECE,
    UNK_PIECE,
) + MASK_PIECES

_TOKEN_RE = re.compile(
    "(?:" + "|".join(re.escape(m) for m in ATOMIC_MARKERS) + r")|\w+|[^\w\s]"
)

_NO_SPACE_BEFORE = {".", ",", "!", "?", ";", ":", "%", ")", "]", "}"}


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def join_pieces(pieces: Sequence[str]) -> str:
    out: list[str] = []
    for piece in pieces:
        if out and piece in _NO_SPACE_BEFORE:
            out[-1] += piece
        else:
            out.append(piece)
    return " ".join(out)


def encode_logprob(value: float) -> float | None:
    return None if value == NEG_INF else float(value)


def logsumexp(values: Sequence[float]) -> float:
    top = max(values, default=NEG_INF)
    if top == NEG_INF:
        return NEG_INF
    return top + math.log(sum(math.exp(v - top) for v in values))


def truncate_row(row: Sequence[float], top: int) -> dict:
    order = sorted(range(len(row)), key=lambda i: (-row[i], i))
    head, tail = order[:top], order[top:]
    residual = logsumexp([row[i] for i in tail]) if tail else NEG_INF
    return {
        "top": [[i, encode_logprob(row[i])] for i in head],
        "residual": encode_logprob(residual),
    }


def vocab_payload(
    pieces: Sequence[str],
    bos_id: int,
    eos_id: int,
    sep_id: int,
    x_id: int,
    y_id: int,
    z_id: int,
) -> dict:
    return {
        "entries": [{"id": i, "piece": p} for i, p in enumerate(pieces)],
        "bos_id": bos_id,
        "eos_id": eos_id,
        "sep_id": sep_id,
        "x_id": x_id,
        "y_id": y_id,
        "z_id": z_id,
    }
