"""Replay backend: serve a persisted n-gram table file verbatim.

The table file (``ngram-table-v1``) carries the vocabulary, the reserved
ids, the smoothing support, and raw per-condition count tables.  Rows are
recomputed from the counts with add-alpha smoothing over the support;
unseen conditions fall back to the pooled counts over all conditions.
The arithmetic below is part of the file contract: any producer of these
tables must get bit-identical rows back from the shim.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

from .wire import NEG_INF, join_pieces

TABLE_FORMAT = "ngram-table-v1"


class ReplayError(ValueError):
    pass


class ReplayBackend:
    def __init__(self, path: str | Path):
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ReplayError(f"cannot read table file {path}: {exc}") from exc
        if payload.get("format") != TABLE_FORMAT:
            raise ReplayError(f"{path} is not a {TABLE_FORMAT} file")
        self.path = str(path)
        self.order = int(payload["order"])
        self.alpha = float(payload["alpha"])
        self.pieces: list[str] = list(payload["pieces"])
        self.reserved: dict[str, int] = {k: int(v) for k, v in payload["reserved"].items()}
        self.support: list[int] = [int(t) for t in payload["support"]]
        self.cond_tables: dict[str, dict[tuple[int, ...], dict[int, int]]] = {}
        self.pooled: dict[tuple[int, ...], dict[int, int]] = {}
        for condition, table in payload["conditions"].items():
            parsed: dict[tuple[int, ...], dict[int, int]] = {}
            for hist_key, counts in table.items():
                hist = tuple(int(t) for t in hist_key.split()) if hist_key else ()
                parsed[hist] = {int(k): int(v) for k, v in counts.items()}
                pooled_counts = self.pooled.setdefault(hist, {})
                for tok, count in parsed[hist].items():
                    pooled_counts[tok] = pooled_counts.get(tok, 0) + count
            self.cond_tables[condition] = parsed

    @property
    def model_name(self) -> str:
        return f"replay:{self.path}"

    def vocab_fields(self) -> tuple[list[str], dict[str, int]]:
        return self.pieces, self.reserved

    def logprob_rows(
        self, condition: str, prefixes: Sequence[Sequence[int]]
    ) -> list[list[float]]:
        table = self.cond_tables.get(condition, self.pooled)
        size = len(self.pieces)
        rows: list[list[float]] = []
        for prefix in prefixes:
            for tok in prefix:
                if not 0 <= tok < size:
                    raise ReplayError(f"unknown token id in prefix: {tok}")
            counts = table.get(self._history(prefix), {})
            total = sum(counts.values())
            denom = total + self.alpha * len(self.support)
            row = [NEG_INF] * size
            for tok in self.support:
                row[tok] = math.log((counts.get(tok, 0) + self.alpha) / denom)
            rows.append(row)
        return rows

    def detokenize(self, tokens: Sequence[int]) -> str:
        size = len(self.pieces)
        out = []
        for tok in tokens:
            if not 0 <= tok < size:
                raise ReplayError(f"unknown token id: {tok}")
            out.append(self.pieces[tok])
        return join_pieces(out)

    def _history(self, prefix: Sequence[int]) -> tuple[int, ...]:
        if self.order == 1:
            return ()
        bos = self.reserved["bos_id"]
        padded = [bos] * (self.order - 1) + list(prefix)
        return tuple(padded[len(padded) - (self.order - 1) :])
