"""HTTP client for a scorer service speaking the /v1 wire protocol.

Endpoints (JSON over HTTP, UTF-8):

* ``GET  /v1/vocab``      -> ``{"entries": [{"id", "piece"}...], "bos_id",
  "eos_id", "sep_id", "x_id", "y_id", "z_id"}``
* ``POST /v1/logprobs``   -> ``{"rows": [[float | null] * |V| ...]}``; each
  row is log-normalized and ``null`` encodes log(0).
* ``POST /v1/detokenize`` -> ``{"text": str}``

With ``truncate_top=m`` the logprobs request asks the service for the top
``m`` entries per row plus a residual mass bucket; the client widens each
row by one slot holding the residual, which decoders must never extend
into (they only consider token ids below the vocabulary size).

Malformed requests come back as HTTP 400 with ``{"error": str}``.  If the
``RULEBEAM_SCORER_TOKEN`` environment variable is set it is sent as a
bearer token.
"""

from __future__ import annotations

import os
import time
from typing import Any, Sequence

import numpy as np
import requests

from .errors import ProtocolError, TransportError, VocabularyError
from .scoring import LogProbRow
from .vocab import ScorerVocab

AUTH_TOKEN_ENV = "RULEBEAM_SCORER_TOKEN"


class RemoteScorer:
    """Scorer backend proxying a remote service; safe for concurrent reads."""

    def __init__(
        self,
        base_url: str,
        timeout_ms: int = 5000,
        retries: int = 2,
        truncate_top: int | None = None,
        retry_wait_s: float = 0.1,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_ms / 1000.0
        self.retries = retries
        self.truncate_top = truncate_top
        self.retry_wait_s = retry_wait_s
        self._session = requests.Session()
        token = os.environ.get(AUTH_TOKEN_ENV)
        if token:
            self._session.headers["Authorization"] = f"Bearer {token}"
        self._vocab: ScorerVocab | None = None

    # -- scorer contract -----------------------------------------------------

    def vocab(self) -> ScorerVocab:
        if self._vocab is None:
            payload = self._request("GET", "/v1/vocab")
            self._vocab = _parse_vocab(payload)
        return self._vocab

    def next_token_logprobs(
        self, condition: str, prefixes: Sequence[Sequence[int]]
    ) -> list[LogProbRow]:
        if not prefixes:
            return []
        size = len(self.vocab())
        body: dict[str, Any] = {
            "condition": condition,
            "prefixes": [list(p) for p in prefixes],
        }
        if self.truncate_top is not None:
            body["truncate_top"] = self.truncate_top
        payload = self._request("POST", "/v1/logprobs", body)
        rows = payload.get("rows")
        if not isinstance(rows, list) or len(rows) != len(prefixes):
            raise ProtocolError("logprobs response must carry one row per prefix")
        if self.truncate_top is not None:
            return [_expand_truncated_row(row, size) for row in rows]
        return [_parse_full_row(row, size) for row in rows]

    def detokenize(self, tokens: Sequence[int]) -> str:
        size = len(self.vocab())
        for tok in tokens:
            if not 0 <= tok < size:
                raise VocabularyError(f"unknown token id: {tok}")
        payload = self._request("POST", "/v1/detokenize", {"tokens": list(tokens)})
        text = payload.get("text")
        if not isinstance(text, str):
            raise ProtocolError("detokenize response must carry a text field")
        return text

    # -- transport -----------------------------------------------------------

    def _request(self, method: str, path: str, body: dict | None = None) -> dict:
        url = self.base_url + path
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._session.request(method, url, json=body, timeout=self.timeout_s)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_exc = exc
                if attempt < self.retries:
                    time.sleep(self.retry_wait_s)
                continue
            return _parse_response(resp)
        raise TransportError(f"scorer service unreachable at {url}: {last_exc}")


def _parse_response(resp: requests.Response) -> dict:
    if resp.status_code == 400:
        try:
            message = resp.json().get("error", "")
        except ValueError:
            message = resp.text
        raise ProtocolError(f"service rejected request: {message}")
    if resp.status_code != 200:
        raise ProtocolError(f"unexpected status {resp.status_code}: {resp.text[:200]}")
    try:
        payload = resp.json()
    except ValueError as exc:
        raise ProtocolError(f"response is not JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ProtocolError("response payload must be a JSON object")
    return payload


def _parse_vocab(payload: dict) -> ScorerVocab:
    try:
        entries = payload["entries"]
        pieces = [""] * len(entries)
        for entry in entries:
            pieces[int(entry["id"])] = entry["piece"]
        return ScorerVocab(
            pieces=tuple(pieces),
            bos_id=int(payload["bos_id"]),
            eos_id=int(payload["eos_id"]),
            sep_id=int(payload["sep_id"]),
            x_id=int(payload["x_id"]),
            y_id=int(payload["y_id"]),
            z_id=int(payload["z_id"]),
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed vocab response: {exc}") from exc


def _parse_full_row(row: list, size: int) -> LogProbRow:
    if not isinstance(row, list) or len(row) != size:
        raise ProtocolError(f"row length must equal vocabulary size {size}")
    out = np.full(size, -np.inf)
    for idx, value in enumerate(row):
        if value is not None:
            out[idx] = float(value)
    return out


def _expand_truncated_row(row: dict, size: int) -> LogProbRow:
    try:
        top = row["top"]
        residual = row["residual"]
    except (KeyError, TypeError) as exc:
        raise ProtocolError(f"malformed truncated row: {exc}") from exc
    out = np.full(size + 1, -np.inf)
    for entry in top:
        tok, logprob = int(entry[0]), entry[1]
        if not 0 <= tok < size:
            raise ProtocolError(f"truncated row names unknown token id {tok}")
        if logprob is not None:
            out[tok] = float(logprob)
    if residual is not None:
        out[size] = float(residual)
    return out
