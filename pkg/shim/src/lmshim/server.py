"""HTTP service exposing a backend behind the /v1 wire protocol.

Endpoints: ``GET /v1/vocab``, ``POST /v1/logprobs``, ``POST
/v1/detokenize`` and ``POST /v1/health`` (GET also answered).  Rows are
log-normalized over the full vocabulary with ``null`` for log(0);
requests exceeding the configured batch size, unknown token ids and
malformed bodies come back as HTTP 400 with ``{"error": ...}``.
Handling is threaded; backends are read-only after construction.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Protocol, Sequence

from . import wire


class Backend(Protocol):
    model_name: str

    def vocab_fields(self) -> tuple[list[str], dict[str, int]]: ...

    def logprob_rows(
        self, condition: str, prefixes: Sequence[Sequence[int]]
    ) -> list[list[float]]: ...

    def detokenize(self, tokens: Sequence[int]) -> str: ...


def _make_handler(backend: Backend, max_batch: int):
    pieces, reserved = backend.vocab_fields()
    vocab_body = wire.vocab_payload(pieces, **reserved)

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _error(self, message: str) -> None:
            self._send(400, {"error": message})

        def do_GET(self):
            if self.path == "/v1/vocab":
                self._send(200, vocab_body)
            elif self.path == "/v1/health":
                self._send(200, {"status": "ok", "model": backend.model_name})
            else:
                self._error(f"unknown path {self.path}")

        def do_POST(self):
            try:
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length).decode("utf-8")) if length else {}
            except (ValueError, UnicodeDecodeError):
                self._error("request body is not valid JSON")
                return
            if self.path == "/v1/health":
                self._send(200, {"status": "ok", "model": backend.model_name})
            elif self.path == "/v1/logprobs":
                self._logprobs(body)
            elif self.path == "/v1/detokenize":
                self._detokenize(body)
            else:
                self._error(f"unknown path {self.path}")

        def _logprobs(self, body: dict) -> None:
            condition = body.get("condition")
            prefixes = body.get("prefixes")
            if not isinstance(condition, str) or not isinstance(prefixes, list):
                self._error("need a condition string and a prefixes list")
                return
            if len(prefixes) > max_batch:
                self._error(f"batch of {len(prefixes)} exceeds the limit of {max_batch}")
                return
            if not all(
                isinstance(p, list) and all(isinstance(t, int) for t in p) for p in prefixes
            ):
                self._error("prefixes must be lists of token ids")
                return
            try:
                rows = backend.logprob_rows(condition, prefixes)
            except ValueError as exc:
                self._error(str(exc))
                return
            top = body.get("truncate_top")
            if top is None:
                self._send(
                    200, {"rows": [[wire.encode_logprob(v) for v in row] for row in rows]}
                )
            elif isinstance(top, int) and top >= 1:
                self._send(200, {"rows": [wire.truncate_row(row, top) for row in rows]})
            else:
                self._error("truncate_top must be a positive integer")

        def _detokenize(self, body: dict) -> None:
            tokens = body.get("tokens")
            if not isinstance(tokens, list) or not all(isinstance(t, int) for t in tokens):
                self._error("need a tokens list of ids")
                return
            try:
                self._send(200, {"text": backend.detokenize(tokens)})
            except ValueError as exc:
                self._error(str(exc))

    return Handler


class ShimServer:
    """Owns the listening socket; ``serve_forever`` blocks, or use as a
    context manager to run in a background thread (tests do this)."""

    def __init__(self, backend: Backend, host: str = "127.0.0.1", port: int = 0,
                 max_batch: int = 64):
        self._server = ThreadingHTTPServer((host, port), _make_handler(backend, max_batch))
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def __enter__(self) -> "ShimServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
