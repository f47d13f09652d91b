"""In-process HTTP test double speaking the scorer wire protocol.

Wraps any in-process scorer behind ``/v1/vocab``, ``/v1/logprobs`` and
``/v1/detokenize`` so the remote client can be exercised without the real
service.  Rows serialize ``-inf`` as ``null``; the optional
``truncate_top`` request field returns per-row top lists plus a residual
mass bucket.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from rulebeam.errors import RulebeamError
from rulebeam.logmath import logsumexp

NEG_INF = float("-inf")


def _encode(value: float) -> float | None:
    return None if value == NEG_INF else float(value)


def make_handler(scorer, fail_requests: set[str] | None = None):
    vocab = scorer.vocab()

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # keep test output quiet
            pass

        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _body(self) -> dict:
            length = int(self.headers.get("Content-Length", 0))
            return json.loads(self.rfile.read(length).decode("utf-8"))

        def do_GET(self):
            if self.path != "/v1/vocab":
                self._send(400, {"error": f"unknown path {self.path}"})
                return
            self._send(
                200,
                {
                    "entries": [{"id": i, "piece": p} for i, p in vocab.entries],
                    "bos_id": vocab.bos_id,
                    "eos_id": vocab.eos_id,
                    "sep_id": vocab.sep_id,
                    "x_id": vocab.x_id,
                    "y_id": vocab.y_id,
                    "z_id": vocab.z_id,
                },
            )

        def do_POST(self):
            if fail_requests and self.path in fail_requests:
                self._send(500, {"error": "injected failure"})
                return
            try:
                body = self._body()
            except (ValueError, KeyError):
                self._send(400, {"error": "body is not valid JSON"})
                return
            if self.path == "/v1/logprobs":
                self._logprobs(body)
            elif self.path == "/v1/detokenize":
                self._detokenize(body)
            else:
                self._send(400, {"error": f"unknown path {self.path}"})

        def _logprobs(self, body: dict) -> None:
            condition = body.get("condition")
            prefixes = body.get("prefixes")
            if not isinstance(condition, str) or not isinstance(prefixes, list):
                self._send(400, {"error": "need condition and prefixes"})
                return
            try:
                rows = scorer.next_token_logprobs(condition, prefixes)
            except RulebeamError as exc:
                self._send(400, {"error": str(exc)})
                return
            top = body.get("truncate_top")
            if top is None:
                self._send(200, {"rows": [[_encode(v) for v in row] for row in rows]})
                return
            payload = []
            for row in rows:
                order = sorted(range(len(row)), key=lambda i: (-row[i], i))
                head, tail = order[:top], order[top:]
                residual = logsumexp([row[i] for i in tail]) if tail else NEG_INF
                payload.append(
                    {
                        "top": [[i, _encode(float(row[i]))] for i in head],
                        "residual": _encode(residual),
                    }
                )
            self._send(200, {"rows": payload})

        def _detokenize(self, body: dict) -> None:
            tokens = body.get("tokens")
            if not isinstance(tokens, list):
                self._send(400, {"error": "need a tokens list"})
                return
            try:
                self._send(200, {"text": scorer.detokenize(tokens)})
            except RulebeamError as exc:
                self._send(400, {"error": str(exc)})

    return Handler


class ScorerServer:
    """Threaded wire-protocol server around an in-process scorer."""

    def __init__(self, scorer, fail_requests: set[str] | None = None):
        self._server = ThreadingHTTPServer(
            ("127.0.0.1", 0), make_handler(scorer, fail_requests)
        )
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def __enter__(self) -> "ScorerServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)
