"""Shim command line: serve a model or finetune one.

Config file (JSON):

    {
      "model": {"kind": "replay" | "seq2seq", "path": "..."},
      "host": "127.0.0.1",
      "port": 8731,
      "max_batch": 64,
      "finetune": {
        "corpus_paths": ["instantiation.jsonl", ...],
        "output_path": "checkpoint.pt",
        "epochs": 3, "learning_rate": 5e-5, "batch_size": 512, "seed": 0
      }
    }

The full-scale training recipe (lr 5e-5, batch 512, 3 epochs) is the
default; desk-scale runs override it downward.  Only local files are
served; hub identifiers fail at startup because this environment has no
model hub access.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .finetune import FinetuneConfig, TrainingError, finetune
from .replay import ReplayBackend, ReplayError
from .seq2seq import Seq2SeqBackend
from .server import ShimServer


class ConfigError(ValueError):
    pass


def load_config(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return raw


def build_backend(model: dict):
    kind = model.get("kind")
    path = model.get("path")
    if kind == "replay":
        return ReplayBackend(path)
    if kind == "seq2seq":
        return Seq2SeqBackend(path)
    raise ConfigError(
        f"unsupported model kind {kind!r}: this shim serves local 'replay' tables "
        "or 'seq2seq' checkpoints; hub identifiers need network access this "
        "environment does not have"
    )


def cmd_serve(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    backend = build_backend(config.get("model", {}))
    server = ShimServer(
        backend,
        host=config.get("host", "127.0.0.1"),
        port=int(config.get("port", 8731)),
        max_batch=int(config.get("max_batch", 64)),
    )
    print(f"serving {backend.model_name} at {server.base_url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_finetune(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    section = config.get("finetune")
    if not isinstance(section, dict):
        raise ConfigError("config needs a finetune section")
    try:
        ft = FinetuneConfig(**section)
    except TypeError as exc:
        raise ConfigError(f"bad finetune section: {exc}") from exc
    report = finetune(ft)
    summary = {
        "steps": report.steps,
        "first_quarter_mean_loss": report.first_quarter_mean,
        "last_quarter_mean_loss": report.last_quarter_mean,
        "checkpoint": ft.output_path,
    }
    print(json.dumps(summary))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="lm-shim",
        description="Serve a sequence scorer behind the /v1 logprobs protocol.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config", required=True)
    serve.set_defaults(handler=cmd_serve)
    ft = sub.add_parser("finetune", help="train the tiny seq2seq model on corpora")
    ft.add_argument("--config", required=True)
    ft.set_defaults(handler=cmd_finetune)
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, ReplayError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
