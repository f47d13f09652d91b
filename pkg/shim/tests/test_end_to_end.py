"""Whole-pipeline check: induction through the served wire protocol.

The same premises are induced twice, once with the in-process n-gram
backend and once with the remote backend pointed at this shim replaying
the same tables; the rules files must be byte-identical.
"""

from __future__ import annotations

import json

from lmshim.replay import ReplayBackend
from lmshim.server import ShimServer

from rulebeam.cli import main
from rulebeam.scoring import NgramScorer

PIPELINE_CORPUS = [
    ("<mask_x> is founder of <mask_y>.", "Steve Jobs <sep> Apple </s>".split()),
    ("<mask_x> is founder of <mask_y>.", "Bill Gates <sep> Microsoft </s>".split()),
    ("Steve Jobs <mask> Apple.", "[X] founded [Y] . </s>".split()),
    ("Steve Jobs <mask> Apple.", "[X] leads [Y] . </s>".split()),
    ("Bill Gates <mask> Microsoft.", "[X] founded [Y] . </s>".split()),
]

DECODE_SETTINGS = {
    "instantiation": {"k": 2, "beam_groups": 16, "diversity_penalty": 0.0, "max_len": 6},
    "sbs": {"k": 4, "max_len": 5, "beam_groups": 1, "diversity_penalty": 0.0},
}


def test_induce_over_the_wire_matches_in_process(tmp_path):
    tables = tmp_path / "tables.json"
    NgramScorer.train(PIPELINE_CORPUS, order=3, alpha=0.2).save(tables)
    premises = tmp_path / "premises.txt"
    premises.write_text("[X] is founder of [Y].\n", encoding="utf-8")

    local_config = tmp_path / "local.json"
    local_config.write_text(
        json.dumps(
            {
                "scorer": {
                    "backend": "ngram",
                    "order": 3,
                    "alpha": 0.2,
                    "model_path": str(tables),
                },
                "output_dir": str(tmp_path / "runs"),
                **DECODE_SETTINGS,
            }
        ),
        encoding="utf-8",
    )
    assert main(
        ["induce", "--config", str(local_config), "--premises", str(premises),
         "--run-id", "local"]
    ) == 0

    with ShimServer(ReplayBackend(tables), max_batch=64) as server:
        remote_config = tmp_path / "remote.json"
        remote_config.write_text(
            json.dumps(
                {
                    "scorer": {
                        "backend": "remote",
                        "base_url": server.base_url,
                        "timeout_ms": 5000,
                        "retries": 1,
                    },
                    "output_dir": str(tmp_path / "runs"),
                    **DECODE_SETTINGS,
                }
            ),
            encoding="utf-8",
        )
        assert main(
            ["induce", "--config", str(remote_config), "--premises", str(premises),
             "--run-id", "remote"]
        ) == 0

    local_rules = (tmp_path / "runs" / "local" / "rules.jsonl").read_bytes()
    remote_rules = (tmp_path / "runs" / "remote" / "rules.jsonl").read_bytes()
    assert local_rules and local_rules == remote_rules
    first = json.loads(local_rules.splitlines()[0])
    assert first["hypothesis"] == "[X] founded [Y]."
