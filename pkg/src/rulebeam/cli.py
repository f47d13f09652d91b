"""Command-line front end wiring the pipeline into reproducible runs.

Subcommands: ``induce``, ``instantiate``, ``build-corpus``, ``evaluate``,
``oracle-check``.  Runs that persist files write them under
``output_dir/<run-id>/`` (manifest.json first, results via temp-and-rename)
so identical configs and inputs give byte-identical result files.

Exit codes: 0 on success, 1 on total failure, 2 on usage errors.  A bearer
token for the remote scorer backend is read from ``RULEBEAM_SCORER_TOKEN``.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import __version__
from .atoms import Atom, Instantiation, rule_record
from .config import RunConfig
from .corpus import (
    DEFAULT_ABBREVIATIONS,
    RuleBasedTagger,
    iter_documents,
    load_abbreviations,
    load_gazetteer,
    write_corpora,
)
from .datasets import load_gold_hypotheses
from .errors import OracleTooLargeError, RulebeamError
from .instantiate import InstantiationConfig, generate_instantiations, marginalize_to_x
from .metrics import coverage_eval
from .sbs import SbsConfig, decode_shared_beams, exhaustive_rule_oracle, supported_beam_search
from .scoring import NgramScorer

ORACLE_FIXTURE_RESOURCE = "oracle_fixture.json"


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except RulebeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rulebeam",
        description="Induce open rules from a conditional language-model scorer.",
    )
    parser.add_argument("--version", action="version", version=f"rulebeam {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    induce = sub.add_parser("induce", help="premises file -> ranked rules JSONL")
    induce.add_argument("--config", required=True, help="run config JSON file")
    induce.add_argument("--premises", required=True, help="file with one premise template per line")
    induce.add_argument("--run-id", default=None, help="override the derived run id")
    induce.add_argument("--jobs", type=int, default=1, help="premises processed concurrently")
    induce.set_defaults(handler=cmd_induce)

    inst = sub.add_parser("instantiate", help="premise -> top-k instantiations JSONL")
    inst.add_argument("--config", required=True)
    inst.add_argument("--premise", required=True, help="premise template, e.g. '[X] is founder of [Y].'")
    inst.add_argument("--run-id", default=None)
    inst.set_defaults(handler=cmd_instantiate)

    build = sub.add_parser("build-corpus", help="raw text -> weak-supervision corpora")
    build.add_argument("inputs", nargs="+", help="plain-text or JSONL {'text': ...} files")
    build.add_argument("--output-dir", required=True)
    build.add_argument("--gazetteer", default=None, help="phrase<TAB>label file for the tagger")
    build.add_argument(
        "--abbreviations", default=None, help="file of non-splitting abbreviations, one per line"
    )
    build.add_argument("--new-variable", action="store_true", help="emit x-only relation-masked targets")
    build.set_defaults(handler=cmd_build_corpus)

    ev = sub.add_parser("evaluate", help="gold + rules files -> metric report JSON")
    ev.add_argument("--gold", required=True, help="JSONL {'premise', 'hypotheses': [...]}")
    ev.add_argument("--rules", required=True, help="rules JSONL as written by induce")
    ev.add_argument("--output", default=None, help="write the report here instead of stdout")
    ev.set_defaults(handler=cmd_evaluate)

    oracle = sub.add_parser("oracle-check", help="run decoder-vs-enumeration checks on fixtures")
    oracle.add_argument("--fixture", default=None, help="fixture JSON overriding the built-in one")
    oracle.add_argument("--max-len", type=int, default=None, help="override the fixture decode length")
    oracle.set_defaults(handler=cmd_oracle_check)
    return parser


# --- run directories and manifests -------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(f"{path.name}.tmp-{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


@dataclass
class RunContext:
    directory: Path
    manifest: dict

    def save_manifest(self) -> None:
        _atomic_write(self.directory / "manifest.json", json.dumps(self.manifest, indent=2) + "\n")


def _open_run(config: RunConfig, command: str, run_id: str | None, inputs: dict) -> RunContext:
    base = Path(config.output_dir)
    base.mkdir(parents=True, exist_ok=True)
    chosen = run_id or f"run-{config.config_hash()[:12]}"
    directory = base / chosen
    suffix = 1
    while directory.exists():
        suffix += 1
        directory = base / f"{chosen}-{suffix}"
    directory.mkdir(parents=True)
    ctx = RunContext(
        directory=directory,
        manifest={
            "run_id": directory.name,
            "command": command,
            "package_version": __version__,
            "config": config.canonical(),
            "config_hash": config.config_hash(),
            "inputs": inputs,
            "status": "running",
            "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        },
    )
    ctx.save_manifest()  # manifest exists before any result file is finalized
    return ctx


def _finish_run(ctx: RunContext, status: str, **extra) -> None:
    ctx.manifest.update(extra)
    ctx.manifest["status"] = status
    ctx.manifest["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    ctx.save_manifest()


# --- induce -------------------------------------------------------------------

def _read_premises(path: str) -> list[str]:
    lines = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return lines


def _induce_one(
    template: str,
    inst_scorer,
    app_scorer,
    inst_cfg: InstantiationConfig,
    sbs_cfg: SbsConfig,
) -> tuple[list[dict], int]:
    premise = Atom(template)
    instantiations = generate_instantiations(premise, inst_scorer, inst_cfg)
    if sbs_cfg.new_variable:
        instantiations = marginalize_to_x(instantiations)
    rules = supported_beam_search(premise, instantiations, app_scorer, sbs_cfg)
    return [rule_record(rule, instantiations) for rule in rules], len(instantiations)


def cmd_induce(args: argparse.Namespace) -> int:
    config = RunConfig.from_file(args.config)
    templates = _read_premises(args.premises)
    inst_scorer, app_scorer = config.build_scorers()
    ctx = _open_run(config, "induce", args.run_id, {"premises": str(args.premises)})

    started = time.monotonic()
    results: list[tuple[str, list[dict] | None, str | None]] = []
    jobs = max(1, args.jobs)

    def work(template: str):
        return _induce_one(template, inst_scorer, app_scorer, config.instantiation, config.sbs)

    if jobs == 1 or len(templates) <= 1:
        outcomes = []
        for template in templates:
            try:
                outcomes.append(work(template))
            except (RulebeamError, ValueError) as exc:
                outcomes.append(exc)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(work, template) for template in templates]
            outcomes = []
            for future in futures:
                try:
                    outcomes.append(future.result())
                except (RulebeamError, ValueError) as exc:
                    outcomes.append(exc)

    for template, outcome in zip(templates, outcomes):
        if isinstance(outcome, Exception):
            results.append((template, None, f"{type(outcome).__name__}: {outcome}"))
        else:
            results.append((template, outcome[0], None))

    lines = []
    premise_reports = []
    rules_written = 0
    for template, records, error in results:
        premise_reports.append(
            {"premise": template, "status": "ok" if error is None else "failed", "error": error}
        )
        for record in records or []:
            lines.append(json.dumps(record, ensure_ascii=False))
            rules_written += 1
    _atomic_write(ctx.directory / "rules.jsonl", "".join(line + "\n" for line in lines))

    failed = sum(1 for r in premise_reports if r["status"] == "failed")
    _finish_run(
        ctx,
        status="failed" if failed == len(templates) and templates else "completed",
        premises=premise_reports,
        counts={
            "premises_total": len(templates),
            "premises_failed": failed,
            "rules_written": rules_written,
        },
        timings={"wall_seconds": round(time.monotonic() - started, 3)},
    )
    print(ctx.directory / "rules.jsonl")
    if templates and failed == len(templates):
        print("error: every premise failed", file=sys.stderr)
        return 1
    return 0


# --- instantiate ----------------------------------------------------------------

def cmd_instantiate(args: argparse.Namespace) -> int:
    config = RunConfig.from_file(args.config)
    inst_scorer, _ = config.build_scorers()
    ctx = _open_run(config, "instantiate", args.run_id, {"premise": args.premise})
    started = time.monotonic()
    try:
        instantiations = generate_instantiations(
            Atom(args.premise), inst_scorer, config.instantiation
        )
    except RulebeamError as exc:
        _finish_run(ctx, status="failed", error=f"{type(exc).__name__}: {exc}")
        raise
    lines = [
        json.dumps(
            {"x": ins.x_surface, "y": ins.y_surface, "log_weight": ins.log_weight},
            ensure_ascii=False,
        )
        for ins in instantiations
    ]
    _atomic_write(ctx.directory / "instantiations.jsonl", "".join(l + "\n" for l in lines))
    _finish_run(
        ctx,
        status="completed",
        counts={"instantiations": len(instantiations)},
        timings={"wall_seconds": round(time.monotonic() - started, 3)},
    )
    print(ctx.directory / "instantiations.jsonl")
    return 0


# --- build-corpus -----------------------------------------------------------------

def cmd_build_corpus(args: argparse.Namespace) -> int:
    gazetteer = load_gazetteer(args.gazetteer) if args.gazetteer else {}
    abbreviations = (
        load_abbreviations(args.abbreviations) if args.abbreviations else DEFAULT_ABBREVIATIONS
    )
    tagger = RuleBasedTagger(gazetteer=gazetteer)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": "build-corpus",
        "package_version": __version__,
        "inputs": [str(p) for p in args.inputs],
        "new_variable": args.new_variable,
        "status": "running",
    }
    _atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    stats = write_corpora(
        iter_documents(args.inputs),
        tagger,
        out_dir,
        new_variable=args.new_variable,
        abbreviations=abbreviations,
    )
    manifest.update(stats=stats.to_json(), status="completed")
    _atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    print(json.dumps(stats.to_json()))
    return 0


# --- evaluate ------------------------------------------------------------------------

def cmd_evaluate(args: argparse.Namespace) -> int:
    gold = load_gold_hypotheses(args.gold)
    induced: dict[str, list[str]] = {}
    with open(args.rules, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            induced.setdefault(record["premise"], []).append(record["hypothesis"])
    pairs = [(premise, hypotheses) for premise, hypotheses in gold]
    report = coverage_eval(pairs, induced)
    payload = json.dumps(report.to_json(), indent=2) + "\n"
    if args.output:
        _atomic_write(Path(args.output), payload)
    else:
        sys.stdout.write(payload)
    return 0


# --- oracle-check -----------------------------------------------------------------------

def _load_fixture(path: str | None) -> dict:
    if path:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    return json.loads(
        resources.files("rulebeam.data").joinpath(ORACLE_FIXTURE_RESOURCE).read_text("utf-8")
    )


def cmd_oracle_check(args: argparse.Namespace) -> int:
    fixture = _load_fixture(args.fixture)
    scorer = NgramScorer.train(
        [(cond, pieces) for cond, pieces in fixture["scorer"]["corpus"]],
        order=fixture["scorer"]["order"],
        alpha=fixture["scorer"]["alpha"],
    )
    failures: list[str] = []

    spec = fixture["rule_decode"]
    vocab = scorer.vocab()
    ins_set = [
        Instantiation(r["x"], r.get("y"), r["log_weight"]) for r in spec["instantiations"]
    ]
    alphabet = [vocab.id_of(p) for p in spec["alphabet"]]
    max_len = args.max_len if args.max_len is not None else spec["max_len"]
    try:
        oracle = exhaustive_rule_oracle(ins_set, scorer, max_len, alphabet)
    except OracleTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    width = len(oracle)
    beams = decode_shared_beams(
        ins_set,
        scorer,
        SbsConfig(k=width, max_len=max_len, beam_groups=1, diversity_penalty=0.0),
    )
    k = spec["k"]
    decoded = [(b.tokens, b.global_log) for b in beams[:k]]
    if not _close_ranking(decoded, oracle[:k]):
        failures.append("decoder disagrees with live enumeration")
    for got, want in zip(decoded, spec["expected"]):
        want_tokens = tuple(vocab.id_of(p) for p in want["pieces"])
        if got[0] != want_tokens or abs(got[1] - want["global_log"]) > 1e-9:
            failures.append(
                "rule_decode diff: got "
                f"{[vocab.piece_of(t) for t in got[0]]} @ {got[1]:.12f}, "
                f"expected {want['pieces']} @ {want['global_log']:.12f}"
            )
    _report("rule decoding matches exhaustive enumeration", failures)

    inst_spec = fixture["instantiation"]
    inst_failures: list[str] = []
    instantiations = generate_instantiations(
        Atom(inst_spec["premise"]),
        scorer,
        InstantiationConfig(
            k=inst_spec["k"],
            beam_groups=inst_spec["beam_width"],
            group_width=1,
            diversity_penalty=0.0,
            max_len=inst_spec["max_len"],
        ),
    )
    got_pairs = [(i.x_surface, i.y_surface) for i in instantiations]
    want_pairs = [(r["x"], r["y"]) for r in inst_spec["expected"]]
    if got_pairs != want_pairs:
        inst_failures.append(f"instantiation diff: got {got_pairs}, expected {want_pairs}")
    _report("instantiation decoding matches enumeration ranking", inst_failures)

    if failures or inst_failures:
        return 1
    return 0


def _close_ranking(got: list, want: list, tol: float = 1e-9) -> bool:
    if len(got) != len(want):
        return False
    return all(
        g[0] == w[0] and abs(g[1] - w[1]) <= tol for g, w in zip(got, want)
    )


def _report(name: str, failures: list[str]) -> None:
    if failures:
        print(f"FAIL {name}")
        for line in failures:
            print(f"  {line}")
    else:
        print(f"ok   {name}")


if __name__ == "__main__":
    sys.exit(main())
