"""Run configuration: JSON schema, defaults, hashing, scorer construction.

A run config selects exactly one scorer backend and carries the decode
settings for both stages.  Defaults mirror the reference hyperparameters:
k = 10 beams in 10 groups with diversity penalty 1.0 for hypothesis
decoding, and 120 beam groups for instantiation decoding.

Schema (JSON object; unknown keys are rejected):

    {
      "scorer": {"backend": "ngram", "order": 2, "alpha": 0.1,
                 "model_path": "tables.json"}
              | {"backend": "remote", "base_url": "http://...",
                 "timeout_ms": 5000, "retries": 2, "truncate_top": null},
      "applicability_scorer": {...},      # optional second session
      "instantiation": {...},             # InstantiationConfig fields
      "sbs": {...},                       # SbsConfig fields
      "seed": 0,
      "output_dir": "runs"
    }
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import ParameterError
from .instantiate import InstantiationConfig
from .sbs import SbsConfig
from .scoring import NgramScorer, Scorer


@dataclass(frozen=True)
class ScorerSettings:
    backend: str
    order: int = 2
    alpha: float = 0.1
    model_path: str | None = None
    base_url: str | None = None
    timeout_ms: int = 5000
    retries: int = 2
    truncate_top: int | None = None

    def __post_init__(self) -> None:
        if self.backend not in ("ngram", "remote"):
            raise ParameterError(f"unknown scorer backend: {self.backend!r}")
        if self.backend == "ngram" and not self.model_path:
            raise ParameterError("ngram backend needs a model_path")
        if self.backend == "remote" and not self.base_url:
            raise ParameterError("remote backend needs a base_url")

    def build(self) -> Scorer:
        if self.backend == "ngram":
            scorer = NgramScorer.load(self.model_path)
            if scorer.order != self.order or scorer.alpha != self.alpha:
                raise ParameterError(
                    f"model file was trained with order={scorer.order}, alpha={scorer.alpha}; "
                    f"config asks for order={self.order}, alpha={self.alpha}"
                )
            return scorer
        from .remote import RemoteScorer

        return RemoteScorer(
            base_url=self.base_url,
            timeout_ms=self.timeout_ms,
            retries=self.retries,
            truncate_top=self.truncate_top,
        )


@dataclass(frozen=True)
class RunConfig:
    scorer: ScorerSettings
    instantiation: InstantiationConfig = InstantiationConfig()
    sbs: SbsConfig = SbsConfig()
    applicability_scorer: ScorerSettings | None = None
    seed: int = 0
    output_dir: str = "runs"

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "RunConfig":
        known = {
            "scorer",
            "applicability_scorer",
            "instantiation",
            "sbs",
            "seed",
            "output_dir",
        }
        _reject_unknown(raw, known, "run config")
        if "scorer" not in raw:
            raise ParameterError("run config needs a scorer section")
        return cls(
            scorer=_parse_section(ScorerSettings, raw["scorer"], "scorer"),
            applicability_scorer=(
                _parse_section(ScorerSettings, raw["applicability_scorer"], "applicability_scorer")
                if raw.get("applicability_scorer")
                else None
            ),
            instantiation=_parse_section(
                InstantiationConfig, raw.get("instantiation", {}), "instantiation"
            ),
            sbs=_parse_section(SbsConfig, raw.get("sbs", {}), "sbs"),
            seed=int(raw.get("seed", 0)),
            output_dir=str(raw.get("output_dir", "runs")),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ParameterError(f"config file {path} must hold a JSON object")
        return cls.from_dict(raw)

    def canonical(self) -> dict[str, Any]:
        """Stable dict echo of the full configuration, defaults included."""
        return {
            "scorer": dataclasses.asdict(self.scorer),
            "applicability_scorer": (
                dataclasses.asdict(self.applicability_scorer)
                if self.applicability_scorer
                else None
            ),
            "instantiation": dataclasses.asdict(self.instantiation),
            "sbs": dataclasses.asdict(self.sbs),
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def build_scorers(self) -> tuple[Scorer, Scorer]:
        """(instantiation scorer, applicability scorer).

        One backend serves both stages unless a second session is
        configured; prompt shapes keep the two probability roles apart
        within a shared model.
        """
        primary = self.scorer.build()
        if self.applicability_scorer is None:
            return primary, primary
        return primary, self.applicability_scorer.build()


def _parse_section(cls: type, raw: dict[str, Any], name: str):
    if not isinstance(raw, dict):
        raise ParameterError(f"{name} section must be a JSON object")
    fields = {f.name for f in dataclasses.fields(cls)}
    _reject_unknown(raw, fields, name)
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ParameterError(f"bad {name} section: {exc}") from exc


def _reject_unknown(raw: dict[str, Any], known: set[str], name: str) -> None:
    unknown = set(raw) - known
    if unknown:
        raise ParameterError(f"unknown {name} keys: {sorted(unknown)}")
