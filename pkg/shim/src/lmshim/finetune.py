"""Continued training of the tiny seq2seq model on masked-example corpora.

Input files are JSONL records with ``input_text`` and ``target_text``
fields (the corpus-builder's output format).  The model learns
input -> target with teacher forcing; the end-of-sequence token is
appended to every target.  A checkpoint is written when training ends.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import torch

from .seq2seq import EOS_ID, PAD_ID, Seq2SeqVocab, TinySeq2Seq, save_checkpoint

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class FinetuneConfig:
    corpus_paths: list[str]
    output_path: str
    epochs: int = 3
    learning_rate: float = 5e-5
    batch_size: int = 512
    embed_dim: int = 32
    hidden_dim: int = 64
    seed: int = 0
    device: str = "cpu"


@dataclass
class FinetuneReport:
    steps: int = 0
    losses: list[float] = field(default_factory=list)

    @property
    def first_quarter_mean(self) -> float:
        head = self.losses[: max(1, len(self.losses) // 4)]
        return sum(head) / len(head)

    @property
    def last_quarter_mean(self) -> float:
        tail = self.losses[-max(1, len(self.losses) // 4) :]
        return sum(tail) / len(tail)


def load_pairs(paths: Sequence[str | Path]) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    for path in paths:
        path = Path(path)
        if not path.exists():
            raise TrainingError(f"corpus file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                pairs.append((record["input_text"], record["target_text"]))
    if not pairs:
        raise TrainingError("training corpus is empty")
    return pairs


def _pad_batch(rows: list[list[int]], device: torch.device) -> torch.Tensor:
    width = max(len(r) for r in rows)
    out = torch.full((len(rows), width), PAD_ID, dtype=torch.long, device=device)
    for idx, row in enumerate(rows):
        out[idx, : len(row)] = torch.tensor(row, dtype=torch.long, device=device)
    return out


def finetune(config: FinetuneConfig) -> FinetuneReport:
    pairs = load_pairs(config.corpus_paths)
    vocab = Seq2SeqVocab.build([text for pair in pairs for text in pair])
    torch.manual_seed(config.seed)
    device = torch.device(config.device)
    model = TinySeq2Seq(len(vocab), config.embed_dim, config.hidden_dim).to(device)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    encoded = [
        (vocab.encode(source) or [PAD_ID], vocab.encode(target) + [EOS_ID])
        for source, target in pairs
    ]
    report = FinetuneReport()
    model.train()
    for epoch in range(config.epochs):
        for start in range(0, len(encoded), config.batch_size):
            batch = encoded[start : start + config.batch_size]
            conditions = _pad_batch([src for src, _ in batch], device)
            cond_lengths = torch.tensor(
                [max(len(src), 1) for src, _ in batch], dtype=torch.long, device=device
            )
            targets = _pad_batch([tgt for _, tgt in batch], device)
            loss = model.loss(conditions, cond_lengths, targets)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            report.steps += 1
            report.losses.append(loss.detach().item())
        logger.info("epoch %d done, last loss %.4f", epoch + 1, report.losses[-1])

    out_path = Path(config.output_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    model.eval()
    save_checkpoint(out_path, model.cpu(), vocab)
    return report
