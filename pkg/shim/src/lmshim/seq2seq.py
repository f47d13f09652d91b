"""A small trainable encoder-decoder used for desk-scale serving.

Word-level GRU encoder over the condition string, GRU decoder over the
target prefix, linear head over the vocabulary.  Checkpoints carry the
vocabulary alongside the weights so a served model is self-contained.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from . import wire

SPECIALS = (
    wire.PAD_PIECE,
    wire.BOS_PIECE,
    wire.EOS_PIECE,
    wire.SEP_PIECE,
    wire.X_PIECE,
    wire.Y_PIECE,
    wire.Z_PIECE,
    wire.UNK_PIECE,
) + wire.MASK_PIECES

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
SEP_ID = 3
X_ID = 4
Y_ID = 5
Z_ID = 6
UNK_ID = 7

LOGIT_FLOOR = -1.0e30  # pad must stay unreachable without breaking JSON


@dataclass(frozen=True)
class Seq2SeqVocab:
    pieces: tuple[str, ...]

    @classmethod
    def build(cls, texts: Sequence[str]) -> "Seq2SeqVocab":
        seen = set(SPECIALS)
        novel = sorted(
            {piece for text in texts for piece in wire.tokenize(text) if piece not in seen}
        )
        return cls(tuple(SPECIALS) + tuple(novel))

    def __len__(self) -> int:
        return len(self.pieces)

    def encode(self, text: str) -> list[int]:
        index = {p: i for i, p in enumerate(self.pieces)}
        return [index.get(piece, UNK_ID) for piece in wire.tokenize(text)]

    def decode(self, token_ids: Sequence[int]) -> list[str]:
        return [self.pieces[t] for t in token_ids]


class TinySeq2Seq(nn.Module):
    def __init__(self, vocab_size: int, embed_dim: int = 32, hidden_dim: int = 64):
        super().__init__()
        self.vocab_size = vocab_size
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.embedding = nn.Embedding(vocab_size, embed_dim, padding_idx=PAD_ID)
        self.encoder = nn.GRU(embed_dim, hidden_dim, batch_first=True)
        self.decoder = nn.GRU(embed_dim, hidden_dim, batch_first=True)
        self.head = nn.Linear(hidden_dim, vocab_size)

    def _encode(self, conditions: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        embedded = self.embedding(conditions)
        outputs, _ = self.encoder(embedded)
        # state at each sequence's last real token
        gather = (lengths - 1).clamp(min=0).view(-1, 1, 1).expand(-1, 1, self.hidden_dim)
        return outputs.gather(1, gather).transpose(0, 1).contiguous()

    def _decode_states(
        self, h0: torch.Tensor, prefixes: torch.Tensor
    ) -> torch.Tensor:
        embedded = self.embedding(prefixes)
        outputs, _ = self.decoder(embedded, h0)
        return outputs

    def next_token_logits(
        self,
        condition_ids: Sequence[int],
        prefix_batch: Sequence[Sequence[int]],
    ) -> torch.Tensor:
        """Logits over the vocabulary for each prefix, pad masked out."""
        device = self.head.weight.device
        cond = torch.tensor([condition_ids or [PAD_ID]], dtype=torch.long, device=device)
        cond_len = torch.tensor([max(len(condition_ids), 1)], device=device)
        h0 = self._encode(cond, cond_len)
        h0 = h0.expand(-1, len(prefix_batch), -1).contiguous()
        max_len = max(len(p) for p in prefix_batch) + 1
        rows = torch.full((len(prefix_batch), max_len), PAD_ID, dtype=torch.long, device=device)
        lengths = torch.zeros(len(prefix_batch), dtype=torch.long, device=device)
        for row, prefix in enumerate(prefix_batch):
            seq = [BOS_ID] + list(prefix)
            rows[row, : len(seq)] = torch.tensor(seq, dtype=torch.long, device=device)
            lengths[row] = len(seq)
        states = self._decode_states(h0, rows)
        gather = (lengths - 1).view(-1, 1, 1).expand(-1, 1, self.hidden_dim)
        last = states.gather(1, gather).squeeze(1)
        logits = self.head(last)
        logits[:, PAD_ID] = LOGIT_FLOOR
        return logits

    def loss(
        self,
        conditions: torch.Tensor,
        cond_lengths: torch.Tensor,
        targets: torch.Tensor,
    ) -> torch.Tensor:
        """Teacher-forced cross entropy; targets are eos-terminated, padded."""
        h0 = self._encode(conditions, cond_lengths)
        bos = torch.full((targets.size(0), 1), BOS_ID, dtype=torch.long, device=targets.device)
        decoder_in = torch.cat([bos, targets[:, :-1]], dim=1)
        states = self._decode_states(h0, decoder_in)
        logits = self.head(states)
        return nn.functional.cross_entropy(
            logits.reshape(-1, self.vocab_size),
            targets.reshape(-1),
            ignore_index=PAD_ID,
        )


def save_checkpoint(path: str | Path, model: TinySeq2Seq, vocab: Seq2SeqVocab) -> None:
    torch.save(
        {
            "pieces": list(vocab.pieces),
            "embed_dim": model.embed_dim,
            "hidden_dim": model.hidden_dim,
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path: str | Path) -> tuple[TinySeq2Seq, Seq2SeqVocab]:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    vocab = Seq2SeqVocab(tuple(payload["pieces"]))
    model = TinySeq2Seq(len(vocab), payload["embed_dim"], payload["hidden_dim"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, vocab


class Seq2SeqBackend:
    """Serves a checkpointed model behind the wire protocol."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        self.model, self.vocab = load_checkpoint(path)

    @property
    def model_name(self) -> str:
        return f"seq2seq:{self.path}"

    def vocab_fields(self) -> tuple[list[str], dict[str, int]]:
        reserved = {
            "bos_id": BOS_ID,
            "eos_id": EOS_ID,
            "sep_id": SEP_ID,
            "x_id": X_ID,
            "y_id": Y_ID,
            "z_id": Z_ID,
        }
        return list(self.vocab.pieces), reserved

    def logprob_rows(
        self, condition: str, prefixes: Sequence[Sequence[int]]
    ) -> list[list[float]]:
        size = len(self.vocab)
        for prefix in prefixes:
            for tok in prefix:
                if not 0 <= tok < size:
                    raise ValueError(f"unknown token id in prefix: {tok}")
        with torch.no_grad():
            logits = self.model.next_token_logits(self.vocab.encode(condition), prefixes)
            rows = torch.log_softmax(logits, dim=-1)
        return [[float(v) for v in row] for row in rows]

    def detokenize(self, tokens: Sequence[int]) -> str:
        size = len(self.vocab)
        for tok in tokens:
            if not 0 <= tok < size:
                raise ValueError(f"unknown token id: {tok}")
        return wire.join_pieces(self.vocab.decode(tokens))
