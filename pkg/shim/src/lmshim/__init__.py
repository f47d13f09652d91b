"""HTTP shim serving sequence scorers behind the /v1 logprobs protocol.

Two backends: replay of persisted n-gram table files (bit-exact, used for
conformance testing) and a small trainable encoder-decoder with a
``finetune`` command that continues training on masked-example corpora.
"""

from .finetune import FinetuneConfig, FinetuneReport, finetune
from .replay import ReplayBackend
from .seq2seq import Seq2SeqBackend, Seq2SeqVocab, TinySeq2Seq
from .server import ShimServer

__version__ = "0.1.0"

__all__ = [
    "FinetuneConfig",
    "FinetuneReport",
    "ReplayBackend",
    "Seq2SeqBackend",
    "Seq2SeqVocab",
    "ShimServer",
    "TinySeq2Seq",
    "finetune",
    "__version__",
]
