"""Open-rule induction over conditional language-model scorers.

Given a premise atom such as ``"[X] is founder of [Y]."`` the pipeline
probes a scorer for the top-k concrete (x, y) bindings, then decodes the
hypothesis templates those bindings jointly support with a shared-beam
search, ranking hypotheses by their binding-weighted probability.
"""

from .atoms import (
    Atom,
    Instantiation,
    OpenRule,
    make_premise_atom,
    render_applicability_prompt,
    render_instantiation_prompt,
    sample_to_premise_atom,
)
from .instantiate import InstantiationConfig, generate_instantiations, marginalize_to_x
from .metrics import MetricReport, bleu_n, coverage_eval, meteor, rouge_l, self_bleu2
from .sbs import (
    SbsConfig,
    decode_shared_beams,
    exhaustive_rule_oracle,
    rescore_beam,
    supported_beam_search,
)
from .scoring import NgramScorer, train_ngram

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "Instantiation",
    "InstantiationConfig",
    "MetricReport",
    "NgramScorer",
    "OpenRule",
    "SbsConfig",
    "bleu_n",
    "coverage_eval",
    "decode_shared_beams",
    "exhaustive_rule_oracle",
    "generate_instantiations",
    "make_premise_atom",
    "marginalize_to_x",
    "meteor",
    "render_applicability_prompt",
    "render_instantiation_prompt",
    "rescore_beam",
    "rouge_l",
    "sample_to_premise_atom",
    "self_bleu2",
    "supported_beam_search",
    "train_ngram",
    "__version__",
]
