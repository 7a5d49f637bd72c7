"""Sequence-to-sequence dialogue generation with a selectable first context vector."""

from .corpus import DialoguePair, SplitSpec, Vocabulary, build_vocab, filter_by_length, load_pairs, split
from .decoding import (
    BeamConfig,
    HardToBos,
    Hypothesis,
    PositionalHard,
    RandomHard,
    SelfAttnMax,
    SelfAttnMin,
    StandardSoft,
    beam_search,
    mmi_rerank,
    parse_strategy,
    select_first_context,
)
from .metrics import bleu, distinct_n, evaluate
from .model import ModelParams, TrainConfig, load_checkpoint, save_checkpoint, sequence_loss, train

__version__ = "0.1.0"
