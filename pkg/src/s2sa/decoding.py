"""Beam search with a pluggable rule for the first context vector, plus MMI reranking."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .corpus import BOS, EOS, Vocabulary
from .errors import ConfigError, InvalidInputError
from .model import EncoderStates, ModelParams, RecurrentState, attention, decoder_step, encode, sequence_log_prob
from .numeric import SeededRng, log_softmax


# ---------------------------------------------------------------- strategies

@dataclass(frozen=True)
class StandardSoft:
    name = "standard"
    label = "Seq2Seq"


@dataclass(frozen=True)
class HardToBos:
    name = "hard-bos"
    label = "Seq2Seq & Hard-Attention"


@dataclass(frozen=True)
class PositionalHard:
    k: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError(f"positional strategy needs k >= 1, got {self.k}")

    @property
    def name(self) -> str:
        return f"positional:{self.k}"

    @property
    def label(self) -> str:
        return f"Position {self.k}"


@dataclass(frozen=True)
class RandomHard:
    seed: int = 0

    @property
    def name(self) -> str:
        return f"random:{self.seed}"

    label = "Random Hard-Attention"


@dataclass(frozen=True)
class SelfAttnMax:
    name = "selfattn-max"
    label = "Self-Attention & Max"


@dataclass(frozen=True)
class SelfAttnMin:
    name = "selfattn-min"
    label = "Self-Attention & Min"


ContextStrategy = Union[StandardSoft, HardToBos, PositionalHard, RandomHard, SelfAttnMax, SelfAttnMin]
HARD_STRATEGIES = (HardToBos, PositionalHard, RandomHard, SelfAttnMax, SelfAttnMin)


def parse_strategy(text: str) -> ContextStrategy:
    """Parse ``standard``, ``hard-bos``, ``positional:<k>``, ``random:<seed>``, ``selfattn-max``, ``selfattn-min``."""
    text = text.strip()
    simple = {"standard": StandardSoft, "hard-bos": HardToBos, "selfattn-max": SelfAttnMax, "selfattn-min": SelfAttnMin}
    if text in simple:
        return simple[text]()
    kind, _, arg = text.partition(":")
    try:
        if kind == "positional" and arg:
            return PositionalHard(int(arg))
        if kind == "random":
            return RandomHard(int(arg) if arg else 0)
    except ValueError:
        pass
    raise ConfigError(f"unknown strategy {text!r}")


@dataclass
class Selection:
    context: np.ndarray
    index: int | None = None  # 1-based position in H_X for hard strategies
    alphas: np.ndarray | None = None
    clamped: bool = False


def self_attention_scores(hidden: np.ndarray) -> np.ndarray:
    """Row sums of the pairwise inner-product matrix of the encoder states.

    Each row is summed with ``math.fsum`` so the result does not depend on
    the order of the other vectors.
    """
    gram = [[float(np.dot(hi, hj)) for hj in hidden] for hi in hidden]
    return np.array([math.fsum(row) for row in gram])


def _lowest_argmax(values) -> int:
    return int(np.argmax(values))  # first occurrence on ties


def _lowest_argmin(values) -> int:
    return int(np.argmin(values))


def select_first_context(
    strategy: ContextStrategy,
    enc: EncoderStates,
    h0: RecurrentState,
    rng: SeededRng | None = None,
) -> Selection:
    """Choose ``a_1``.  Hard strategies return a row of ``enc.hidden`` verbatim."""
    H = enc.hidden
    n = H.shape[0]
    if n == 0:
        raise InvalidInputError("empty encoder states")
    if isinstance(strategy, StandardSoft):
        alphas, a = attention(h0.h, enc)
        return Selection(a, None, alphas)
    if isinstance(strategy, HardToBos):
        alphas, _ = attention(h0.h, enc)
        i = _lowest_argmax(alphas)
        return Selection(H[i].copy(), i + 1, alphas)
    if isinstance(strategy, PositionalHard):
        i = min(strategy.k, n)
        return Selection(H[i - 1].copy(), i, None, clamped=strategy.k > n)
    if isinstance(strategy, RandomHard):
        if rng is None:
            rng = SeededRng(strategy.seed)
        i = rng.integer(0, n)
        return Selection(H[i].copy(), i + 1)
    if isinstance(strategy, (SelfAttnMax, SelfAttnMin)):
        e = self_attention_scores(H)
        i = _lowest_argmax(e) if isinstance(strategy, SelfAttnMax) else _lowest_argmin(e)
        return Selection(H[i].copy(), i + 1, None)
    raise ConfigError(f"unsupported strategy {strategy!r}")


def message_rng(strategy: ContextStrategy, message_ids: Sequence[int]) -> SeededRng | None:
    """Per-message generator so random draws do not depend on decoding order."""
    if isinstance(strategy, RandomHard):
        return SeededRng((strategy.seed, len(message_ids), *message_ids))
    return None


# ---------------------------------------------------------------- beam search

@dataclass
class BeamConfig:
    beam_width: int = 10
    max_len: int = 50
    length_normalize: bool = False

    def __post_init__(self):
        if self.beam_width < 1 or self.max_len < 1:
            raise InvalidInputError("beam_width and max_len must be >= 1")


@dataclass
class Hypothesis:
    token_ids: tuple[int, ...]
    log_prob: float
    state: RecurrentState | None
    finished: bool = False
    step_log_probs: tuple[float, ...] = ()
    finish_step: int = 0
    reverse_log_prob: float | None = None
    mmi_score: float | None = None

    def score(self, length_normalize: bool = False) -> float:
        if length_normalize and self.token_ids:
            return self.log_prob / len(self.token_ids)
        return self.log_prob

    def response_ids(self) -> list[int]:
        ids = list(self.token_ids)
        return ids[:-1] if ids and ids[-1] == EOS else ids


def _rank_key(h: Hypothesis, cfg: BeamConfig):
    return (-h.score(cfg.length_normalize), h.finish_step, h.token_ids)


def search(m: ModelParams, message_ids: Sequence[int], strategy: ContextStrategy, cfg: BeamConfig = BeamConfig(),
           trace: list | None = None):
    """Beam search; returns ``(ranked finished hypotheses, first-context selection)``.

    If ``trace`` is a list, the token ids of every hypothesis kept at each
    step (alive and newly finished) are appended to it, one list per step.
    """
    if len(message_ids) == 0:
        raise InvalidInputError("cannot decode an empty message")
    enc = encode(m, message_ids)
    h0 = enc.final_state
    sel = select_first_context(strategy, enc, h0, message_rng(strategy, message_ids))
    V = m.vocab_size
    width = cfg.beam_width
    alive = [Hypothesis((), 0.0, h0)]
    finished: list[Hypothesis] = []
    for t in range(1, cfg.max_len + 1):
        states, logps = [], []
        for hyp in alive:
            y_prev = hyp.token_ids[-1] if hyp.token_ids else BOS
            a = sel.context if t == 1 else attention(hyp.state.h, enc)[1]
            state, logits = decoder_step(m, y_prev, hyp.state, a)
            states.append(state)
            logps.append(log_softmax(logits))
        lp = np.stack(logps)
        totals = np.array([h.log_prob for h in alive])[:, None] + lp
        if cfg.length_normalize:
            ranked = totals / np.array([len(h.token_ids) + 1 for h in alive])[:, None]
        else:
            ranked = totals
        flat = ranked.reshape(-1)
        k = min(width, flat.size)
        # everything tied with the k-th best competes on token order
        kth = np.partition(flat, flat.size - k)[flat.size - k]
        pool = np.nonzero(flat >= kth)[0]
        pool = sorted(pool, key=lambda j: (-flat[j], alive[j // V].token_ids + (j % V,)))[:k]
        next_alive = []
        for j in pool:
            r, w = divmod(int(j), V)
            parent = alive[r]
            hyp = Hypothesis(
                parent.token_ids + (w,),
                float(totals[r, w]),
                states[r],
                step_log_probs=parent.step_log_probs + (float(lp[r, w]),),
            )
            if w == EOS or t == cfg.max_len:
                hyp.finished = True
                hyp.finish_step = t
                finished.append(hyp)
            else:
                next_alive.append(hyp)
        if trace is not None:
            trace.append([h.token_ids for h in next_alive] + [h.token_ids for h in finished if h.finish_step == t])
        alive = next_alive
        if not alive:
            break
        if not cfg.length_normalize and len(finished) >= width:
            # extensions can only lose probability
            kth_finished = sorted(h.log_prob for h in finished)[-width]
            if max(h.log_prob for h in alive) <= kth_finished:
                break
    finished.sort(key=lambda h: _rank_key(h, cfg))
    return finished[:width], sel


def beam_search(m: ModelParams, message_ids: Sequence[int], strategy: ContextStrategy = StandardSoft(), cfg: BeamConfig = BeamConfig()) -> list[Hypothesis]:
    return search(m, message_ids, strategy, cfg)[0]


# ---------------------------------------------------------------- MMI

def reverse_log_prob(reverse_model: ModelParams, candidate_ids: Sequence[int], message_ids: Sequence[int]) -> float:
    """``log P(message | candidate)`` under the reverse model, teacher forced.

    An empty candidate is scored as the one-token source ``[EOS]``.
    """
    source = list(candidate_ids) or [EOS]
    return sequence_log_prob(reverse_model, source, message_ids)


def mmi_rerank(
    candidates: Sequence[Hypothesis],
    reverse_model: ModelParams,
    message_ids: Sequence[int],
    lam: float = 1.0,
    forward_vocab: Vocabulary | None = None,
    reverse_vocab: Vocabulary | None = None,
) -> list[Hypothesis]:
    """Stable sort by ``log P(Y|X) + lam * log P(X|Y)``, highest first.

    ``candidates`` are expected in forward-model rank order; no length penalty.
    """
    if not candidates:
        raise InvalidInputError("no candidates to rerank")
    if forward_vocab is not None and reverse_vocab is not None and forward_vocab != reverse_vocab:
        raise ConfigError("forward and reverse vocabularies differ")
    top = max(max(h.token_ids, default=0) for h in candidates)
    if reverse_model.vocab_size <= max(top, max(message_ids)):
        raise ConfigError(f"reverse model |V|={reverse_model.vocab_size} too small for candidate or message ids")
    scored = []
    for h in candidates:
        rev = reverse_log_prob(reverse_model, h.response_ids(), message_ids)
        scored.append(replace(h, reverse_log_prob=rev, mmi_score=h.log_prob + lam * rev))
    return sorted(scored, key=lambda h: -h.mmi_score)


# ---------------------------------------------------------------- inspection

@dataclass
class SelectionRow:
    strategy: str
    selected_index: int | None
    alphas: np.ndarray | None
    clamped: bool
    response_ids: list[int] = field(default_factory=list)
    log_prob: float = 0.0

    def index_text(self) -> str:
        if self.selected_index is None:
            return "-"
        return f"{self.selected_index}*" if self.clamped else str(self.selected_index)


def inspect_selection(m: ModelParams, message_ids: Sequence[int], strategies: Sequence[ContextStrategy], cfg: BeamConfig = BeamConfig()) -> list[SelectionRow]:
    rows = []
    for s in strategies:
        hyps, sel = search(m, message_ids, s, cfg)
        best = hyps[0]
        rows.append(SelectionRow(s.name, sel.index, sel.alphas, sel.clamped, best.response_ids(), best.log_prob))
    return rows
