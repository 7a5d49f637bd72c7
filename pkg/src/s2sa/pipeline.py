"""End-to-end commands: prepare, train, decode, compare, chat, inspect.

Each ``cmd_*`` function is what the matching CLI subcommand runs; they take
paths and a :class:`RunConfig` and write their outputs to disk.
"""
from __future__ import annotations

import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO

from . import corpus, report
from .config import RunConfig
from .corpus import DialoguePair, Vocabulary
from .decoding import (
    BeamConfig,
    ContextStrategy,
    HardToBos,
    Hypothesis,
    PositionalHard,
    RandomHard,
    SelfAttnMax,
    SelfAttnMin,
    StandardSoft,
    inspect_selection,
    mmi_rerank,
    search,
)
from .errors import ConfigError, DataError, InvalidInputError
from .metrics import EvalItem, evaluate
from .model import ModelParams, load_checkpoint, save_checkpoint, train

log = logging.getLogger(__name__)

TRAIN_FILE, TEST_FILE, VALID_FILE, VOCAB_FILE = "train.tsv", "test.tsv", "valid.tsv", "vocab.txt"
CONFIG_ECHO = "config.txt"


# ---------------------------------------------------------------- prepare

@dataclass
class PrepareSummary:
    loaded: int
    kept: int
    skipped_empty: int
    train: int
    test: int
    valid: int
    vocab_size: int

    def text(self) -> str:
        return (
            f"pairs loaded: {self.loaded}\nempty-side lines skipped: {self.skipped_empty}\n"
            f"after length filter: {self.kept}\ntrain: {self.train}\ntest: {self.test}\n"
            f"valid: {self.valid}\nvocabulary: {self.vocab_size}\n"
        )


def cmd_prepare(pairs_path, out_dir, cfg: RunConfig) -> PrepareSummary:
    """Dedup, length-filter, split and build the vocabulary from the training split."""
    pairs, errors, skipped = corpus.scan_pairs(pairs_path)
    if errors:
        for err in errors:
            log.error("%s", err)
        raise errors[0]
    kept = corpus.filter_by_length(pairs, cfg.max_tokens)
    train_set, test_set, valid_set = corpus.split(kept, cfg.split_spec())
    vocab = corpus.build_vocab(train_set, cfg.vocab_capacity)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus.write_pairs(train_set, out / TRAIN_FILE)
    corpus.write_pairs(test_set, out / TEST_FILE)
    corpus.write_pairs(valid_set, out / VALID_FILE)
    vocab.save(out / VOCAB_FILE)
    cfg.save(out / CONFIG_ECHO)
    return PrepareSummary(len(pairs), len(kept), skipped, len(train_set), len(test_set), len(valid_set), len(vocab))


# ---------------------------------------------------------------- train

def encode_pairs(vocab: Vocabulary, pairs: Sequence[DialoguePair], reverse: bool = False):
    out = []
    for p in pairs:
        if reverse:
            p = p.reversed()
        out.append((vocab.encode(p.message), vocab.encode(p.response)))
    return out


def cmd_train(data_dir, out_checkpoint, cfg: RunConfig, direction: str = "forward", progress: TextIO | None = None):
    """Train on ``data_dir/train.tsv`` with early stopping on ``valid.tsv``.

    ``direction="reverse"`` swaps every pair.  Writes the checkpoint, the epoch
    log (``<checkpoint>.log.tsv``), a loss figure and the config echo.
    """
    if direction not in ("forward", "reverse"):
        raise ConfigError(f"direction must be forward or reverse, got {direction!r}")
    data = Path(data_dir)
    try:
        vocab = Vocabulary.load(data / VOCAB_FILE)
        train_pairs = corpus.load_pairs(data / TRAIN_FILE)
        valid_pairs = corpus.load_pairs(data / VALID_FILE) if (data / VALID_FILE).exists() else []
    except FileNotFoundError as exc:
        raise DataError(f"prepared data missing: {exc.filename}") from exc
    rev = direction == "reverse"
    train_set = encode_pairs(vocab, train_pairs, rev)
    valid_set = encode_pairs(vocab, valid_pairs, rev)
    m = ModelParams.initialize(len(vocab), cfg.emb_dim, cfg.hidden_dim, seed=cfg.seed, scale=cfg.init_scale)

    def echo(rec):
        if progress is not None:
            print(f"[{direction}] " + rec.line(), file=progress, flush=True)

    result = train(m, train_set, valid_set, cfg.train_config(), on_epoch=echo)
    ckpt = Path(out_checkpoint)
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.params, vocab, ckpt)
    Path(str(ckpt) + ".log.tsv").write_text(report.train_log_tsv(result.log), encoding="utf-8")
    if result.log:
        report.plot_training(result.log, str(ckpt) + ".loss.png", title=f"{direction} model")
    cfg.save(str(ckpt) + ".config.txt")
    return result


# ---------------------------------------------------------------- decode

def load_models(checkpoint, reverse_checkpoint=None):
    model, vocab = load_checkpoint(checkpoint)
    reverse = None
    if reverse_checkpoint is not None:
        reverse, rvocab = load_checkpoint(reverse_checkpoint)
        if rvocab != vocab:
            raise ConfigError("forward and reverse checkpoints use different vocabularies")
    return model, vocab, reverse


def decode_one(model: ModelParams, message_ids, strategy: ContextStrategy, beam: BeamConfig,
               reverse: ModelParams | None = None, lam: float = 1.0) -> Hypothesis | None:
    if not message_ids:
        return None
    hyps, _ = search(model, message_ids, strategy, beam)
    if reverse is not None:
        hyps = mmi_rerank(hyps, reverse, message_ids, lam)
    return hyps[0]


def decode_many(model, messages_ids, strategy, beam, reverse=None, lam=1.0, workers: int = 1):
    """Best hypothesis per message, in input order."""
    def job(ids):
        return decode_one(model, ids, strategy, beam, reverse, lam)

    if workers <= 1:
        return [job(ids) for ids in messages_ids]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, messages_ids))


def render(vocab: Vocabulary, hyp: Hypothesis | None) -> str:
    return "" if hyp is None else " ".join(vocab.decode(hyp.response_ids()))


def read_messages(path) -> list[list[str]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [line.split() for line in lines]


def cmd_decode(checkpoint, messages_path, out_path, cfg: RunConfig, reverse_checkpoint=None) -> list[str]:
    """One response per input line; MMI reranking when a reverse checkpoint is given."""
    model, vocab, reverse = load_models(checkpoint, reverse_checkpoint)
    messages = read_messages(messages_path)
    hyps = decode_many(model, [vocab.encode(m) for m in messages], cfg.context_strategy(), cfg.beam_config(),
                       reverse, cfg.mmi_lambda, cfg.workers)
    responses = [render(vocab, h) for h in hyps]
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(r + "\n" for r in responses), encoding="utf-8")
    cfg.save(out.parent / CONFIG_ECHO)
    return responses


# ---------------------------------------------------------------- compare

@dataclass(frozen=True)
class Method:
    label: str
    strategy: ContextStrategy
    mmi: bool = False

    @property
    def slug(self) -> str:
        return self.label.lower().replace(" & ", "-").replace(" ", "-")


def methods(cfg: RunConfig, with_mmi: bool) -> list[Method]:
    rows = [
        Method("Seq2Seq", StandardSoft()),
        Method("Seq2Seq & Hard-Attention", HardToBos()),
        Method("Random Hard-Attention", RandomHard(cfg.seed)),
        Method("Self-Attention & Min", SelfAttnMin()),
        Method("Self-Attention & Max", SelfAttnMax()),
    ]
    if with_mmi:
        rows += [
            Method("Seq2Seq using MMI", StandardSoft(), True),
            Method("Self-Attention & Max using MMI", SelfAttnMax(), True),
        ]
    return rows


def selection_strategies(cfg: RunConfig) -> list[ContextStrategy]:
    return [StandardSoft(), PositionalHard(1), PositionalHard(5), HardToBos(), RandomHard(cfg.seed),
            SelfAttnMin(), SelfAttnMax()]


@dataclass
class CompareResult:
    metrics: list
    responses: dict[str, list[str]]
    selection: list
    metrics_tsv: str
    selection_tsv: str


def cmd_compare(checkpoint, test_path, out_dir, cfg: RunConfig, reverse_checkpoint=None) -> CompareResult:
    """Decode the test pairs with every method and write the metrics and selection reports.

    Outputs in ``out_dir``: ``metrics.tsv``, ``metrics.json``, ``selection.tsv``,
    ``responses/<method>.txt``, ``metrics.png`` and the config echo.
    """
    model, vocab, reverse = load_models(checkpoint, reverse_checkpoint)
    pairs = corpus.load_pairs(test_path)
    if not pairs:
        raise InvalidInputError(f"{test_path}: no test pairs")
    beam = cfg.beam_config()
    msg_ids = [vocab.encode(p.message) for p in pairs]
    out = Path(out_dir)
    (out / "responses").mkdir(parents=True, exist_ok=True)

    rows, responses = [], {}
    for meth in methods(cfg, reverse is not None):
        hyps = decode_many(model, msg_ids, meth.strategy, beam, reverse if meth.mmi else None,
                           cfg.mmi_lambda, cfg.workers)
        texts = [render(vocab, h) for h in hyps]
        responses[meth.label] = texts
        (out / "responses" / f"{meth.slug}.txt").write_text("".join(t + "\n" for t in texts), encoding="utf-8")
        items = [EvalItem(p.message, p.response, tuple(t.split())) for p, t in zip(pairs, texts)]
        rows.append((meth.label, evaluate(items)))

    selection = []
    strategies = selection_strategies(cfg)
    for p, ids in zip(pairs, msg_ids):
        for row in inspect_selection(model, ids, strategies, beam):
            selection.append((" ".join(p.message), row, " ".join(vocab.decode(row.response_ids))))

    m_tsv = report.metrics_tsv(rows)
    s_tsv = report.selection_tsv(selection)
    (out / "metrics.tsv").write_text(m_tsv, encoding="utf-8")
    (out / "selection.tsv").write_text(s_tsv, encoding="utf-8")
    raw = [{"method": name, "bleu": r.bleu, "distinct1": r.distinct1, "distinct2": r.distinct2, "counts": r.counts}
           for name, r in rows]
    (out / "metrics.json").write_text(json.dumps(raw, indent=2) + "\n", encoding="utf-8")
    report.plot_metrics(rows, out / "metrics.png")
    cfg.save(out / CONFIG_ECHO)
    return CompareResult(rows, responses, selection, m_tsv, s_tsv)


# ---------------------------------------------------------------- chat / inspect

def cmd_chat(checkpoint, cfg: RunConfig, verbose: bool = False, stdin: TextIO = sys.stdin,
             stdout: TextIO = sys.stdout, prompt: str = "> ") -> int:
    """Single-turn chat loop; ``exit`` or end of input stops it."""
    model, vocab, _ = load_models(checkpoint)
    strategy = cfg.context_strategy()
    beam = cfg.beam_config()
    while True:
        stdout.write(prompt)
        stdout.flush()
        line = stdin.readline()
        if not line:
            break
        text = line.strip()
        if text == "exit":
            break
        if not text:
            continue
        try:
            ids = vocab.encode(text.split())
            hyps, sel = search(model, ids, strategy, beam)
        except Exception as exc:  # keep the loop alive
            stdout.write(f"error: {exc}\n")
            continue
        if verbose and sel.index is not None:
            stdout.write(f"[a1 index {sel.index} of {len(ids)}]\n")
        stdout.write(render(vocab, hyps[0]) + "\n")
    return 0


def cmd_inspect(checkpoint) -> str:
    model, vocab = load_checkpoint(checkpoint)
    lines = [
        f"vocabulary: {len(vocab)} (capacity {vocab.capacity})",
        f"embedding dim: {model.emb_dim}",
        f"hidden dim: {model.hidden_dim}",
        f"parameters: {model.num_parameters()}",
    ]
    for name, t in model.tensors().items():
        lines.append(f"  {name}: {'x'.join(map(str, t.shape))}")
    return "\n".join(lines) + "\n"
