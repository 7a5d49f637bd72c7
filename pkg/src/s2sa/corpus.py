"""Dialogue pair files, vocabulary building and train/test/valid splitting."""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CorpusParseError, FormatError, InvalidInputError
from .numeric import SeededRng

log = logging.getLogger(__name__)

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIAL_TOKENS = ("<pad>", "<s>", "</s>", "<unk>")
DEFAULT_CAPACITY = 25000
DEFAULT_MAX_TOKENS = 6


@dataclass(frozen=True)
class DialoguePair:
    message: tuple[str, ...]
    response: tuple[str, ...]

    def reversed(self) -> "DialoguePair":
        return DialoguePair(self.response, self.message)


class Vocabulary:
    """Token/id map with PAD, BOS, EOS and UNK fixed at ids 0..3."""

    def __init__(self, tokens: Sequence[str], capacity: int | None = None):
        tokens = list(tokens)
        if tuple(tokens[:4]) != SPECIAL_TOKENS:
            raise FormatError("vocabulary must start with the four special tokens")
        if len(set(tokens)) != len(tokens):
            raise FormatError("vocabulary contains duplicate tokens")
        self.capacity = capacity if capacity is not None else len(tokens)
        if len(tokens) > self.capacity:
            raise FormatError(f"{len(tokens)} tokens exceed capacity {self.capacity}")
        self.id_to_token = tokens
        self.token_to_id = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.id_to_token == other.id_to_token

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)}, capacity={self.capacity})"

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.token_to_id.get(t, UNK) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        out = []
        for i in ids:
            i = int(i)
            if not 0 <= i < len(self):
                raise IndexError(f"token id {i} out of range for vocabulary of size {len(self)}")
            out.append(self.id_to_token[i])
        return out

    def save(self, path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.id_to_token), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        text = Path(path).read_text(encoding="utf-8")
        return cls(text.split("\n")[:-1] if text.endswith("\n") else text.split("\n"))


def tokenize(line: str) -> tuple[str, ...]:
    return tuple(line.split())


def load_pairs(path) -> list[DialoguePair]:
    """Read ``message<TAB>response`` lines, dropping exact duplicates.

    Lines with an empty side are skipped with a warning.  A line without
    exactly one TAB raises ``CorpusParseError``; use :func:`scan_pairs` to
    collect such errors instead of stopping at the first.
    """
    pairs, errors, _ = scan_pairs(path)
    if errors:
        raise errors[0]
    return pairs


def scan_pairs(path) -> tuple[list[DialoguePair], list[CorpusParseError], int]:
    """Like :func:`load_pairs` but returns ``(pairs, parse_errors, skipped_empty)``."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="\n") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    seen = set()
    pairs: list[DialoguePair] = []
    errors: list[CorpusParseError] = []
    skipped = 0
    for n, line in enumerate(lines, start=1):
        line = line.rstrip("\r")
        if line.count("\t") != 1:
            errors.append(CorpusParseError(path, n, f"expected exactly one TAB, found {line.count(chr(9))}"))
            continue
        left, right = line.split("\t")
        pair = DialoguePair(tokenize(left), tokenize(right))
        if not pair.message or not pair.response:
            skipped += 1
            continue
        if pair in seen:
            continue
        seen.add(pair)
        pairs.append(pair)
    if skipped:
        log.warning("%s: skipped %d line(s) with an empty side", path, skipped)
    return pairs, errors, skipped


def write_pairs(pairs: Iterable[DialoguePair], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            fh.write(" ".join(p.message) + "\t" + " ".join(p.response) + "\n")


def filter_by_length(pairs: Sequence[DialoguePair], max_tokens: int = DEFAULT_MAX_TOKENS) -> list[DialoguePair]:
    # per-side cap on both message and response
    if max_tokens < 1:
        raise InvalidInputError("max_tokens must be >= 1")
    return [p for p in pairs if len(p.message) <= max_tokens and len(p.response) <= max_tokens]


def build_vocab(pairs: Iterable[DialoguePair], capacity: int = DEFAULT_CAPACITY) -> Vocabulary:
    """Most frequent tokens (both sides counted) after the specials; ties sort lexicographically."""
    if capacity <= len(SPECIAL_TOKENS):
        raise InvalidInputError(f"vocabulary capacity must exceed {len(SPECIAL_TOKENS)}")
    counts: Counter[str] = Counter()
    for p in pairs:
        counts.update(p.message)
        counts.update(p.response)
    for special in SPECIAL_TOKENS:
        counts.pop(special, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    admitted = [t for t, _ in ranked[: capacity - len(SPECIAL_TOKENS)]]
    return Vocabulary(list(SPECIAL_TOKENS) + admitted, capacity)


def encode(vocab: Vocabulary, tokens: Iterable[str]) -> list[int]:
    return vocab.encode(tokens)


def decode(vocab: Vocabulary, ids: Iterable[int]) -> list[str]:
    return vocab.decode(ids)


@dataclass(frozen=True)
class SplitSpec:
    train_ratio: float = 0.85
    test_ratio: float = 0.1
    valid_ratio: float = 0.05
    seed: int = 0

    def __post_init__(self):
        ratios = (self.train_ratio, self.test_ratio, self.valid_ratio)
        if any(r <= 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
            raise InvalidInputError(f"split ratios must be positive and sum to 1, got {ratios}")


def split(pairs: Sequence[DialoguePair], spec: SplitSpec = SplitSpec()):
    """Seeded shuffle, then cut at floor(n*train) and floor(n*(train+test)).

    Returns ``(train, test, valid)``.
    """
    n = len(pairs)
    order = SeededRng(spec.seed).permutation(n)
    shuffled = [pairs[i] for i in order]
    a = math.floor(n * spec.train_ratio)
    b = math.floor(n * (spec.train_ratio + spec.test_ratio))
    return shuffled[:a], shuffled[a:b], shuffled[b:]
