"""Corpus BLEU and distinct-n."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .errors import InvalidInputError

SMOOTHING_EPS = 1e-9


@dataclass(frozen=True)
class EvalItem:
    message: tuple[str, ...]
    reference: tuple[str, ...]
    candidate: tuple[str, ...]


def make_corpus(triples) -> list[EvalItem]:
    corpus = [EvalItem(tuple(m), tuple(r), tuple(c)) for m, r, c in triples]
    if not corpus:
        raise InvalidInputError("evaluation corpus is empty")
    return corpus


def ngrams(tokens: Sequence[str], n: int):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


@dataclass
class BleuStats:
    matches: list[int]
    totals: list[int]
    cand_len: int
    ref_len: int
    precisions: list[float] = field(default_factory=list)
    brevity_penalty: float = 1.0
    score: float = 0.0


def bleu_stats(corpus: Sequence[EvalItem], max_n: int = 4) -> BleuStats:
    """Clipped n-gram matches pooled over the corpus, single reference per item."""
    if max_n < 1:
        raise InvalidInputError("max_n must be >= 1")
    if not corpus:
        raise InvalidInputError("evaluation corpus is empty")
    matches = [0] * max_n
    totals = [0] * max_n
    cand_len = ref_len = 0
    for item in corpus:
        cand_len += len(item.candidate)
        ref_len += len(item.reference)
        for n in range(1, max_n + 1):
            c = Counter(ngrams(item.candidate, n))
            r = Counter(ngrams(item.reference, n))
            matches[n - 1] += sum(min(k, r[g]) for g, k in c.items())
            totals[n - 1] += max(len(item.candidate) - n + 1, 0)
    stats = BleuStats(matches, totals, cand_len, ref_len)
    # orders with no candidate n-grams at all are left out of the mean;
    # zero precisions are floored at SMOOTHING_EPS
    stats.precisions = [max(m / t, SMOOTHING_EPS) for m, t in zip(matches, totals) if t]
    if cand_len == 0:
        stats.brevity_penalty = 0.0
        stats.score = 0.0
        return stats
    stats.brevity_penalty = math.exp(min(0.0, 1.0 - ref_len / cand_len))
    log_mean = sum(math.log(p) for p in stats.precisions) / len(stats.precisions)
    stats.score = stats.brevity_penalty * math.exp(log_mean)
    return stats


def bleu(corpus: Sequence[EvalItem], max_n: int = 4) -> float:
    return bleu_stats(corpus, max_n).score


def distinct_n(candidates: Sequence[Sequence[str]], n: int) -> float:
    """Distinct n-grams over total n-grams, pooled over all candidates."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    seen = set()
    total = 0
    for cand in candidates:
        grams = ngrams(list(cand), n)
        total += len(grams)
        seen.update(grams)
    return len(seen) / total if total else 0.0


@dataclass
class MetricsReport:
    bleu: float
    distinct1: float
    distinct2: float
    counts: dict = field(default_factory=dict)


def evaluate(corpus: Sequence[EvalItem]) -> MetricsReport:
    stats = bleu_stats(corpus, 4)
    cands = [item.candidate for item in corpus]
    counts = {
        "items": len(corpus),
        "candidate_tokens": stats.cand_len,
        "reference_tokens": stats.ref_len,
        "ngram_matches": list(stats.matches),
        "ngram_totals": list(stats.totals),
        "unigrams": sum(len(c) for c in cands),
        "bigrams": sum(max(len(c) - 1, 0) for c in cands),
    }
    return MetricsReport(stats.score, distinct_n(cands, 1), distinct_n(cands, 2), counts)
