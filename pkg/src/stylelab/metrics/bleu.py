"""Corpus-level BLEU without smoothing."""

from __future__ import annotations

import math
from collections import Counter

from ..errors import ContractError


def ngrams(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def corpus_stats(candidates, references, max_n=4):
    """Pooled clipped matches and totals per order, plus hypothesis/reference lengths."""
    matches = [0] * max_n
    totals = [0] * max_n
    c_len = r_len = 0
    for cand, ref in zip(candidates, references):
        c_len += len(cand)
        r_len += len(ref)
        for n in range(1, max_n + 1):
            cand_counts = Counter(ngrams(cand, n))
            ref_counts = Counter(ngrams(ref, n))
            matches[n - 1] += sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
            totals[n - 1] += max(len(cand) - n + 1, 0)
    return matches, totals, c_len, r_len


def bleu(candidates, references, max_n=4):
    """BLEU in [0, 100] over token lists, one reference per candidate.

    Modified precisions are pooled over the corpus; any zero precision gives
    0 because no smoothing is applied; orders for which the candidates hold
    no n-grams at all are left out of the geometric mean. The brevity penalty is
    ``exp(1 - r / c)`` when the total candidate length c is below r.
    """
    candidates = list(candidates)
    references = list(references)
    if not candidates:
        raise ContractError("bleu needs at least one candidate")
    if len(candidates) != len(references):
        raise ContractError("bleu needs exactly one reference per candidate")
    matches, totals, c, r = corpus_stats(candidates, references, max_n)
    # orders with no candidate n-grams at all are undefined, not zero
    orders = [(m, t) for m, t in zip(matches, totals) if t > 0]
    if c == 0 or any(m == 0 for m, _ in orders):
        return 0.0
    log_p = sum(math.log(m / t) for m, t in orders) / len(orders)
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return 100.0 * bp * math.exp(log_p)


def sbleu(outputs, inputs, max_n=4):
    """Self-BLEU: outputs scored against their own inputs."""
    return bleu(outputs, inputs, max_n)
