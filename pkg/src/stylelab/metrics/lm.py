"""Interpolated modified Kneser-Ney n-gram language model."""

from __future__ import annotations

import math
from collections import Counter, defaultdict

from ..errors import ConfigError, InputError

BOS_SYM, EOS_SYM, UNK_SYM = "<s>", "</s>", "<unk>"
FALLBACK_DISCOUNT = 0.75


def _discounts(adjusted_counts):
    """Chen & Goodman D1, D2, D3+ estimated from count-of-counts.

    Falls back to a flat 0.75 when any of n1..n4 is zero or an estimate
    leaves its valid range (0, k].
    """
    coc = Counter(c for c in adjusted_counts if c <= 4)
    n1, n2, n3, n4 = (coc.get(k, 0) for k in (1, 2, 3, 4))
    if min(n1, n2, n3, n4) == 0:
        return (FALLBACK_DISCOUNT,) * 3
    y = n1 / (n1 + 2 * n2)
    d = (1 - 2 * y * n2 / n1, 2 - 3 * y * n3 / n2, 3 - 4 * y * n4 / n3)
    if not all(0 < dk <= k for k, dk in zip((1, 2, 3), d)):
        return (FALLBACK_DISCOUNT,) * 3
    return d


class NGramLM:
    """Kneser-Ney LM over whitespace tokens with ``<s>``, ``</s>`` and ``<unk>``.

    Highest-order n-grams (and those beginning with ``<s>``, which cannot be
    extended to the left) keep raw counts; lower orders use continuation
    counts. The unigram level interpolates with a uniform distribution over
    the vocabulary, so every word (including ``<unk>``) has positive mass.
    """

    def __init__(self, order=5, min_count=1):
        if order < 1:
            raise ConfigError("n-gram order must be >= 1")
        self.order = order
        self.min_count = min_count
        self.vocab = set()
        self.counts = {}          # n -> {ngram: adjusted count}
        self.context = {}         # n -> {context: (total, n1, n2, n3plus)}
        self.discounts = {}       # n -> (D1, D2, D3+)

    # -- training ------------------------------------------------------------
    def fit(self, corpus):
        sentences = [list(s) for s in corpus]
        if not sentences:
            raise InputError("cannot train a language model on an empty corpus")
        freq = Counter(t for s in sentences for t in s)
        known = {t for t, c in freq.items() if c >= self.min_count}
        self.vocab = known | {EOS_SYM, UNK_SYM}
        raw = Counter()
        for s in sentences:
            toks = [BOS_SYM] + [t if t in known else UNK_SYM for t in s] + [EOS_SYM]
            for i in range(1, len(toks)):
                for n in range(1, self.order + 1):
                    if i - n + 1 < 0:
                        break
                    raw[tuple(toks[i - n + 1:i + 1])] += 1
        left = defaultdict(set)
        for g in raw:
            if len(g) >= 2:
                left[g[1:]].add(g[0])
        self.counts = {n: {} for n in range(1, self.order + 1)}
        for g, c in raw.items():
            n = len(g)
            if n == self.order or g[0] == BOS_SYM:
                self.counts[n][g] = c
            else:
                self.counts[n][g] = len(left.get(g, ()))
        for n in range(1, self.order + 1):
            self.discounts[n] = _discounts(self.counts[n].values())
            stats = defaultdict(lambda: [0, 0, 0, 0])
            for g, c in self.counts[n].items():
                st = stats[g[:-1]]
                st[0] += c
                st[min(c, 3)] += 1
            self.context[n] = {h: tuple(v) for h, v in stats.items()}
        return self

    # -- scoring -------------------------------------------------------------
    def prob(self, word, context=()):
        """P(word | context) using at most ``order - 1`` trailing context words."""
        if word not in self.vocab:
            word = UNK_SYM
        context = tuple(t if (t in self.vocab or t == BOS_SYM) else UNK_SYM for t in context)
        context = context[len(context) - (self.order - 1):] if self.order > 1 else ()
        return self._prob(word, context)

    def _prob(self, word, context):
        n = len(context) + 1
        if n == 1:
            lower = 1.0 / len(self.vocab)
        else:
            lower = self._prob(word, context[1:])
        stats = self.context[n].get(context)
        if stats is None:
            return lower
        total, n1, n2, n3 = stats
        d1, d2, d3 = self.discounts[n]
        c = self.counts[n].get(context + (word,), 0)
        disc = 0.0 if c == 0 else (d1 if c == 1 else d2 if c == 2 else d3)
        gamma = (d1 * n1 + d2 * n2 + d3 * n3) / total
        return max(c - disc, 0.0) / total + gamma * lower

    def sentence_logprob(self, tokens):
        """Natural-log probability of tokens followed by ``</s>``; returns (logp, n_predictions)."""
        toks = [BOS_SYM] + list(tokens) + [EOS_SYM]
        logp = 0.0
        for i in range(1, len(toks)):
            ctx = toks[max(0, i - self.order + 1):i]
            logp += math.log(self.prob(toks[i], ctx))
        return logp, len(toks) - 1

    def sentence_perplexity(self, tokens):
        logp, n = self.sentence_logprob(tokens)
        return math.exp(-logp / n)

    def prediction_vocab(self):
        return sorted(self.vocab)


def train_lm(corpus, order=5, min_count=1) -> NGramLM:
    return NGramLM(order, min_count).fit(corpus)


def perplexity(lm: NGramLM, texts) -> float:
    """Sentence-level perplexity averaged over ``texts`` (token lists)."""
    texts = list(texts)
    if not texts:
        raise InputError("perplexity needs at least one text")
    return sum(lm.sentence_perplexity(t) for t in texts) / len(texts)
