"""Tokenization, vocabularies, and input corruption for denoising."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import InputError

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>")


def tokenize(text) -> list[str]:
    """Lower-case and split on runs of whitespace."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InputError(f"input is not valid UTF-8: {exc}") from exc
    return text.lower().split()


class Vocab:
    """Bijective token/id map with PAD, BOS, EOS, UNK reserved at ids 0..3."""

    def __init__(self, tokens, counts=None):
        self.itos = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        self.counts = dict(counts or {})

    @classmethod
    def build(cls, corpus, min_count=1) -> "Vocab":
        """Ids by descending frequency, ties broken lexicographically."""
        if min_count < 1:
            raise InputError("min_count must be >= 1")
        counter = Counter()
        n_seqs = 0
        for seq in corpus:
            n_seqs += 1
            counter.update(seq)
        if n_seqs == 0:
            raise InputError("cannot build a vocabulary from an empty corpus")
        kept = sorted((t for t, c in counter.items() if c >= min_count and t not in SPECIALS),
                      key=lambda t: (-counter[t], t))
        return cls(kept, {t: counter[t] for t in kept})

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def encode(self, seq) -> list[int]:
        return [self.stoi.get(t, UNK) for t in seq]

    def decode(self, ids) -> list[str]:
        return [self.itos[i] for i in ids]

    def to_dict(self):
        return {"itos": self.itos, "counts": self.counts}

    @classmethod
    def from_dict(cls, d):
        return cls(d["itos"][len(SPECIALS):], d.get("counts"))


def build_vocab(corpus, min_count=1) -> Vocab:
    return Vocab.build(corpus, min_count)


def code(seq, vocab: Vocab) -> list[int]:
    return vocab.encode(seq)


def decode_ids(ids, vocab: Vocab) -> list[str]:
    return vocab.decode(ids)


@dataclass(frozen=True)
class NoiseSpec:
    p_drop: float = 0.1
    k: int = 3
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_drop <= 1.0:
            raise InputError(f"p_drop must be a probability, got {self.p_drop}")
        if self.k < 0:
            raise InputError(f"shuffle window k must be >= 0, got {self.k}")


def noise(seq, spec: NoiseSpec, rng=None):
    """Randomly drop words, then locally shuffle the survivors.

    Each token is dropped with probability ``p_drop``; if every token would
    go, the first is kept. Survivors are reordered by ``index + U(0, k)`` so
    no token moves by more than ``k`` positions. Pass ``rng`` to draw from an
    existing generator instead of ``spec.seed``.
    """
    seq = list(seq)
    if not seq:
        return []
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    keep = rng.random(len(seq)) >= spec.p_drop
    if not keep.any():
        keep[0] = True
    kept = [t for t, k in zip(seq, keep) if k]
    if spec.k == 0 or len(kept) < 2:
        return kept
    scores = np.arange(len(kept)) + rng.uniform(0, spec.k, size=len(kept))
    return [kept[i] for i in np.argsort(scores, kind="stable")]
