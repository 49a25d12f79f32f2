"""Skip-gram word vectors trained with negative sampling."""

from __future__ import annotations

import json
from collections import Counter

import numpy as np

from ..errors import InputError


class EmbeddingTable:
    """Token -> vector mapping; lookups of unknown tokens raise KeyError."""

    def __init__(self, tokens, vectors):
        self.itos = list(tokens)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        self.vectors = np.asarray(vectors, dtype=np.float64)

    def __contains__(self, token):
        return token in self.stoi

    def __getitem__(self, token):
        return self.vectors[self.stoi[token]]

    def __len__(self):
        return len(self.itos)

    @property
    def dim(self):
        return self.vectors.shape[1]

    def cosine(self, a, b):
        va, vb = self[a], self[b]
        return float(va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb) + 1e-12))

    def save(self, path):
        meta = json.dumps({"itos": self.itos}).encode()
        np.savez(path, __meta__=np.frombuffer(meta, dtype=np.uint8), vectors=self.vectors)

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(z["__meta__"].tobytes().decode())
            return cls(meta["itos"], z["vectors"].copy())


def train_embeddings(corpus, dim=100, window=5, negatives=5, epochs=5, seed=0, lr=0.025,
                     batch_size=256, min_count=1) -> EmbeddingTable:
    """Skip-gram with negative sampling over tokenized sentences.

    Follows the word2vec recipe: per-position reduced windows, negatives
    drawn from the unigram distribution raised to 0.75, and a learning rate
    decayed linearly to zero. Deterministic given ``seed``.
    """
    sentences = [list(s) for s in corpus]
    if not sentences or not any(sentences):
        raise InputError("cannot train embeddings on an empty corpus")
    freq = Counter(t for s in sentences for t in s)
    itos = sorted((t for t, c in freq.items() if c >= min_count), key=lambda t: (-freq[t], t))
    stoi = {t: i for i, t in enumerate(itos)}
    v = len(itos)
    rng = np.random.default_rng(seed)
    w_in = (rng.random((v, dim)) - 0.5) / dim
    w_out = np.zeros((v, dim))
    noise = np.array([freq[t] for t in itos], dtype=np.float64) ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())

    coded = [np.array([stoi[t] for t in s if t in stoi], dtype=np.int64) for s in sentences]
    total_pairs_est = epochs * sum(len(s) for s in coded) * window
    processed = 0
    for _ in range(epochs):
        centers, contexts = [], []
        for sent in (coded[i] for i in rng.permutation(len(coded))):
            n = len(sent)
            if n < 2:
                continue
            spans = rng.integers(1, window + 1, size=n)
            for i in range(n):
                lo, hi = max(0, i - spans[i]), min(n, i + spans[i] + 1)
                for j in range(lo, hi):
                    if j != i:
                        centers.append(sent[i])
                        contexts.append(sent[j])
        centers = np.asarray(centers, dtype=np.int64)
        contexts = np.asarray(contexts, dtype=np.int64)
        for start in range(0, len(centers), batch_size):
            c = centers[start:start + batch_size]
            o = contexts[start:start + batch_size]
            b = len(c)
            rate = max(lr * (1.0 - processed / max(total_pairs_est, 1)), lr * 1e-4)
            processed += b
            neg = np.searchsorted(noise_cdf, rng.random((b, negatives)))
            neg = np.minimum(neg, v - 1)
            targets = np.concatenate([o[:, None], neg], axis=1)          # (b, 1+K)
            labels = np.zeros((b, 1 + negatives))
            labels[:, 0] = 1.0
            vc = w_in[c]                                                  # (b, d)
            vo = w_out[targets]                                           # (b, 1+K, d)
            score = np.einsum("bd,bkd->bk", vc, vo)
            sig = 1.0 / (1.0 + np.exp(-np.clip(score, -30, 30)))
            g = (labels - sig) * rate                                     # ascent direction
            grad_in = np.einsum("bk,bkd->bd", g, vo)
            grad_out = g[:, :, None] * vc[:, None, :]
            np.add.at(w_out, targets.reshape(-1), grad_out.reshape(-1, dim))
            np.add.at(w_in, c, grad_in)
    return EmbeddingTable(itos, w_in)
