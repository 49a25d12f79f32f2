"""Bag-of-n-grams linear style classifier with hashed features.

Each text is the mean of embeddings of its hashed word 1-grams and 2-grams;
one softmax head per attribute sits on top. Heads start at zero, so the
model is symmetric under relabelling of classes.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ContractError
from ..styles import AttributeSchema


def hash_features(tokens, buckets, max_n=2):
    feats = []
    for n in range(1, max_n + 1):
        for i in range(len(tokens) - n + 1):
            key = " ".join(tokens[i:i + n]).encode("utf-8")
            feats.append(zlib.crc32(key) % buckets)
    return feats


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class StyleDistribution:
    """Per-attribute probability vectors for one text."""

    probs: tuple

    def argmax(self):
        return tuple(int(np.argmax(p)) for p in self.probs)


class NGramClassifier:
    def __init__(self, schema: AttributeSchema, buckets=2 ** 16, dim=32, max_n=2, seed=0):
        self.schema = schema
        self.buckets = buckets
        self.dim = dim
        self.max_n = max_n
        rng = np.random.default_rng(seed)
        self.emb = rng.uniform(-1.0 / dim, 1.0 / dim, size=(buckets, dim))
        self.heads = [np.zeros((dim, s)) for s in schema.sizes]
        self.biases = [np.zeros(s) for s in schema.sizes]
        self.loss_curve = []

    def _hidden(self, batch_tokens):
        h = np.zeros((len(batch_tokens), self.dim))
        feats = [hash_features(t, self.buckets, self.max_n) for t in batch_tokens]
        for i, f in enumerate(feats):
            if f:
                h[i] = self.emb[f].mean(axis=0)
        return h, feats

    def predict_proba(self, batch_tokens):
        """List (one per attribute) of (N, |S_k|) probability arrays."""
        h, _ = self._hidden(batch_tokens)
        return [_softmax(h @ w + b) for w, b in zip(self.heads, self.biases)]

    def classify(self, tokens) -> StyleDistribution:
        return StyleDistribution(tuple(p[0] for p in self.predict_proba([tokens])))

    def predict(self, batch_tokens):
        """Argmax class per attribute, ties to the lowest index; (N, m) ints."""
        probs = self.predict_proba(batch_tokens)
        return np.stack([np.argmax(p, axis=1) for p in probs], axis=1)

    def fit(self, texts, styles, epochs=10, lr=1.0, batch_size=16, seed=0):
        styles = np.array([self.schema.validate(s) for s in styles], dtype=np.int64)
        if len(texts) != len(styles) or len(texts) == 0:
            raise ContractError("classifier needs one style per non-empty text")
        for k, name in enumerate(self.schema.names):
            if len(np.unique(styles[:, k])) < 2:
                raise ConfigError(f"attribute {name!r} has a single observed value")
        rng = np.random.default_rng(seed)
        n = len(texts)
        total_steps = epochs * ((n + batch_size - 1) // batch_size)
        step = 0
        self.loss_curve = []
        for _ in range(epochs):
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, batch_size):
                idx = order[start:start + batch_size]
                rate = lr * (1.0 - step / total_steps)
                epoch_loss += self._sgd([texts[i] for i in idx], styles[idx], rate) * len(idx)
                step += 1
            self.loss_curve.append(float(epoch_loss / n))
        return self

    def _sgd(self, batch_tokens, targets, rate):
        h, feats = self._hidden(batch_tokens)
        b = len(batch_tokens)
        m = self.schema.m
        dh = np.zeros_like(h)
        loss = 0.0
        for k in range(m):
            p = _softmax(h @ self.heads[k] + self.biases[k])
            loss += -np.log(p[np.arange(b), targets[:, k]] + 1e-300).mean()
            g = p.copy()
            g[np.arange(b), targets[:, k]] -= 1.0
            g /= b * m
            dh += g @ self.heads[k].T
            self.heads[k] -= rate * (h.T @ g)
            self.biases[k] -= rate * g.sum(axis=0)
        for i, f in enumerate(feats):
            if f:
                np.add.at(self.emb, f, -rate * dh[i] / len(f))
        return loss / m

    def aligned_to(self, schema: AttributeSchema) -> "NGramClassifier":
        """This classifier with its heads' classes reordered to follow ``schema``."""
        if schema == self.schema:
            return self
        perm = self.schema.permutation_to(schema)
        clf = NGramClassifier.__new__(NGramClassifier)
        clf.__dict__.update(self.__dict__)
        clf.schema = schema
        clf.heads = [h[:, p] for h, p in zip(self.heads, perm)]
        clf.biases = [b[p] for b, p in zip(self.biases, perm)]
        return clf

    # -- persistence ---------------------------------------------------------
    def save(self, path):
        meta = {"schema": self.schema.to_dict(), "buckets": self.buckets, "dim": self.dim, "max_n": self.max_n}
        arrays = {"emb": self.emb}
        for k in range(self.schema.m):
            arrays[f"head{k}"] = self.heads[k]
            arrays[f"bias{k}"] = self.biases[k]
        np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(z["__meta__"].tobytes().decode())
            clf = cls.__new__(cls)
            clf.schema = AttributeSchema.from_dict(meta["schema"])
            clf.buckets, clf.dim, clf.max_n = meta["buckets"], meta["dim"], meta["max_n"]
            clf.emb = z["emb"].copy()
            clf.heads = [z[f"head{k}"].copy() for k in range(clf.schema.m)]
            clf.biases = [z[f"bias{k}"].copy() for k in range(clf.schema.m)]
            clf.loss_curve = []
        return clf


def train_classifier(texts, styles, schema, epochs=10, lr=1.0, batch_size=16, seed=0, **kwargs) -> NGramClassifier:
    """Fit a classifier on tokenized ``texts`` with style tuples ``styles``."""
    clf = NGramClassifier(schema, seed=seed, **kwargs)
    return clf.fit(texts, styles, epochs=epochs, lr=lr, batch_size=batch_size, seed=seed)


def accuracy(predicted_texts, target_styles, classifier: NGramClassifier) -> float:
    """Percentage of argmax predictions matching the targets, averaged over attributes."""
    if len(predicted_texts) == 0:
        raise ContractError("accuracy needs at least one prediction")
    if len(predicted_texts) != len(target_styles):
        raise ContractError("predictions and targets differ in length")
    targets = np.array([classifier.schema.validate(s) for s in target_styles])
    pred = classifier.predict(predicted_texts)
    return float((pred == targets).mean(axis=0).mean() * 100.0)
