"""GRU encoder-decoder that rewrites a text toward a target style.

The encoder is a bidirectional GRU whose concatenated states are max-pooled
over non-overlapping windows of ``pool_window`` positions. The decoder is a
unidirectional GRU conditioned on the summed style embeddings (added to the
BOS input) and on dot-product attention over the pooled latent sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, no_grad, ops
from .errors import ContractError
from .styles import AttributeSchema
from .text import BOS, EOS, PAD


@dataclass
class GeneratorConfig:
    vocab_size: int
    emb_dim: int = 512
    hidden_dim: int = 512
    pool_window: int = 5
    dropout: float = 0.1


@dataclass
class Latent:
    """Encoder output z: values (B, W, 2H) and window mask (B, W)."""

    values: Tensor
    mask: np.ndarray

    @property
    def lengths(self):
        return self.mask.sum(axis=1)

    def select(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return Latent(ops.getitem(self.values, rows), self.mask[rows])

    def repeat(self, n):
        return Latent(ops.repeat_rows(self.values, n), np.repeat(self.mask, n, axis=0))


def pad_batch(seqs, dtype=np.int64):
    """Right-pad id sequences with PAD; returns (ids (B, T), mask (B, T) bool)."""
    lengths = [len(s) for s in seqs]
    t = max(lengths) if lengths else 0
    ids = np.full((len(seqs), t), PAD, dtype=dtype)
    for i, s in enumerate(seqs):
        ids[i, :len(s)] = s
    mask = np.arange(t)[None, :] < np.asarray(lengths)[:, None]
    return ids, mask


def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Generator:
    def __init__(self, config: GeneratorConfig, schema: AttributeSchema, seed=0):
        self.config = config
        self.schema = schema
        rng = np.random.default_rng(seed)
        v, e, h = config.vocab_size, config.emb_dim, config.hidden_dim
        d = 2 * h
        shapes = {
            "tok_emb": ((v, e), None),
            "style_emb": ((schema.total_values, e), None),
            "enc_fw_wx": ((e, 3 * h), h), "enc_fw_wh": ((h, 3 * h), h),
            "enc_fw_bx": ((3 * h,), h), "enc_fw_bh": ((3 * h,), h),
            "enc_bw_wx": ((e, 3 * h), h), "enc_bw_wh": ((h, 3 * h), h),
            "enc_bw_bx": ((3 * h,), h), "enc_bw_bh": ((3 * h,), h),
            "init_w": ((d, h), d), "init_b": ((h,), 0),
            "dec_wx": ((e, 3 * h), h), "dec_wh": ((h, 3 * h), h),
            "dec_bx": ((3 * h,), h), "dec_bh": ((3 * h,), h),
            "att_w": ((h, d), h),
            "comb_w": ((h + d, h), h + d), "comb_b": ((h,), 0),
            "out_w": ((h, v), h), "out_b": ((v,), 0),
        }
        self.params = {}
        for name, (shape, fan_in) in shapes.items():
            if fan_in is None:
                data = rng.normal(0.0, 0.1, size=shape)
            elif fan_in == 0:
                data = np.zeros(shape)
            else:
                data = _uniform(rng, shape, fan_in)
            self.params[name] = Tensor(data, requires_grad=True, name=name)

    # -- helpers -------------------------------------------------------------
    def parameters(self):
        return list(self.params.values())

    def state_dict(self):
        return {k: p.data for k, p in self.params.items()}

    def load_state_dict(self, state):
        for k, p in self.params.items():
            if state[k].shape != p.data.shape:
                raise ContractError(f"parameter {k} has shape {state[k].shape}, expected {p.data.shape}")
            p.data = np.array(state[k], dtype=p.data.dtype)

    def _gru(self, prefix, x, h, mask=None):
        p = self.params
        return ops.gru_cell(x, h, p[prefix + "wx"], p[prefix + "wh"], p[prefix + "bx"], p[prefix + "bh"], mask)

    def _dropout(self, x, rng):
        return ops.dropout(x, self.config.dropout, rng)

    def style_embedding(self, styles):
        """Sum of per-attribute value embeddings, (B, E)."""
        styles = np.array([self.schema.validate(s) for s in styles], dtype=np.int64)
        idx = styles + np.asarray(self.schema.offsets)[None, :]
        return ops.sum(ops.embedding(self.params["style_emb"], idx), axis=1)

    # -- encoder -------------------------------------------------------------
    def encode(self, seqs, rng=None) -> Latent:
        """Encode a batch of id sequences; latent length is ceil(L / pool_window)."""
        if len(seqs) == 0 or any(len(s) == 0 for s in seqs):
            raise ContractError("encode needs non-empty id sequences")
        ids, mask = pad_batch(seqs)
        b, t = ids.shape
        hdim = self.config.hidden_dim
        emb = self._dropout(ops.embedding(self.params["tok_emb"], ids), rng)
        steps = [emb[:, i] for i in range(t)]
        h = Tensor(np.zeros((b, hdim)))
        fw = []
        for i in range(t):
            h = self._gru("enc_fw_", steps[i], h, mask[:, i])
            fw.append(h)
        h = Tensor(np.zeros((b, hdim)))
        bw = [None] * t
        for i in reversed(range(t)):
            h = self._gru("enc_bw_", steps[i], h, mask[:, i])
            bw[i] = h
        states = ops.concat([ops.stack(fw, axis=1), ops.stack(bw, axis=1)], axis=-1)
        pooled, win_mask = ops.max_pool_time(states, mask, self.config.pool_window)
        return Latent(pooled, win_mask)

    # -- decoder -------------------------------------------------------------
    def _init_state(self, latent: Latent):
        pooled = pooled_content(latent)
        return ops.tanh(ops.linear(pooled, self.params["init_w"], self.params["init_b"]))

    def _step(self, x, h, latent: Latent, neg_mask, rng):
        p = self.params
        h = self._gru("dec_", x, h)
        b, w, d = latent.values.shape
        q = ops.matmul(h, p["att_w"]).reshape((b, d, 1))
        scores = ops.matmul(latent.values, q).reshape((b, w)) + neg_mask
        att = ops.softmax(scores, axis=-1).reshape((b, 1, w))
        ctx = ops.matmul(att, latent.values).reshape((b, d))
        comb = ops.tanh(ops.linear(ops.concat([h, ctx], axis=-1), p["comb_w"], p["comb_b"]))
        return h, self._dropout(comb, rng)

    def _logits(self, comb):
        return ops.linear(comb, self.params["out_w"], self.params["out_b"])

    @staticmethod
    def _neg_mask(latent):
        return np.where(latent.mask, 0.0, -1e30)

    def teacher_forced(self, latent: Latent, styles, targets, rng=None):
        """Per-position log-probs of ``targets`` (each followed by EOS).

        Returns ``(token_logp (B, T), mask (B, T), logits (B, T, V))``.
        """
        if any(t == PAD for seq in targets for t in seq):
            raise ContractError("target sequences must not contain PAD")
        b = len(targets)
        if latent.values.shape[0] != b or len(styles) != b:
            raise ContractError("latent, styles and targets disagree on batch size")
        tgt, mask = pad_batch([list(s) + [EOS] for s in targets])
        inp = np.concatenate([np.full((b, 1), BOS), tgt[:, :-1]], axis=1)
        t = tgt.shape[1]
        emb = ops.embedding(self.params["tok_emb"], inp)
        style = self.style_embedding(styles)
        h = self._init_state(latent)
        neg_mask = self._neg_mask(latent)
        outs = []
        for i in range(t):
            x = emb[:, i]
            if i == 0:
                x = x + style
            h, comb = self._step(self._dropout(x, rng), h, latent, neg_mask, rng)
            outs.append(comb)
        logits = self._logits(ops.stack(outs, axis=1))
        token_logp = ops.token_log_probs(logits, tgt)
        return token_logp, mask, logits

    def sequence_log_probs(self, latent: Latent, styles, targets, rng=None):
        """Summed log P(target + EOS | latent, style) per sequence, shape (B,)."""
        if any(len(s) == 0 for s in targets):
            raise ContractError("targets must be non-empty")
        token_logp, mask, _ = self.teacher_forced(latent, styles, targets, rng)
        return ops.sum(token_logp * mask, axis=1)

    def decode(self, latent: Latent, styles, max_len, mode="greedy", temperature=1.0, rng=None,
               min_len=1):
        """Free-running decoding without gradients.

        ``mode`` is ``"greedy"`` or ``"sample"``; sampling draws from
        ``softmax(logits / temperature)`` with ``rng``. EOS is disallowed
        before ``min_len`` tokens so outputs can be re-encoded. Returns
        ``(ids, logps)``: per-example token lists (EOS stripped) and the model
        log-probability of every emitted token (including EOS when emitted).
        """
        if mode not in ("greedy", "sample"):
            raise ContractError(f"unknown decode mode {mode!r}")
        if mode == "sample" and rng is None:
            raise ContractError("sampling needs an rng")
        b = latent.values.shape[0]
        limits = np.broadcast_to(np.asarray(max_len, dtype=np.int64), (b,))
        if limits.min() < 1:
            raise ContractError("max_len must be >= 1")
        with no_grad():
            style = self.style_embedding(styles)
            h = self._init_state(latent)
            neg_mask = self._neg_mask(latent)
            prev = np.full(b, BOS)
            ids = [[] for _ in range(b)]
            logps = [[] for _ in range(b)]
            done = np.zeros(b, dtype=bool)
            for step in range(int(limits.max())):
                x = ops.embedding(self.params["tok_emb"], prev)
                if step == 0:
                    x = x + style
                h, comb = self._step(x, h, latent, neg_mask, None)
                logits = self._logits(comb).data
                lsm = logits - logits.max(1, keepdims=True)
                lsm = lsm - np.log(np.exp(lsm).sum(1, keepdims=True))
                choose = logits.copy()
                choose[:, PAD] = -np.inf
                choose[:, BOS] = -np.inf
                if step < min_len:
                    choose[:, EOS] = -np.inf
                if mode == "greedy":
                    nxt = np.argmax(choose, axis=1)
                else:
                    nxt = _sample(choose, temperature, rng)
                for i in range(b):
                    if done[i]:
                        continue
                    logps[i].append(float(lsm[i, nxt[i]]))
                    if nxt[i] == EOS:
                        done[i] = True
                    else:
                        ids[i].append(int(nxt[i]))
                        if len(ids[i]) >= limits[i]:
                            done[i] = True
                if done.all():
                    break
                prev = np.where(nxt == EOS, PAD, nxt)
        return ids, logps


def _sample(logits, temperature, rng):
    if temperature <= 0:
        raise ContractError("temperature must be positive")
    z = logits / temperature
    z = z - z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    u = rng.random((p.shape[0], 1))
    idx = (np.cumsum(p, axis=1) < u).sum(axis=1)
    # guard against cumsum round-off landing past the last admissible class
    idx = np.minimum(idx, p.shape[1] - 1)
    bad = p[np.arange(len(idx)), idx] == 0
    if bad.any():
        idx[bad] = np.argmax(p[bad], axis=1)
    return idx


def pooled_content(latent: Latent) -> Tensor:
    """Global mean over the valid latent windows, (B, 2H)."""
    m = latent.mask.astype(np.float64)
    s = ops.sum(latent.values * m[:, :, None], axis=1)
    return s / np.maximum(m.sum(axis=1, keepdims=True), 1.0)


def content_mse(a, b) -> float:
    a = np.asarray(a.data if isinstance(a, Tensor) else a, dtype=np.float64)
    b = np.asarray(b.data if isinstance(b, Tensor) else b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"content vectors differ in shape {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))
