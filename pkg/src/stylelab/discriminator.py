"""Text-level multi-class style discriminator for adversarial training.

One GRU reads the text; each attribute k gets a head with ``|S_k| + 1``
logits where class 0 means "generated" and class ``j + 1`` means value j.
Inputs are either token ids (real text) or per-position probability
vectors over the vocabulary (generated text), which are mixed into soft
embeddings so the adversarial signal stays differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Adam, Tensor, backward, ops
from .errors import ContractError
from .generator import pad_batch
from .styles import AttributeSchema

FAKE = 0


@dataclass
class DiscriminatorConfig:
    vocab_size: int
    emb_dim: int = 512
    hidden_dim: int = 512


class Discriminator:
    def __init__(self, config: DiscriminatorConfig, schema: AttributeSchema, seed=0):
        self.config = config
        self.schema = schema
        rng = np.random.default_rng(seed)
        v, e, h = config.vocab_size, config.emb_dim, config.hidden_dim
        bound = 1.0 / np.sqrt(h)
        self.params = {
            "emb": Tensor(rng.normal(0.0, 0.1, (v, e)), requires_grad=True),
            "wx": Tensor(rng.uniform(-bound, bound, (e, 3 * h)), requires_grad=True),
            "wh": Tensor(rng.uniform(-bound, bound, (h, 3 * h)), requires_grad=True),
            "bx": Tensor(rng.uniform(-bound, bound, (3 * h,)), requires_grad=True),
            "bh": Tensor(rng.uniform(-bound, bound, (3 * h,)), requires_grad=True),
        }
        for k, size in enumerate(schema.sizes):
            self.params[f"head{k}_w"] = Tensor(rng.uniform(-bound, bound, (h, size + 1)), requires_grad=True)
            self.params[f"head{k}_b"] = Tensor(np.zeros(size + 1), requires_grad=True)

    def parameters(self):
        return list(self.params.values())

    def state_dict(self):
        return {k: p.data for k, p in self.params.items()}

    def load_state_dict(self, state):
        for k, p in self.params.items():
            p.data = np.array(state[k], dtype=p.data.dtype)

    def predict(self, inputs, mask=None, frozen=False):
        """Per-attribute logits for a batch.

        ``inputs`` is either a list of id sequences, or an array/Tensor of
        shape (B, T, V) holding per-position distributions, in which case
        ``mask`` (B, T) marks the valid positions. With ``frozen=True`` the
        discriminator weights act as constants (no gradient reaches them).
        """
        p = self.params
        if frozen:
            p = {k: Tensor(v.data) for k, v in p.items()}
        if isinstance(inputs, (Tensor, np.ndarray)):
            probs = inputs if isinstance(inputs, Tensor) else Tensor(inputs)
            if probs.ndim != 3 or probs.shape[1] == 0:
                raise ContractError("soft inputs must have shape (B, T, V) with T >= 1")
            if mask is None:
                mask = np.ones(probs.shape[:2], dtype=bool)
            mask = np.asarray(mask, dtype=bool)
            emb = ops.matmul(probs, p["emb"])
        else:
            if len(inputs) == 0 or any(len(s) == 0 for s in inputs):
                raise ContractError("discriminator needs non-empty inputs")
            ids, mask = pad_batch(inputs)
            emb = ops.embedding(p["emb"], ids)
        if not mask.any(axis=1).all():
            raise ContractError("discriminator needs non-empty inputs")
        b, t = mask.shape
        h = Tensor(np.zeros((b, self.config.hidden_dim)))
        for i in range(t):
            h = ops.gru_cell(emb[:, i], h, p["wx"], p["wh"], p["bx"], p["bh"], mask[:, i])
        return [ops.linear(h, p[f"head{k}_w"], p[f"head{k}_b"]) for k in range(self.schema.m)]

    def loss(self, logits, targets):
        """Mean over batch of the per-attribute-averaged cross-entropy.

        ``targets`` is (B, m) of head classes (0 = generated, j+1 = value j).
        """
        targets = np.asarray(targets, dtype=np.int64)
        per_attr = [-ops.token_log_probs(lg, targets[:, k]).mean() for k, lg in enumerate(logits)]
        total = per_attr[0]
        for extra in per_attr[1:]:
            total = total + extra
        return total * (1.0 / len(per_attr))


def real_targets(styles):
    styles = np.asarray(styles, dtype=np.int64)
    return styles + 1


def disc_predict(disc: Discriminator, inputs, mask=None):
    return disc.predict(inputs, mask)


def disc_train_step(disc: Discriminator, optimizer: Adam, real_ids, real_styles, generated, generated_mask=None):
    """One Adam step on the discriminator: real (x, s) -> s classes, generated -> class 0.

    ``generated`` is a list of id sequences or a (B, T, V) probability array.
    Returns the scalar loss before the update.
    """
    if len(real_ids) == 0 or len(generated) == 0:
        raise ContractError("disc_train_step needs non-empty real and generated batches")
    if real_styles is None or len(real_styles) != len(real_ids) or any(s is None for s in real_styles):
        raise ContractError("every real example needs a style")
    real_styles = [disc.schema.validate(s) for s in real_styles]
    if isinstance(generated, Tensor):
        generated = generated.data
    n_gen = generated.shape[0] if isinstance(generated, np.ndarray) else len(generated)
    optimizer.zero_grad()
    real_loss = disc.loss(disc.predict(real_ids), real_targets(real_styles))
    fake_loss = disc.loss(disc.predict(generated, generated_mask),
                          np.full((n_gen, disc.schema.m), FAKE))
    n_real = len(real_ids)
    loss = (real_loss * n_real + fake_loss * n_gen) * (1.0 / (n_real + n_gen))
    backward(loss)
    optimizer.step()
    return loss.item()
