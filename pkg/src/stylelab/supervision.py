"""Training objectives: denoising autoencoding, backtranslation, adversarial and MRT.

All losses are scalar Tensors averaged over the batch. ``train_step``
combines the active ones with the annealed weights and applies one clipped
Adam update to the generator.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Adam, Tensor, backward, no_grad, ops
from .discriminator import Discriminator, disc_train_step
from .errors import ConfigError, ContractError
from .generator import Generator, Latent, pad_batch
from .metrics.classifier import NGramClassifier
from .metrics.transport import dc_emd
from .styles import AttributeSchema
from .text import NoiseSpec, Vocab, noise


class Regime(enum.Enum):
    DAE = "dae"
    DAE_BT = "dae+bt"
    DAE_BT_ADV = "dae+bt+adv"
    DAE_BT_MRT = "dae+bt+mrt"

    @classmethod
    def parse(cls, text):
        key = text.strip().lower().replace(" ", "")
        for r in cls:
            if r.value == key:
                return r
        raise ConfigError(f"unknown regime {text!r}; expected one of {[r.value for r in cls]}")

    @property
    def uses_bt(self):
        return self is not Regime.DAE

    @property
    def uses_adv(self):
        return self is Regime.DAE_BT_ADV

    @property
    def uses_mrt(self):
        return self is Regime.DAE_BT_MRT


@dataclass(frozen=True)
class LossWeights:
    ae: float
    bt: float
    adv: float
    mrt: float

    def __post_init__(self):
        if min(self.ae, self.bt, self.adv, self.mrt) < 0:
            raise ContractError("loss weights must be non-negative")


@dataclass(frozen=True)
class MrtSpec:
    n_samples: int = 10
    alpha: float = 0.005
    temperature: float = 1.0
    seed: int = 0
    max_examples: int | None = None  # cap on batch rows used for the MRT term

    def __post_init__(self):
        if self.n_samples < 2:
            raise ContractError("MRT needs at least 2 samples")
        if self.alpha <= 0:
            raise ContractError("MRT sharpness alpha must be positive")


def lambda_schedule(step, total_steps, regime: Regime = Regime.DAE_BT) -> LossWeights:
    """lambda_ae decays linearly from 1 to 0 over training; lambda_bt stays 1."""
    if total_steps <= 0:
        ae = 0.0
    else:
        ae = max(0.0, 1.0 - step / total_steps)
    if regime is Regime.DAE:
        return LossWeights(1.0, 0.0, 0.0, 0.0)
    return LossWeights(ae, 1.0, 1.0 if regime.uses_adv else 0.0, 1.0 if regime.uses_mrt else 0.0)


def perturb_style(style, schema: AttributeSchema, rng):
    """Uniformly pick a valid style differing from ``style`` in >= 1 attribute."""
    style = schema.validate(style)
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    sizes = schema.sizes
    if all(s == 1 for s in sizes):
        raise ContractError("no perturbation exists: every attribute has one value")
    # rejection sampling over the full grid is uniform over the eligible set
    while True:
        cand = tuple(int(rng.integers(s)) for s in sizes)
        if cand != style:
            return cand


def _mean(t: Tensor):
    return ops.mean(t)


def loss_dae(gen: Generator, ids, styles, noise_spec: NoiseSpec, rng=None):
    """Mean of -log P(x | e(noise(x)), s)."""
    if len(ids) == 0:
        raise ContractError("batch must be non-empty")
    rng = np.random.default_rng(noise_spec.seed) if rng is None else rng
    noisy = [noise(x, noise_spec, rng) for x in ids]
    drop_rng = rng if gen.config.dropout > 0 else None
    latent = gen.encode(noisy, drop_rng)
    return -_mean(gen.sequence_log_probs(latent, styles, ids, drop_rng))


def transfer_max_len(lengths):
    lengths = np.asarray(lengths)
    return lengths + np.maximum(2, lengths // 2)


@dataclass
class BTPass:
    """Intermediate results of one backtranslation pass, reused by ADV and MRT."""

    ids: list
    styles: list
    target_styles: list
    x_hat: list
    latent_hat: Latent
    loss: Tensor


def backtranslate(gen: Generator, ids, styles, rng, target_styles=None) -> BTPass:
    """x_hat = greedy d(e(x), s_hat) without gradients; loss = -log P(x | e(x_hat), s)."""
    if len(ids) == 0:
        raise ContractError("batch must be non-empty")
    if target_styles is None:
        target_styles = [perturb_style(s, gen.schema, rng) for s in styles]
    with no_grad():
        latent = gen.encode(ids)
        x_hat, _ = gen.decode(latent, target_styles, transfer_max_len([len(x) for x in ids]))
    drop_rng = rng if gen.config.dropout > 0 else None
    latent_hat = gen.encode(x_hat, drop_rng)
    loss = -_mean(gen.sequence_log_probs(latent_hat, styles, ids, drop_rng))
    return BTPass(list(ids), list(styles), list(target_styles), x_hat, latent_hat, loss)


def loss_bt(gen: Generator, ids, styles, rng):
    return backtranslate(gen, ids, styles, rng).loss


def soft_outputs(gen: Generator, ids, x_hat, target_styles, rng=None):
    """Differentiable per-position output distributions of x_hat given (x, s_hat).

    Returns (probs (B, T, V) Tensor, mask (B, T)) over the x_hat positions.
    """
    drop_rng = rng if gen.config.dropout > 0 else None
    latent = gen.encode(ids, drop_rng)
    _, _, logits = gen.teacher_forced(latent, target_styles, x_hat, drop_rng)
    t = max(len(x) for x in x_hat)
    probs = ops.softmax(logits[:, :t], axis=-1)
    _, mask = pad_batch(x_hat)
    return probs, mask


def loss_adv(gen: Generator, disc: Discriminator, ids, x_hat, target_styles, rng=None):
    """Mean over batch and attributes of -log P_D(s_hat | x_hat); D is held constant."""
    probs, mask = soft_outputs(gen, ids, x_hat, target_styles, rng)
    logits = disc.predict(probs, mask, frozen=True)
    targets = np.asarray(target_styles, dtype=np.int64) + 1
    return disc.loss(logits, targets), probs, mask


def mrt_risk(logp, delta, alpha):
    """Expected risk under the renormalized pool posterior Q ∝ P^alpha.

    ``logp`` is a (B, N) Tensor of candidate log-probabilities, ``delta`` a
    (B, N) array of constant losses. Returns (per-example risk (B,), Q).
    """
    logp = logp if isinstance(logp, Tensor) else Tensor(logp)
    q = ops.softmax(logp * alpha, axis=-1)
    return ops.sum(q * np.asarray(delta, dtype=np.float64), axis=-1), q


def mrt_delta(p_hat, p_star, source_style):
    """1 - clamp(dcEMD(q(x_hat) -> q(x*), toward s), 0, 1), averaged over attributes.

    ``p_hat`` and ``p_star`` are per-attribute lists of probability vectors.
    """
    vals = []
    for ph, ps, s in zip(p_hat, p_star, source_style):
        d = dc_emd(ph / ph.sum(), ps / ps.sum(), s)
        vals.append(1.0 - min(max(d, 0.0), 1.0))
    return float(np.mean(vals))


@dataclass
class MrtPool:
    """Sampled reconstruction candidates for the MRT term and their constant losses."""

    rows: np.ndarray
    styles: list
    candidates: list   # len(rows) * n_samples id lists, grouped by row
    delta: np.ndarray  # (len(rows), n_samples)


def sample_pool(gen: Generator, classifier: NGramClassifier, vocab: Vocab, bt: BTPass, spec: MrtSpec, rng) -> MrtPool:
    """Draw N candidates x* ~ P(. | e(x_hat), s) per row and score them with the classifier."""
    if classifier is None:
        raise ConfigError("MRT needs a trained style classifier")
    if classifier.schema != gen.schema:
        raise ContractError("classifier schema does not match the generator schema")
    rows = np.arange(len(bt.ids))
    if spec.max_examples is not None:
        rows = rows[:spec.max_examples]
    n = spec.n_samples
    styles = [bt.styles[i] for i in rows]
    with no_grad():
        latent = bt.latent_hat.select(rows).repeat(n)
        limits = np.repeat(transfer_max_len([len(bt.ids[i]) for i in rows]), n)
        cands, _ = gen.decode(Latent(Tensor(latent.values.data), latent.mask), [s for s in styles for _ in range(n)],
                              limits, mode="sample", temperature=spec.temperature, rng=rng)
    p_hat = classifier.predict_proba([vocab.decode(bt.x_hat[i]) for i in rows])
    p_star = classifier.predict_proba([vocab.decode(c) for c in cands])
    delta = np.zeros((len(rows), n))
    for r in range(len(rows)):
        for j in range(n):
            idx = r * n + j
            delta[r, j] = mrt_delta([p[r] for p in p_hat], [p[idx] for p in p_star], styles[r])
    return MrtPool(rows, styles, cands, delta)


def pool_risk(gen: Generator, bt: BTPass, pool: MrtPool, alpha, rng=None):
    """Mean expected risk over a fixed candidate pool; differentiable through Q only."""
    n = pool.delta.shape[1]
    latent = bt.latent_hat.select(pool.rows).repeat(n)
    drop_rng = rng if gen.config.dropout > 0 else None
    styles = [s for s in pool.styles for _ in range(n)]
    logp = gen.sequence_log_probs(latent, styles, pool.candidates, drop_rng).reshape((len(pool.rows), n))
    risk, _ = mrt_risk(logp, pool.delta, alpha)
    return _mean(risk)


def loss_mrt(gen: Generator, classifier: NGramClassifier, vocab: Vocab, bt: BTPass, spec: MrtSpec, rng):
    """Minimum-risk term over N sampled reconstructions x* ~ P(. | e(x_hat), s)."""
    return pool_risk(gen, bt, sample_pool(gen, classifier, vocab, bt, spec, rng), spec.alpha, rng)


@dataclass
class TrainState:
    """Everything train_step mutates or reads: models, optimizers, specs."""

    generator: Generator
    gen_opt: Adam
    vocab: Vocab
    regime: Regime
    noise_spec: NoiseSpec = field(default_factory=NoiseSpec)
    mrt_spec: MrtSpec = field(default_factory=MrtSpec)
    discriminator: Discriminator | None = None
    disc_opt: Adam | None = None
    classifier: NGramClassifier | None = None
    seed: int = 0

    def __post_init__(self):
        if self.regime.uses_mrt and self.classifier is None:
            raise ConfigError("the dae+bt+mrt regime needs a style classifier")
        if self.regime.uses_adv and (self.discriminator is None or self.disc_opt is None):
            raise ConfigError("the dae+bt+adv regime needs a discriminator and its optimizer")


def train_step(state: TrainState, ids, styles, step, total_steps) -> dict:
    """One generator update (plus one discriminator update under ADV).

    Returns a breakdown with the weights, each active loss and the total.
    """
    if len(ids) == 0:
        raise ContractError("batch must be non-empty")
    regime = state.regime
    weights = lambda_schedule(step, total_steps, regime)
    rng = np.random.default_rng([state.seed, step])
    gen = state.generator
    state.gen_opt.zero_grad()
    terms = {}
    if weights.ae > 0 or regime is Regime.DAE:
        terms["ae"] = (weights.ae, loss_dae(gen, ids, styles, state.noise_spec, rng))
    bt = adv_probs = None
    if regime.uses_bt:
        bt = backtranslate(gen, ids, styles, rng)
        terms["bt"] = (weights.bt, bt.loss)
    if regime.uses_adv:
        adv_loss, adv_probs, adv_mask = loss_adv(gen, state.discriminator, ids, bt.x_hat, bt.target_styles, rng)
        terms["adv"] = (weights.adv, adv_loss)
    if regime.uses_mrt:
        terms["mrt"] = (weights.mrt, loss_mrt(gen, state.classifier, state.vocab, bt, state.mrt_spec, rng))
    total = None
    for w, loss in terms.values():
        part = loss * w
        total = part if total is None else total + part
    breakdown = {"lambda_ae": weights.ae, "lambda_bt": weights.bt, "lambda_adv": weights.adv,
                 "lambda_mrt": weights.mrt}
    for name, (_, loss) in terms.items():
        breakdown[f"loss_{name}"] = loss.item()
    breakdown["total"] = total.item()
    if not math.isfinite(breakdown["total"]):
        return breakdown
    backward(total)
    state.gen_opt.step()
    if regime.uses_adv:
        breakdown["loss_disc"] = disc_train_step(state.discriminator, state.disc_opt, ids, styles,
                                                 adv_probs.data, adv_mask)
    return breakdown
