"""End-to-end training runs: data preparation, the update loop, logging and checkpoints."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .autodiff import Adam, no_grad
from .checkpoint import save_checkpoint
from .config import ExperimentConfig
from .data import Dataset, filter_length, generate_synthetic, infer_schema, load_synthetic_spec, \
    load_tsv, synthetic_spec_from_config
from .discriminator import Discriminator, DiscriminatorConfig
from .errors import ConfigError, ContractError, StyleLabError
from .generator import Generator, GeneratorConfig, content_mse, pooled_content
from .metrics.bleu import sbleu
from .metrics.classifier import NGramClassifier, accuracy, train_classifier
from .supervision import TrainState, lambda_schedule, perturb_style, train_step, transfer_max_len
from .text import Vocab, build_vocab

LOG_COLUMNS = ("step", "epoch", "lambda_ae", "lambda_bt", "lambda_adv", "lambda_mrt",
               "loss_ae", "loss_bt", "loss_adv", "loss_mrt", "loss_disc", "total",
               "dev_acc", "dev_sbleu", "content_mse")


class TrainingDiverged(StyleLabError, RuntimeError):
    """A loss became NaN or infinite; a diagnostic dump was written."""


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.synthetic is not None:
        if cfg.synthetic == "inline":
            spec = synthetic_spec_from_config(cfg.parser)
        else:
            spec = load_synthetic_spec(None if cfg.synthetic == "builtin" else cfg.synthetic)
        if cfg.schema is not None and cfg.schema != spec.schema:
            raise ConfigError("[schema] disagrees with the synthetic corpus attributes")
        ds = generate_synthetic(spec)
    else:
        schema = cfg.schema or infer_schema(cfg.train_path)
        train, _ = load_tsv(cfg.train_path, schema)
        dev, _ = load_tsv(cfg.dev_path, schema)
        test = load_tsv(cfg.test_path, schema)[0] if cfg.test_path else []
        ds = Dataset(schema, train, dev, test, origin=cfg.train_path)
    ds.train = filter_length(ds.train, cfg.max_tokens)
    if not ds.train or not ds.dev:
        raise ConfigError("training and dev splits must be non-empty")
    return ds


def transfer(gen: Generator, vocab: Vocab, texts, styles, batch_size=64):
    """Greedy rewrite of tokenized ``texts`` toward ``styles``; returns token lists."""
    out = [[] for _ in texts]
    todo = [i for i, t in enumerate(texts) if len(t) > 0]
    for start in range(0, len(todo), batch_size):
        rows = todo[start:start + batch_size]
        ids = [vocab.encode(texts[i]) for i in rows]
        with no_grad():
            latent = gen.encode(ids)
            dec, _ = gen.decode(latent, [styles[i] for i in rows], transfer_max_len([len(x) for x in ids]))
        for i, d in zip(rows, dec):
            out[i] = vocab.decode(d)
    return out


def transfer_content_mse(gen: Generator, vocab: Vocab, texts, outputs):
    """MSE between globally pooled encodings of sources and their rewrites."""
    pairs = [(a, b) for a, b in zip(texts, outputs) if a and b]
    if not pairs:
        return float("nan")
    with no_grad():
        za = pooled_content(gen.encode([vocab.encode(a) for a, _ in pairs]))
        zb = pooled_content(gen.encode([vocab.encode(b) for _, b in pairs]))
    return content_mse(za, zb)


@dataclass
class DevProbe:
    texts: list
    targets: list
    classifier: NGramClassifier

    def measure(self, gen: Generator, vocab: Vocab):
        outputs = transfer(gen, vocab, self.texts, self.targets)
        return {
            "dev_acc": accuracy(outputs, self.targets, self.classifier),
            "dev_sbleu": sbleu(outputs, self.texts),
            "content_mse": transfer_content_mse(gen, vocab, self.texts, outputs),
        }


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _param_report(gen: Generator):
    return {k: {"finite": bool(np.isfinite(p.data).all()), "norm": float(np.linalg.norm(p.data))}
            for k, p in gen.params.items()}


def run_training(cfg: ExperimentConfig, dataset: Dataset | None = None, classifier: NGramClassifier | None = None,
                 progress=None):
    """Train one model; returns the output directory.

    Writes ``train_log.csv``, ``checkpoints/step_XXXXXX.npz`` at every
    checkpoint interval, and ``checkpoints/final.npz``.
    """
    ds = dataset if dataset is not None else load_dataset(cfg)
    schema = ds.schema
    vocab = build_vocab([ex.tokens for ex in ds.train], cfg.vocab_min_count)
    if classifier is None:
        if cfg.classifier_path is not None:
            classifier = NGramClassifier.load(cfg.classifier_path)
        else:
            classifier = train_classifier([ex.tokens for ex in ds.train], [ex.style for ex in ds.train],
                                          schema, seed=cfg.seed)
    try:
        classifier = classifier.aligned_to(schema)
    except ContractError as exc:
        raise ConfigError("classifier schema does not match the corpus schema") from exc

    gen = Generator(GeneratorConfig(len(vocab), cfg.emb_dim, cfg.hidden_dim, cfg.pool_window, cfg.dropout),
                    schema, seed=cfg.seed)
    gen_opt = Adam(gen.parameters(), lr=cfg.lr, betas=cfg.betas, clip=cfg.clip, weight_decay=cfg.weight_decay)
    disc = disc_opt = None
    if cfg.regime.uses_adv:
        disc = Discriminator(DiscriminatorConfig(len(vocab), cfg.disc_emb_dim or cfg.emb_dim,
                                                 cfg.disc_hidden_dim or cfg.hidden_dim), schema, seed=cfg.seed + 1)
        disc_opt = Adam(disc.parameters(), lr=cfg.disc_lr or cfg.lr, betas=cfg.betas, clip=cfg.clip)
    state = TrainState(gen, gen_opt, vocab, cfg.regime, cfg.noise, cfg.mrt, disc, disc_opt,
                       classifier if cfg.regime.uses_mrt else None, seed=cfg.seed)

    dev = ds.dev[:cfg.dev_size]
    probe_rng = np.random.default_rng([cfg.seed, 7])
    probe = DevProbe([ex.tokens for ex in dev], [perturb_style(ex.style, schema, probe_rng) for ex in dev],
                     classifier)

    train_ids = [vocab.encode(ex.tokens) for ex in ds.train]
    train_styles = [ex.style for ex in ds.train]
    n = len(train_ids)
    total = cfg.total_steps(n)
    eval_every = cfg.eval_every or max(1, total // 20)
    ckpt_every = cfg.checkpoint_every or eval_every
    out_dir = cfg.out_dir
    ckpt_dir = os.path.join(out_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)
    meta = {"regime": cfg.regime.value, "seed": cfg.seed}

    order_rng = np.random.default_rng([cfg.seed, 3])
    order, cursor, epoch = order_rng.permutation(n), 0, 0
    log_path = os.path.join(out_dir, "train_log.csv")
    with open(log_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, LOG_COLUMNS, lineterminator="\n")
        writer.writeheader()

        def emit(step, sums, count):
            w = lambda_schedule(step, total, cfg.regime)
            row = {"step": step, "epoch": epoch, "lambda_ae": w.ae, "lambda_bt": w.bt,
                   "lambda_adv": w.adv, "lambda_mrt": w.mrt}
            for key, val in sums.items():
                row[key] = val / count[key]
            row.update(probe.measure(gen, vocab))
            writer.writerow({k: _fmt(row.get(k)) for k in LOG_COLUMNS})
            fh.flush()
            if progress is not None:
                progress(row)

        emit(0, {}, {})
        save_checkpoint(os.path.join(ckpt_dir, "step_000000.npz"), gen, vocab, 0, disc, **meta)
        sums, count = {}, {}
        for step in range(1, total + 1):
            if cursor + cfg.batch_size > n and cursor > 0:
                order, cursor, epoch = order_rng.permutation(n), 0, epoch + 1
            idx = order[cursor:cursor + cfg.batch_size]
            cursor += len(idx)
            ids = [train_ids[i] for i in idx]
            sty = [train_styles[i] for i in idx]
            breakdown = train_step(state, ids, sty, step, total)
            if not math.isfinite(breakdown["total"]):
                dump = {"step": step, "breakdown": breakdown, "batch": [" ".join(vocab.decode(x)) for x in ids],
                        "params": _param_report(gen)}
                dump_path = os.path.join(out_dir, "diagnostic.json")
                with open(dump_path, "w", encoding="utf-8") as dfh:
                    json.dump(dump, dfh, indent=1, default=repr)
                raise TrainingDiverged(f"non-finite loss at step {step}; see {dump_path}")
            for key, val in breakdown.items():
                if key.startswith("loss_") or key == "total":
                    sums[key] = sums.get(key, 0.0) + val
                    count[key] = count.get(key, 0) + 1
            if step % eval_every == 0 or step == total:
                emit(step, sums, count)
                sums, count = {}, {}
            if step % ckpt_every == 0 or step == total:
                save_checkpoint(os.path.join(ckpt_dir, f"step_{step:06d}.npz"), gen, vocab, step, disc, **meta)
    save_checkpoint(os.path.join(ckpt_dir, "final.npz"), gen, vocab, total, disc, **meta)
    return out_dir
