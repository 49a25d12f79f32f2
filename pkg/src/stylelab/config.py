"""Experiment configuration read from a sectioned key=value (INI) file.

Sections: ``[train]`` (seed, regime, optimizer, budget), ``[data]``,
``[schema]``, ``[model]``, ``[noise]``, ``[mrt]``, ``[adv]`` and an optional
inline ``[synthetic]`` corpus spec. Relative paths resolve against the
directory holding the config file. Every key except ``train.seed`` has a
default; the defaults are the full-scale training values.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .styles import AttributeSchema
from .supervision import MrtSpec, Regime
from .text import NoiseSpec

KNOWN = {
    "train": {"seed", "regime", "out_dir", "lr", "beta1", "beta2", "weight_decay", "clip", "batch_size",
              "epochs", "steps", "eval_every", "checkpoint_every", "dev_size", "log_every"},
    "data": {"train", "dev", "test", "synthetic", "max_tokens", "classifier", "vocab_min_count"},
    "model": {"emb_dim", "hidden_dim", "pool_kernel", "pool_window", "dropout"},
    "noise": {"p_drop", "k"},
    "mrt": {"n_samples", "alpha", "temperature", "max_examples"},
    "adv": {"disc_emb_dim", "disc_hidden_dim", "disc_lr"},
}


@dataclass
class ExperimentConfig:
    seed: int
    regime: Regime = Regime.DAE_BT
    out_dir: str = "run"
    # data
    train_path: str | None = None
    dev_path: str | None = None
    test_path: str | None = None
    synthetic: str | None = None        # "builtin", a spec path, or "inline"
    schema: AttributeSchema | None = None
    max_tokens: int = 50
    classifier_path: str | None = None
    vocab_min_count: int = 1
    # model
    emb_dim: int = 512
    hidden_dim: int = 512
    pool_window: int = 5
    dropout: float = 0.1
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    # optimisation
    lr: float = 1e-4
    betas: tuple = (0.5, 0.999)
    weight_decay: float = 0.0
    clip: float = 5.0
    batch_size: int = 400
    epochs: int = 30
    steps: int | None = None
    eval_every: int | None = None
    checkpoint_every: int | None = None
    dev_size: int = 200
    mrt: MrtSpec = field(default_factory=MrtSpec)
    disc_emb_dim: int | None = None
    disc_hidden_dim: int | None = None
    disc_lr: float | None = None
    source: str = ""
    parser: configparser.ConfigParser | None = field(default=None, repr=False)

    def total_steps(self, n_train: int) -> int:
        if self.steps is not None:
            return self.steps
        return self.epochs * max(1, -(-n_train // self.batch_size))


def _resolve(base, path):
    if path is None or path == "" or os.path.isabs(path):
        return path or None
    return os.path.normpath(os.path.join(base, path))


def _get(sec, key, conv, default):
    if sec is None or key not in sec or sec[key].strip() == "":
        return default
    raw = sec[key].strip()
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] {key} = {raw!r}: {exc}") from exc


def parse_config(text: str, base_dir=".", source="<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {source}: {exc}") from exc
    for name, keys in KNOWN.items():
        if parser.has_section(name):
            unknown = set(parser[name]) - keys
            if unknown:
                raise ConfigError(f"[{name}] has unknown keys {sorted(unknown)}")
    if not parser.has_section("train") or not parser["train"].get("seed", "").strip():
        raise ConfigError("[train] seed is mandatory")
    sec = {n: (parser[n] if parser.has_section(n) else None) for n in ("train", "data", "model", "noise", "mrt", "adv")}
    t, d, m = sec["train"], sec["data"], sec["model"]

    schema = None
    if parser.has_section("schema") and len(parser["schema"]):
        schema = AttributeSchema.from_mapping(
            {k: [v.strip() for v in parser["schema"][k].split(",") if v.strip()] for k in parser["schema"]})

    synthetic = _get(d, "synthetic", str, None)
    if parser.has_section("synthetic"):
        synthetic = "inline"
    elif synthetic not in (None, "builtin"):
        synthetic = _resolve(base_dir, synthetic)
    train_path = _resolve(base_dir, _get(d, "train", str, None))
    if synthetic is None and train_path is None:
        raise ConfigError("[data] needs either train (and dev) paths or a synthetic corpus")
    if synthetic is not None and train_path is not None:
        raise ConfigError("[data] train paths and a synthetic corpus are mutually exclusive")
    dev_path = _resolve(base_dir, _get(d, "dev", str, None))
    if train_path is not None and dev_path is None:
        raise ConfigError("[data] dev path is required alongside train")

    kernel = _get(m, "pool_kernel", int, 5)
    window = _get(m, "pool_window", int, 5)
    if kernel != window:
        raise ConfigError("pooling windows do not overlap: pool_kernel must equal pool_window")

    try:
        noise = NoiseSpec(_get(sec["noise"], "p_drop", float, 0.1), _get(sec["noise"], "k", int, 3),
                          seed=int(t["seed"]))
        mrt = MrtSpec(n_samples=_get(sec["mrt"], "n_samples", int, 10),
                      alpha=_get(sec["mrt"], "alpha", float, 0.005),
                      temperature=_get(sec["mrt"], "temperature", float, 1.0),
                      seed=int(t["seed"]),
                      max_examples=_get(sec["mrt"], "max_examples", int, None))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    cfg = ExperimentConfig(
        seed=_get(t, "seed", int, None),
        regime=Regime.parse(_get(t, "regime", str, "dae+bt")),
        out_dir=_resolve(base_dir, _get(t, "out_dir", str, "run")),
        train_path=train_path,
        dev_path=dev_path,
        test_path=_resolve(base_dir, _get(d, "test", str, None)),
        synthetic=synthetic,
        schema=schema,
        max_tokens=_get(d, "max_tokens", int, 50),
        classifier_path=_resolve(base_dir, _get(d, "classifier", str, None)),
        vocab_min_count=_get(d, "vocab_min_count", int, 1),
        emb_dim=_get(m, "emb_dim", int, 512),
        hidden_dim=_get(m, "hidden_dim", int, 512),
        pool_window=window,
        dropout=_get(m, "dropout", float, 0.1),
        noise=noise,
        lr=_get(t, "lr", float, 1e-4),
        betas=(_get(t, "beta1", float, 0.5), _get(t, "beta2", float, 0.999)),
        weight_decay=_get(t, "weight_decay", float, 0.0),
        clip=_get(t, "clip", float, 5.0),
        batch_size=_get(t, "batch_size", int, 400),
        epochs=_get(t, "epochs", int, 30),
        steps=_get(t, "steps", int, None),
        eval_every=_get(t, "eval_every", int, None),
        checkpoint_every=_get(t, "checkpoint_every", int, None),
        dev_size=_get(t, "dev_size", int, 200),
        mrt=mrt,
        disc_emb_dim=_get(sec["adv"], "disc_emb_dim", int, None),
        disc_hidden_dim=_get(sec["adv"], "disc_hidden_dim", int, None),
        disc_lr=_get(sec["adv"], "disc_lr", float, None),
        source=source,
        parser=parser,
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    for name in ("emb_dim", "hidden_dim", "pool_window", "batch_size", "epochs", "dev_size"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be >= 1")
    if cfg.steps is not None and cfg.steps < 1:
        raise ConfigError("steps must be >= 1")
    if not 0.0 <= cfg.dropout < 1.0:
        raise ConfigError("dropout must lie in [0, 1)")
    if cfg.lr <= 0 or cfg.clip <= 0:
        raise ConfigError("lr and clip must be positive")
    if cfg.regime.uses_mrt and cfg.classifier_path is None:
        raise ConfigError("the dae+bt+mrt regime needs [data] classifier = PATH")
    if cfg.classifier_path is not None and not os.path.exists(cfg.classifier_path):
        raise ConfigError(f"classifier file {cfg.classifier_path} does not exist")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)), source=str(path))
