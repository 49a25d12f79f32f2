"""Versioned experiment checkpoints in a single ``.npz`` archive.

Layout: a ``__meta__`` entry holding UTF-8 JSON (format version, step,
regime, seed, schema, vocabulary, model configs) plus one float64 array per
parameter under ``gen/<name>`` and, for adversarial runs, ``disc/<name>``.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .discriminator import Discriminator, DiscriminatorConfig
from .errors import InputError
from .generator import Generator, GeneratorConfig
from .styles import AttributeSchema
from .text import Vocab

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    generator: Generator
    vocab: Vocab
    step: int = 0
    discriminator: Discriminator | None = None
    meta: dict = field(default_factory=dict)

    @property
    def schema(self) -> AttributeSchema:
        return self.generator.schema


def save_checkpoint(path, generator: Generator, vocab: Vocab, step=0, discriminator=None, **meta):
    """Write a checkpoint; extra keyword arguments land in the JSON metadata."""
    header = {
        "format": FORMAT_VERSION,
        "step": int(step),
        "schema": generator.schema.to_dict(),
        "vocab": vocab.to_dict(),
        "generator": asdict(generator.config),
        "discriminator": asdict(discriminator.config) if discriminator is not None else None,
        **meta,
    }
    arrays = {f"gen/{k}": v for k, v in generator.state_dict().items()}
    if discriminator is not None:
        arrays.update({f"disc/{k}": v for k, v in discriminator.state_dict().items()})
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = str(path) + ".tmp.npz"
    np.savez(tmp, __meta__=np.frombuffer(json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8),
             **arrays)
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    try:
        z = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read checkpoint {path}: {exc}") from exc
    with z:
        if "__meta__" not in z.files:
            raise InputError(f"{path} is not a checkpoint (no metadata)")
        meta = json.loads(z["__meta__"].tobytes().decode("utf-8"))
        if meta.get("format") != FORMAT_VERSION:
            raise InputError(f"{path}: unsupported checkpoint format {meta.get('format')!r}")
        schema = AttributeSchema.from_dict(meta["schema"])
        gen = Generator(GeneratorConfig(**meta["generator"]), schema)
        gen.load_state_dict({k: z[f"gen/{k}"] for k in gen.params})
        disc = None
        if meta.get("discriminator"):
            disc = Discriminator(DiscriminatorConfig(**meta["discriminator"]), schema)
            disc.load_state_dict({k: z[f"disc/{k}"] for k in disc.params})
    return Checkpoint(gen, Vocab.from_dict(meta["vocab"]), meta["step"], disc, meta)


def checkpoint_series(directory):
    """Sorted ``(step, path)`` pairs for ``step_*.npz`` files in a directory."""
    out = []
    for name in os.listdir(directory):
        if name.startswith("step_") and name.endswith(".npz"):
            try:
                out.append((int(name[5:-4]), os.path.join(directory, name)))
            except ValueError:
                continue
    return sorted(out)
