"""Corpora: TSV ingestion, synthetic style corpora, and per-attribute summaries.

TSV lines are ``text<TAB>attr=value;attr=value``. Synthetic corpora are
templated sentences in which style lives only in marker words while the
remaining slots draw from a shared, style-neutral vocabulary.
"""

from __future__ import annotations

import configparser
import importlib.resources
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError
from .styles import AttributeSchema
from .text import tokenize

MAX_MALFORMED_FRACTION = 0.10


@dataclass(frozen=True)
class Example:
    text: str
    style: tuple

    @property
    def tokens(self):
        return tokenize(self.text)


@dataclass
class Dataset:
    schema: AttributeSchema
    train: list
    dev: list
    test: list
    origin: str = ""


@dataclass
class LineError:
    line: int
    message: str


def load_tsv(path, schema: AttributeSchema):
    """Read a TSV split; returns ``(examples, errors)``.

    Malformed lines are skipped and reported with 1-based line numbers. More
    than 10% malformed lines is a hard failure.
    """
    examples, errors = [], []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except UnicodeDecodeError as exc:
        raise InputError(f"{path} is not valid UTF-8: {exc}") from exc
    n_lines = 0
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        n_lines += 1
        parts = raw.split("\t")
        if len(parts) != 2:
            errors.append(LineError(lineno, "expected exactly one TAB separating text and styles"))
            continue
        text = " ".join(tokenize(parts[0]))
        if not text:
            errors.append(LineError(lineno, "empty text"))
            continue
        try:
            style = schema.parse(parts[1])
        except InputError as exc:
            errors.append(LineError(lineno, str(exc)))
            continue
        examples.append(Example(text, style))
    if n_lines and len(errors) > MAX_MALFORMED_FRACTION * n_lines:
        raise InputError(f"{path}: {len(errors)} of {n_lines} lines malformed "
                         f"(first at line {errors[0].line}: {errors[0].message})")
    return examples, errors


def write_tsv(path, examples, schema: AttributeSchema):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(f"{ex.text}\t{schema.format(ex.style)}\n")


def infer_schema(path) -> AttributeSchema:
    """Collect attribute names and values (in first-seen order) from a TSV file."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            parts = raw.rstrip("\n").split("\t")
            if len(parts) != 2:
                continue
            for field_ in parts[1].split(";"):
                if "=" in field_:
                    k, v = (x.strip() for x in field_.split("=", 1))
                    values.setdefault(k, [])
                    if v not in values[k]:
                        values[k].append(v)
    if not values:
        raise InputError(f"no style annotations found in {path}")
    return AttributeSchema.from_mapping(values)


# -- synthetic corpora --------------------------------------------------------

@dataclass
class SyntheticSpec:
    schema: AttributeSchema
    markers: dict            # attribute -> {value: [words]}
    lexicons: dict           # slot name -> [words]
    templates: list          # strings with {slot} / {attribute} placeholders
    n_examples: int = 5000
    min_len: int = 3
    max_len: int = 20
    seed: int = 0

    def __post_init__(self):
        seen = {}
        for attr in self.schema.names:
            if attr not in self.markers:
                raise ConfigError(f"no marker lexicon for attribute {attr!r}")
            for value in self.schema.values[self.schema.names.index(attr)]:
                words = self.markers[attr].get(value, [])
                if not words:
                    raise ConfigError(f"empty marker lexicon for {attr}={value}")
                for w in words:
                    if w in seen:
                        raise ConfigError(f"marker {w!r} used by both {seen[w]} and {attr}={value}")
                    seen[w] = f"{attr}={value}"
        for slot, words in self.lexicons.items():
            if not words:
                raise ConfigError(f"empty lexicon for slot {slot!r}")
            clash = set(words) & set(seen)
            if clash:
                raise ConfigError(f"content slot {slot!r} reuses marker words {sorted(clash)}")
        if not self.templates:
            raise ConfigError("at least one template is required")
        for tpl in self.templates:
            slots = _slots(tpl)
            for s in slots:
                if s not in self.lexicons and s not in self.schema.names:
                    raise ConfigError(f"template slot {{{s}}} has no lexicon")
            if not any(s in self.schema.names for s in slots):
                raise ConfigError(f"template {tpl!r} carries no style marker")
            n = len(tpl.split())
            if not self.min_len <= n <= self.max_len:
                raise ConfigError(f"template {tpl!r} has {n} tokens, outside [{self.min_len}, {self.max_len}]")

    def marker_index(self):
        """word -> (attribute index, value index)."""
        out = {}
        for k, attr in enumerate(self.schema.names):
            for j, value in enumerate(self.schema.values[k]):
                for w in self.markers[attr][value]:
                    out[w] = (k, j)
        return out


def _slots(template):
    return [tok[1:-1] for tok in template.split() if tok.startswith("{") and tok.endswith("}")]


def _words(value):
    return value.split()


def synthetic_spec_from_config(parser: configparser.ConfigParser, section="synthetic") -> SyntheticSpec:
    """Build a spec from a key=value section.

    Keys: ``attributes`` (names), ``values.<attr>``, ``markers.<attr>.<value>``,
    ``lexicon.<slot>``, ``templates`` (one per line), and optional
    ``n_examples``, ``min_len``, ``max_len``, ``seed``.
    """
    if not parser.has_section(section):
        raise ConfigError(f"missing [{section}] section")
    sec = parser[section]
    try:
        names = _words(sec["attributes"])
        values = {a: [v.strip() for v in sec[f"values.{a}"].split(",")] for a in names}
        markers = {a: {v: _words(sec[f"markers.{a}.{v}"]) for v in values[a]} for a in names}
    except KeyError as exc:
        raise ConfigError(f"[{section}] is missing key {exc}") from exc
    lexicons = {k[len("lexicon."):]: _words(v) for k, v in sec.items() if k.startswith("lexicon.")}
    templates = [t.strip() for t in sec.get("templates", "").splitlines() if t.strip()]
    return SyntheticSpec(
        schema=AttributeSchema.from_mapping(values),
        markers=markers,
        lexicons=lexicons,
        templates=templates,
        n_examples=sec.getint("n_examples", 5000),
        min_len=sec.getint("min_len", 3),
        max_len=sec.getint("max_len", 20),
        seed=sec.getint("seed", 0),
    )


def load_synthetic_spec(path=None) -> SyntheticSpec:
    """Read a spec file; ``None`` selects the bundled binary-sentiment corpus."""
    parser = configparser.ConfigParser(interpolation=None)
    if path is None:
        text = importlib.resources.files("stylelab.resources").joinpath("synthetic_sentiment.ini").read_text("utf-8")
        parser.read_string(text)
    else:
        if not parser.read(path, encoding="utf-8"):
            raise ConfigError(f"cannot read synthetic spec {path}")
    return synthetic_spec_from_config(parser)


def split_of(index: int) -> str:
    """80/10/10 train/dev/test assignment from a hash of the example index."""
    h = zlib.crc32(str(index).encode()) % 10
    return "train" if h < 8 else ("dev" if h == 8 else "test")


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Deterministic templated corpus, balanced over style combinations within +-1."""
    rng = np.random.default_rng(spec.seed)
    combos = spec.schema.all_styles()
    styles = [combos[i % len(combos)] for i in range(spec.n_examples)]
    styles = [styles[i] for i in rng.permutation(len(styles))]
    seen = set()
    out = {"train": [], "dev": [], "test": []}
    for index, style in enumerate(styles):
        for _attempt in range(100):
            text = _fill(spec, rng, style)
            if text not in seen:
                break
        seen.add(text)
        out[split_of(index)].append(Example(text, style))
    return Dataset(spec.schema, out["train"], out["dev"], out["test"],
                   origin=f"synthetic(seed={spec.seed}, n={spec.n_examples})")


def _fill(spec: SyntheticSpec, rng, style):
    tpl = spec.templates[int(rng.integers(len(spec.templates)))]
    words = []
    for tok in tpl.split():
        if tok.startswith("{") and tok.endswith("}"):
            slot = tok[1:-1]
            if slot in spec.schema.names:
                k = spec.schema.names.index(slot)
                pool = spec.markers[slot][spec.schema.values[k][style[k]]]
            else:
                pool = spec.lexicons[slot]
            words.append(pool[int(rng.integers(len(pool)))])
        else:
            words.append(tok)
    return " ".join(words)


def lexicon_classify(tokens, spec: SyntheticSpec):
    """Rule-based style guess from marker words; majority vote per attribute, None if absent."""
    index = spec.marker_index()
    votes = [np.zeros(s) for s in spec.schema.sizes]
    for t in tokens:
        if t in index:
            k, j = index[t]
            votes[k][j] += 1
    return tuple(int(np.argmax(v)) if v.sum() else None for v in votes)


# -- summaries -----------------------------------------------------------------

@dataclass
class Summary:
    schema: AttributeSchema
    counts: dict = field(default_factory=dict)   # attr -> {value: count}
    n: int = 0
    max_len: int = 0
    mean_len: float = 0.0

    def table(self) -> str:
        lines = []
        for attr in self.schema.names:
            row = "  ".join(f"{v} {c:,}" for v, c in self.counts[attr].items())
            lines.append(f"{attr}: {row}")
        lines.append(f"examples: {self.n:,}  max tokens: {self.max_len}  mean tokens: {self.mean_len:.1f}")
        return "\n".join(lines) + "\n"


def filter_length(examples, max_tokens=50):
    """Keep examples with at most ``max_tokens`` tokens."""
    return [ex for ex in examples if len(ex.tokens) <= max_tokens]


def summarize(examples, schema: AttributeSchema, max_tokens=None) -> Summary:
    examples = list(examples)
    if max_tokens is not None:
        examples = filter_length(examples, max_tokens)
    counts = {a: {v: 0 for v in vals} for a, vals in zip(schema.names, schema.values)}
    lengths = []
    for ex in examples:
        for k, (attr, vals) in enumerate(zip(schema.names, schema.values)):
            counts[attr][vals[ex.style[k]]] += 1
        lengths.append(len(ex.tokens))
    return Summary(schema, counts, len(examples), max(lengths, default=0),
                   float(np.mean(lengths)) if lengths else 0.0)
