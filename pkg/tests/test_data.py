import configparser
import dataclasses

import pytest

from stylelab.data import Example, SyntheticSpec, filter_length, generate_synthetic, infer_schema, lexicon_classify, \
    load_synthetic_spec, load_tsv, split_of, summarize, synthetic_spec_from_config, write_tsv
from stylelab.errors import ConfigError, InputError
from stylelab.styles import AttributeSchema

SENT = AttributeSchema(("sentiment",), (("positive", "negative"),))


def _all(ds):
    return ds.train + ds.dev + ds.test


def test_load_tsv_example_and_errors(tmp_path):
    path = tmp_path / "x.tsv"
    lines = ["Great food !\tsentiment=positive"] + [f"line {i}\tsentiment=negative" for i in range(10)]
    lines.append("no tab here")
    path.write_text("\n".join(lines) + "\n\n", encoding="utf-8")
    examples, errors = load_tsv(path, SENT)
    assert examples[0] == Example("great food !", (0,))
    assert len(examples) == 11
    assert [e.line for e in errors] == [12]


def test_load_tsv_missing_attribute_is_reported(tmp_path):
    schema = AttributeSchema(("sentiment", "tense"), (("positive", "negative"), ("past", "now")))
    path = tmp_path / "x.tsv"
    rows = [f"text {i}\tsentiment=positive;tense=past" for i in range(20)] + ["oops\tsentiment=positive"]
    path.write_text("\n".join(rows), encoding="utf-8")
    examples, errors = load_tsv(path, schema)
    assert len(examples) == 20 and errors[0].line == 21


def test_load_tsv_too_many_malformed(tmp_path):
    path = tmp_path / "x.tsv"
    path.write_text("a\tsentiment=positive\n" * 8 + "bad\tsentiment=meh\n" * 2, encoding="utf-8")
    with pytest.raises(InputError):
        load_tsv(path, SENT)
    path.write_bytes(b"\xff\xfe\tsentiment=positive\n")
    with pytest.raises(InputError):
        load_tsv(path, SENT)


def test_tsv_roundtrip(tmp_path):
    ds = generate_synthetic(load_synthetic_spec())
    path = tmp_path / "rt.tsv"
    write_tsv(path, ds.test, ds.schema)
    back, errors = load_tsv(path, ds.schema)
    assert back == ds.test and not errors
    again = tmp_path / "rt2.tsv"
    write_tsv(again, back, ds.schema)
    assert again.read_bytes() == path.read_bytes()
    inferred = infer_schema(path)
    assert inferred.names == ds.schema.names and set(inferred.values[0]) == set(ds.schema.values[0])


def test_bundled_corpus_shape():
    ds = generate_synthetic(load_synthetic_spec())
    vocab = {t for ex in ds.train for t in ex.tokens}
    assert len(vocab) + 4 <= 100
    assert 3500 <= len(ds.train) <= 4500
    texts = [ex.text for ex in _all(ds)]
    assert len(set(texts)) == len(texts)


def test_balance_and_determinism():
    spec = dataclasses.replace(load_synthetic_spec(), n_examples=1000, seed=5)
    ds = generate_synthetic(spec)
    pos = sum(ex.style == (0,) for ex in _all(ds))
    assert pos == 500 and len(_all(ds)) == 1000
    assert generate_synthetic(spec) == ds


def test_multi_attribute_balance_within_one():
    spec = SyntheticSpec(
        AttributeSchema(("s", "t"), (("p", "n"), ("a", "b", "c"))),
        {"s": {"p": ["good"], "n": ["bad"]}, "t": {"a": ["was"], "b": ["is"], "c": ["will"]}},
        {"noun": ["food", "staff", "place"]}, ["the {noun} {t} {s}"], n_examples=1001, min_len=3, max_len=6)
    ds = generate_synthetic(spec)
    counts = {}
    for ex in _all(ds):
        counts[ex.style] = counts.get(ex.style, 0) + 1
    assert len(counts) == 6 and max(counts.values()) - min(counts.values()) <= 1


def test_markers_predict_labels_exactly():
    for seed in (0, 1, 2):
        spec = dataclasses.replace(load_synthetic_spec(), seed=seed, n_examples=600)
        ds = generate_synthetic(spec)
        assert all(lexicon_classify(ex.tokens, spec) == ex.style for ex in _all(ds))
    ds = generate_synthetic(load_synthetic_spec())
    assert all(lexicon_classify(ex.tokens, load_synthetic_spec()) == ex.style for ex in ds.test)


def test_split_is_80_10_10():
    splits = [split_of(i) for i in range(10000)]
    for name, frac in (("train", 0.8), ("dev", 0.1), ("test", 0.1)):
        assert abs(splits.count(name) / 10000 - frac) < 0.02


def _spec(**kw):
    base = dict(schema=SENT, markers={"sentiment": {"positive": ["good"], "negative": ["bad"]}},
                lexicons={"noun": ["food"]}, templates=["the {noun} was {sentiment}"], min_len=2, max_len=8)
    base.update(kw)
    return SyntheticSpec(**base)


@pytest.mark.parametrize("kw", [
    dict(lexicons={"noun": []}),
    dict(markers={"sentiment": {"positive": ["good"], "negative": ["good"]}}),
    dict(markers={"sentiment": {"positive": ["good"], "negative": []}}),
    dict(lexicons={"noun": ["good"]}),
    dict(templates=["the {noun} was fine"]),
    dict(templates=["the {thing} was {sentiment}"]),
    dict(templates=["{sentiment}"]),
])
def test_spec_validation(kw):
    with pytest.raises(ConfigError):
        _spec(**kw)


def test_spec_from_config():
    parser = configparser.ConfigParser()
    parser.read_string("""
[synthetic]
attributes = sentiment
values.sentiment = positive, negative
markers.sentiment.positive = good nice
markers.sentiment.negative = bad
lexicon.noun = food staff
templates =
    the {noun} was {sentiment}
    {sentiment} {noun}
n_examples = 40
min_len = 2
seed = 3
""")
    spec = synthetic_spec_from_config(parser)
    assert spec.n_examples == 40 and len(spec.templates) == 2 and spec.markers["sentiment"]["positive"] == ["good", "nice"]
    assert len(_all(generate_synthetic(spec))) == 40


def test_summarize_counts_and_filter():
    long = Example(" ".join(["w"] * 51), (0,))
    exs = [Example("a b", (0,)), Example("c", (1,)), long]
    s = summarize(exs, SENT)
    assert s.counts == {"sentiment": {"positive": 2, "negative": 1}}
    assert s.n == 3 and s.max_len == 51
    f = summarize(exs, SENT, max_tokens=50)
    assert f.n == 2 and sum(f.counts["sentiment"].values()) == 2
    assert filter_length(exs) == exs[:2]
    empty = summarize([], SENT)
    assert empty.n == 0 and empty.counts["sentiment"] == {"positive": 0, "negative": 0}
    assert "positive 2" in s.table()
