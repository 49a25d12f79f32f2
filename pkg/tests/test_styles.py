import numpy as np
import pytest

from stylelab.errors import ContractError, InputError
from stylelab.styles import AttributeSchema
from stylelab.supervision import perturb_style


@pytest.fixture
def schema():
    return AttributeSchema.from_mapping({"sentiment": ["positive", "negative"],
                                         "category": ["food", "movie", "book"]})


def test_schema_shape(schema):
    assert schema.m == 2
    assert schema.sizes == (2, 3)
    assert schema.offsets == (0, 2)
    assert schema.total_values == 5
    assert len(schema.all_styles()) == 6


def test_parse_and_format_roundtrip(schema):
    s = schema.parse("category=book;sentiment=negative")
    assert s == (1, 2)
    assert schema.parse(schema.format(s)) == s
    assert schema.format(s) == "sentiment=negative;category=book"


@pytest.mark.parametrize("text", ["sentiment=positive", "sentiment=meh;category=food", "colour=red;sentiment=positive",
                                  "sentiment"])
def test_parse_errors(schema, text):
    with pytest.raises(InputError):
        schema.parse(text)


def test_schema_invariants():
    with pytest.raises(ContractError):
        AttributeSchema(("a",), (("x",),))
    with pytest.raises(ContractError):
        AttributeSchema(("a", "a"), (("x", "y"), ("x", "y")))
    with pytest.raises(ContractError):
        AttributeSchema((), ())


def test_validate(schema):
    with pytest.raises(ContractError):
        schema.validate((0, 3))
    with pytest.raises(ContractError):
        schema.validate((0,))


def test_dict_roundtrip(schema):
    assert AttributeSchema.from_dict(schema.to_dict()) == schema


def test_perturb_binary_always_flips():
    schema = AttributeSchema(("s",), (("pos", "neg"),))
    rng = np.random.default_rng(0)
    assert all(perturb_style((0,), schema, rng) == (1,) for _ in range(50))


def test_perturb_is_uniform_over_other_styles(schema):
    rng = np.random.default_rng(1)
    counts = {}
    n = 10000
    for _ in range(n):
        s = perturb_style((0, 0), schema, rng)
        assert s != (0, 0)
        counts[s] = counts.get(s, 0) + 1
    assert len(counts) == 5
    freq = np.array(list(counts.values())) / n
    assert np.abs(freq - 0.2).max() < 0.02
