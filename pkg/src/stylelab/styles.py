"""Style attribute schemas and style vectors.

A style is a tuple of value indices, one per attribute. The text form used
in files is ``attr=value;attr=value``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, InputError


@dataclass(frozen=True)
class AttributeSchema:
    names: tuple
    values: tuple  # one tuple of value names per attribute

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", tuple(tuple(v) for v in self.values))
        if not self.names:
            raise ContractError("schema needs at least one attribute")
        if len(set(self.names)) != len(self.names):
            raise ContractError("attribute names must be unique")
        if len(self.values) != len(self.names):
            raise ContractError("one value set per attribute is required")
        for name, vals in zip(self.names, self.values):
            if len(vals) < 2:
                raise ContractError(f"attribute {name!r} needs at least 2 values")
            if len(set(vals)) != len(vals):
                raise ContractError(f"attribute {name!r} has duplicate values")

    @classmethod
    def from_mapping(cls, mapping) -> "AttributeSchema":
        return cls(tuple(mapping), tuple(tuple(v) for v in mapping.values()))

    @property
    def m(self) -> int:
        return len(self.names)

    @property
    def sizes(self) -> tuple:
        return tuple(len(v) for v in self.values)

    @property
    def offsets(self) -> tuple:
        return tuple(int(x) for x in np.cumsum((0,) + self.sizes[:-1]))

    @property
    def total_values(self) -> int:
        return sum(self.sizes)

    def validate(self, style) -> tuple:
        style = tuple(int(v) for v in style)
        if len(style) != self.m:
            raise ContractError(f"style has {len(style)} values, schema has {self.m} attributes")
        for k, (v, size) in enumerate(zip(style, self.sizes)):
            if not 0 <= v < size:
                raise ContractError(f"value index {v} invalid for attribute {self.names[k]!r}")
        return style

    def parse(self, text: str) -> tuple:
        """Parse ``attr=value;...`` into a style tuple; every attribute must appear."""
        found = {}
        for part in text.strip().split(";"):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise InputError(f"malformed style field {part!r}")
            key, val = (p.strip() for p in part.split("=", 1))
            if key not in self.names:
                raise InputError(f"unknown attribute {key!r}")
            k = self.names.index(key)
            if val not in self.values[k]:
                raise InputError(f"unknown value {val!r} for attribute {key!r}")
            found[k] = self.values[k].index(val)
        missing = [self.names[k] for k in range(self.m) if k not in found]
        if missing:
            raise InputError(f"missing attribute(s): {', '.join(missing)}")
        return tuple(found[k] for k in range(self.m))

    def format(self, style) -> str:
        style = self.validate(style)
        return ";".join(f"{n}={vals[v]}" for n, vals, v in zip(self.names, self.values, style))

    def all_styles(self) -> list:
        grids = np.meshgrid(*[np.arange(s) for s in self.sizes], indexing="ij")
        return [tuple(int(x) for x in row) for row in np.stack([g.ravel() for g in grids], 1)]

    def permutation_to(self, other: "AttributeSchema"):
        """Per attribute, the index in ``self`` of each value of ``other``.

        Both schemas must hold the same attributes with the same value sets,
        possibly in a different order.
        """
        if self.names != other.names or any(set(a) != set(b) for a, b in zip(self.values, other.values)):
            raise ContractError("schemas differ in attributes or values")
        return [[mine.index(v) for v in theirs] for mine, theirs in zip(self.values, other.values)]

    def to_dict(self):
        return {"names": list(self.names), "values": [list(v) for v in self.values]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["names"]), tuple(tuple(v) for v in d["values"]))
