"""Discrete risk-feature space and its fixed-width binary encoding.

Every feature value is written base-2, most significant bit first, into a
contiguous bit range. Codes past the feature's cardinality clamp to the last
value, so any bitstring of the right length decodes to a valid configuration
and bit-flip operators never leave the space.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

FEATURE_KINDS = ("categorical", "ordinal", "flag")
BUILTIN_SCHEMAS = ("single_page_24", "multi_page_27", "mini_8")


class SchemaError(ValueError):
    """Base class for schema construction and coding errors."""


class DuplicateFeature(SchemaError):
    pass


class WidthTooSmall(SchemaError):
    pass


class EmptySchema(SchemaError):
    pass


class UnknownFeature(SchemaError):
    pass


class ValueOutOfRange(SchemaError):
    pass


class LengthMismatch(SchemaError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    cardinality: int
    bits: int = 0
    fixed_value: int | None = None

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.cardinality < 1:
            raise SchemaError(f"feature {self.name!r}: cardinality must be positive")
        if self.fixed_value is not None:
            if self.bits != 0:
                raise SchemaError(f"fixed feature {self.name!r} must have 0 bits")
            if not 0 <= self.fixed_value < self.cardinality:
                raise ValueOutOfRange(
                    f"fixed feature {self.name!r}: value {self.fixed_value} "
                    f"outside 0..{self.cardinality - 1}"
                )
            return
        if self.cardinality < 2:
            raise SchemaError(f"feature {self.name!r}: cardinality must be >= 2")
        if self.bits < 1 or 2**self.bits < self.cardinality:
            raise WidthTooSmall(
                f"feature {self.name!r}: {self.bits} bits cannot hold "
                f"{self.cardinality} values"
            )

    @property
    def is_fixed(self) -> bool:
        return self.fixed_value is not None


@dataclass(frozen=True)
class FeatureSchema:
    name: str
    features: tuple[FeatureSpec, ...]
    total_bits: int = field(init=False)
    _offsets: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.features or all(f.is_fixed for f in self.features):
            raise EmptySchema(f"schema {self.name!r} has no encodable features")
        seen = set()
        offsets = []
        pos = 0
        for f in self.features:
            if f.name in seen:
                raise DuplicateFeature(f"duplicate feature {f.name!r}")
            seen.add(f.name)
            offsets.append(pos)
            pos += f.bits
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "total_bits", pos)
        object.__setattr__(self, "_offsets", tuple(offsets))

    def __contains__(self, name: str) -> bool:
        return any(f.name == name for f in self.features)

    def feature(self, name: str) -> FeatureSpec:
        for f in self.features:
            if f.name == name:
                return f
        raise UnknownFeature(name)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def bit_ranges(self) -> dict[str, range]:
        """Bit index range of every non-fixed feature, in declaration order."""
        return {
            f.name: range(off, off + f.bits)
            for f, off in zip(self.features, self._offsets)
            if not f.is_fixed
        }

    def to_dict(self) -> dict:
        out = []
        for f in self.features:
            entry = {"name": f.name, "kind": f.kind, "cardinality": f.cardinality}
            if f.is_fixed:
                entry["fixed"] = f.fixed_value
            else:
                entry["bits"] = f.bits
            out.append(entry)
        return {"name": self.name, "feature": out}


def build_schema(spec_document: Mapping) -> FeatureSchema:
    """Validate a schema document (the parsed form of a TOML/JSON schema file)."""
    name = spec_document.get("name", "custom")
    entries = spec_document.get("feature") or spec_document.get("features") or []
    feats = []
    for entry in entries:
        fixed = entry.get("fixed")
        feats.append(
            FeatureSpec(
                name=entry["name"],
                kind=entry.get("kind", "ordinal"),
                cardinality=int(entry["cardinality"]),
                bits=0 if fixed is not None else int(entry.get("bits", 0)),
                fixed_value=None if fixed is None else int(fixed),
            )
        )
    return FeatureSchema(name=name, features=tuple(feats))


def load_schema(name_or_path: str | Path) -> FeatureSchema:
    """Resolve a built-in schema name or a path to a .json/.toml schema file."""
    if str(name_or_path) in BUILTIN_SCHEMAS:
        text = (
            resources.files("riskscout.data.schemas")
            .joinpath(f"{name_or_path}.json")
            .read_text()
        )
        return build_schema(json.loads(text))
    path = Path(name_or_path)
    if not path.exists():
        raise SchemaError(f"unknown schema {name_or_path!r}")
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        doc = tomllib.loads(path.read_text())
    else:
        doc = json.loads(path.read_text())
    return build_schema(doc)


def encode(assignment: Mapping[str, int], schema: FeatureSchema) -> np.ndarray:
    for key in assignment:
        if key not in schema:
            raise UnknownFeature(key)
    z = np.zeros(schema.total_bits, dtype=np.uint8)
    for f, rng_ in zip(schema.features, _ranges(schema)):
        if f.name not in assignment:
            if f.is_fixed:
                continue
            raise UnknownFeature(f"assignment is missing {f.name!r}")
        value = int(assignment[f.name])
        if not 0 <= value < f.cardinality:
            raise ValueOutOfRange(f"{f.name}={value} outside 0..{f.cardinality - 1}")
        if f.is_fixed:
            if value != f.fixed_value:
                raise ValueOutOfRange(f"{f.name} is fixed at {f.fixed_value}")
            continue
        for k, idx in enumerate(rng_):
            z[idx] = (value >> (f.bits - 1 - k)) & 1
    return z


def decode(z, schema: FeatureSchema) -> dict[str, int]:
    bits = np.asarray(z)
    if bits.ndim != 1 or bits.shape[0] != schema.total_bits:
        raise LengthMismatch(
            f"expected {schema.total_bits} bits, got shape {bits.shape}"
        )
    out = {}
    for f, rng_ in zip(schema.features, _ranges(schema)):
        if f.is_fixed:
            out[f.name] = f.fixed_value
            continue
        v = 0
        for idx in rng_:
            v = (v << 1) | int(bits[idx])
        out[f.name] = min(v, f.cardinality - 1)
    return out


def decode_batch(Z: np.ndarray, schema: FeatureSchema) -> dict[str, np.ndarray]:
    """Vectorised decode of a (n, N) bit matrix into per-feature index arrays."""
    Z = np.asarray(Z, dtype=np.int64)
    if Z.ndim != 2 or Z.shape[1] != schema.total_bits:
        raise LengthMismatch(f"expected (n, {schema.total_bits}), got {Z.shape}")
    out = {}
    for f, rng_ in zip(schema.features, _ranges(schema)):
        if f.is_fixed:
            out[f.name] = np.full(Z.shape[0], f.fixed_value, dtype=np.int64)
            continue
        weights = 1 << np.arange(f.bits - 1, -1, -1)
        v = Z[:, rng_.start : rng_.stop] @ weights
        out[f.name] = np.minimum(v, f.cardinality - 1)
    return out


def space_size(schema: FeatureSchema) -> tuple[int, int]:
    """Return (bit-space size 2^N, semantic size = product of free cardinalities)."""
    semantic = math.prod(f.cardinality for f in schema.features if not f.is_fixed)
    return 2**schema.total_bits, semantic


def random_config(schema: FeatureSchema, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=schema.total_bits, dtype=np.uint8)


def random_configs(n: int, n_bits: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=(n, n_bits), dtype=np.uint8)


def bits_to_str(z: Iterable[int]) -> str:
    return "".join("1" if b else "0" for b in z)


def str_to_bits(s: str) -> np.ndarray:
    return np.frombuffer(s.encode("ascii"), dtype=np.uint8) - ord("0")


def _ranges(schema: FeatureSchema) -> list[range]:
    return [range(off, off + f.bits) for f, off in zip(schema.features, schema._offsets)]
