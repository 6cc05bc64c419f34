"""Tabular data model: feature schemas, records and labeled datasets.

Every value object in this module is immutable after construction and safe
to share across threads. Datasets cache a numeric encoding of their records
(categories as value-set indices, continuous values as-is) because all the
hot paths (tree induction, rule coverage, voting) work on that matrix.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"


class SchemaMismatchError(ValueError):
    """A premise, record or oracle refers to features another schema lacks."""


@dataclass(frozen=True)
class Feature:
    """One column of a tabular schema.

    Categorical features carry their admissible value set; continuous ones
    carry the observed (lo, hi) range used for sampling and distance
    normalisation.
    """

    name: str
    kind: str
    values: tuple[str, ...] = ()
    lo: float = math.nan
    hi: float = math.nan

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, CONTINUOUS):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.values:
                raise ValueError(f"categorical feature {self.name!r} has an empty value set")
            if len(set(self.values)) != len(self.values):
                raise ValueError(f"categorical feature {self.name!r} has duplicate values")
        else:
            if not (self.lo <= self.hi):
                raise ValueError(f"continuous feature {self.name!r} needs lo <= hi")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    @property
    def span(self) -> float:
        """Range width for continuous features (0.0 when degenerate)."""
        return float(self.hi - self.lo)


def categorical(name: str, values) -> Feature:
    return Feature(name, CATEGORICAL, values=tuple(values))


def continuous(name: str, lo: float, hi: float) -> Feature:
    return Feature(name, CONTINUOUS, lo=float(lo), hi=float(hi))


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature declarations plus presentation metadata for the label.

    ``target_name`` and ``class_names`` only affect rule text; the engine
    itself works with binary labels 0/1 throughout.
    """

    features: tuple[Feature, ...]
    target_name: str = "class"
    class_names: tuple[str, str] = ("0", "1")

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        if len(self.class_names) != 2:
            raise ValueError("class_names must name exactly two classes")
        object.__setattr__(self, "_index", {f.name: i for i, f in enumerate(self.features)})
        codes = {}
        for f in self.features:
            if f.is_categorical:
                codes[f.name] = {v: i for i, v in enumerate(f.values)}
        object.__setattr__(self, "_codes", codes)

    def __len__(self) -> int:
        return len(self.features)

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaMismatchError(f"feature {name!r} not in schema") from None

    def feature(self, name: str) -> Feature:
        return self.features[self.index_of(name)]

    def has_feature(self, name: str) -> bool:
        return name in self._index

    def label_of(self, text: str) -> int:
        """Map a class-name token (or a literal 0/1) to a binary label."""
        if text in ("0", "1"):
            return int(text)
        for lab, name in enumerate(self.class_names):
            if name == text:
                return lab
        raise ValueError(f"unknown class label {text!r}")

    def encode_value(self, idx: int, value) -> float:
        f = self.features[idx]
        if f.is_categorical:
            try:
                return float(self._codes[f.name][value])
            except KeyError:
                raise ValueError(
                    f"value {value!r} not in categorical feature {f.name!r}"
                ) from None
        return float(value)

    def decode_value(self, idx: int, encoded: float):
        f = self.features[idx]
        if f.is_categorical:
            return f.values[int(encoded)]
        return float(encoded)

    def encode(self, values) -> np.ndarray:
        """Encode one record's values into a float vector."""
        if len(values) != len(self.features):
            raise ValueError(f"expected {len(self.features)} values, got {len(values)}")
        return np.array([self.encode_value(i, v) for i, v in enumerate(values)], dtype=np.float64)

    def decode(self, row: np.ndarray) -> tuple:
        return tuple(self.decode_value(i, row[i]) for i in range(len(self.features)))

    @property
    def kinds_mask(self) -> np.ndarray:
        """Boolean vector: True where the feature is categorical."""
        return np.array([f.is_categorical for f in self.features], dtype=bool)

    @property
    def n_categories(self) -> np.ndarray:
        """Category counts per feature (0 for continuous)."""
        return np.array(
            [len(f.values) if f.is_categorical else 0 for f in self.features], dtype=np.int64
        )


@dataclass(frozen=True)
class Record:
    """A single instance: one value per schema feature."""

    schema: FeatureSchema
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.values) != len(self.schema):
            raise ValueError(
                f"record arity {len(self.values)} != schema arity {len(self.schema)}"
            )
        for i, f in enumerate(self.schema.features):
            v = self.values[i]
            if f.is_categorical:
                if v not in f.values:
                    raise ValueError(f"value {v!r} not allowed for feature {f.name!r}")
            else:
                float(v)

    def __getitem__(self, name: str):
        return self.values[self.schema.index_of(name)]

    def encoded(self) -> np.ndarray:
        return self.schema.encode(self.values)

    def key(self) -> bytes:
        """Stable byte identity of the record's content (seed derivation, caching)."""
        parts = []
        for i, f in enumerate(self.schema.features):
            v = self.values[i]
            parts.append(v.encode() if f.is_categorical else repr(float(v)).encode())
        return b"\x1f".join(parts)


class LabeledDataset:
    """Records plus binary labels over a shared schema.

    Immutable by convention; the encoded matrix and label vector are cached
    on first use and must not be written to.
    """

    def __init__(self, schema: FeatureSchema, records, labels):
        self.schema = schema
        recs = []
        for r in records:
            if isinstance(r, Record):
                if r.schema != schema:
                    raise SchemaMismatchError("record schema differs from dataset schema")
                recs.append(r)
            else:
                recs.append(Record(schema, tuple(r)))
        self.records: tuple[Record, ...] = tuple(recs)
        lab = np.asarray(labels, dtype=np.int64)
        if lab.ndim != 1 or len(lab) != len(self.records):
            raise ValueError("labels must be a vector matching the record count")
        if len(lab) and not np.isin(lab, (0, 1)).all():
            raise ValueError("labels must be binary (0/1)")
        self.labels = lab
        self.labels.setflags(write=False)
        self._matrix = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def matrix(self) -> np.ndarray:
        """Encoded (n, m) float matrix; categorical values as code indices."""
        if self._matrix is None:
            m = np.empty((len(self.records), len(self.schema)), dtype=np.float64)
            for i, r in enumerate(self.records):
                m[i] = r.encoded()
            m.setflags(write=False)
            self._matrix = m
        return self._matrix

    def with_labels(self, labels) -> "LabeledDataset":
        ds = LabeledDataset(self.schema, self.records, labels)
        ds._matrix = self._matrix
        return ds

    def fingerprint(self) -> str:
        """Content hash identifying schema, records and labels."""
        h = hashlib.sha256()
        for f in self.schema.features:
            h.update(repr((f.name, f.kind, f.values, f.lo, f.hi)).encode())
        h.update(self.matrix.tobytes())
        h.update(self.labels.tobytes())
        return h.hexdigest()


def infer_schema(
    rows,
    kinds,
    names=None,
    target_name: str = "class",
) -> FeatureSchema:
    """Build a schema from raw rows: value sets and observed ranges come from the data.

    ``kinds`` is a sequence of ``"c"``/``"n"`` flags, one per column.
    """
    if not rows:
        raise ValueError("cannot infer a schema from zero rows")
    m = len(kinds)
    if names is None:
        names = [f"x{i}" for i in range(m)]
    feats = []
    for j in range(m):
        col = [r[j] for r in rows]
        if kinds[j] == "c":
            seen = sorted(set(col))
            feats.append(categorical(names[j], seen))
        elif kinds[j] == "n":
            vals = [float(v) for v in col]
            feats.append(continuous(names[j], min(vals), max(vals)))
        else:
            raise ValueError(f"unknown kind flag {kinds[j]!r}")
    return FeatureSchema(tuple(feats), target_name=target_name)
