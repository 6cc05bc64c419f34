"""Rule language: predicates, conjunctive premises, rules and their measures.

Predicates come in three forms of increasing expressiveness: categorical
equality, numeric intervals (with explicit endpoint closedness) and linear
inter-feature constraints. A premise is a conjunction with at most one
categorical-equality and one interval predicate per feature; rules attach a
binary consequent.

Measures follow the usual associative-rule definitions: support P(A,B),
coverage P(A), confidence P(B|A), lift, a normalised mutual-information
score, and a chi-square significance p-value. Measures that would divide by
zero are reported as ``None``, never silently as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .dataset import FeatureSchema, LabeledDataset, Record, SchemaMismatchError

INF = math.inf

RELATIONS = ("<=", "<", ">=", ">")


@dataclass(frozen=True)
class CategoricalEq:
    """``feature = value`` over a categorical feature."""

    feature: str
    value: str


@dataclass(frozen=True)
class NumericInterval:
    """``feature in (lower, upper)`` with per-endpoint closedness.

    At least one bound must be finite. Tree paths produce lower-open /
    upper-closed pieces; both-closed intervals render as ``f in [a, b]``.
    """

    feature: str
    lower: float = -INF
    upper: float = INF
    lower_closed: bool = True
    upper_closed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        if math.isinf(self.lower) and math.isinf(self.upper):
            raise ValueError("interval needs at least one finite bound")
        if not self.lower <= self.upper:
            raise ValueError(f"empty interval: lower {self.lower} > upper {self.upper}")
        if self.lower == self.upper and not (self.lower_closed and self.upper_closed):
            raise ValueError("degenerate interval must be closed on both ends")
        # Infinite endpoints are conventionally open.
        if math.isinf(self.lower):
            object.__setattr__(self, "lower_closed", False)
        if math.isinf(self.upper):
            object.__setattr__(self, "upper_closed", False)

    def contains_value(self, x: float) -> bool:
        lo_ok = x >= self.lower if self.lower_closed else x > self.lower
        hi_ok = x <= self.upper if self.upper_closed else x < self.upper
        return lo_ok and hi_ok

    def contains_interval(self, other: "NumericInterval") -> bool:
        """True iff every point of ``other`` lies in ``self``."""
        lo_ok = self.lower < other.lower or (
            self.lower == other.lower and (self.lower_closed or not other.lower_closed)
        )
        hi_ok = self.upper > other.upper or (
            self.upper == other.upper and (self.upper_closed or not other.upper_closed)
        )
        return lo_ok and hi_ok

    def intersect(self, other: "NumericInterval") -> "NumericInterval":
        if self.lower > other.lower:
            lo, lo_c = self.lower, self.lower_closed
        elif other.lower > self.lower:
            lo, lo_c = other.lower, other.lower_closed
        else:
            lo, lo_c = self.lower, self.lower_closed and other.lower_closed
        if self.upper < other.upper:
            hi, hi_c = self.upper, self.upper_closed
        elif other.upper < self.upper:
            hi, hi_c = other.upper, other.upper_closed
        else:
            hi, hi_c = self.upper, self.upper_closed and other.upper_closed
        if lo > hi or (lo == hi and not (lo_c and hi_c)):
            raise ValueError(f"intervals on {self.feature!r} have empty intersection")
        return NumericInterval(self.feature, lo, hi, lo_c, hi_c)

    def hull(self, other: "NumericInterval") -> "NumericInterval":
        """Smallest interval containing both (used by rule merging)."""
        if self.lower < other.lower:
            lo, lo_c = self.lower, self.lower_closed
        elif other.lower < self.lower:
            lo, lo_c = other.lower, other.lower_closed
        else:
            lo, lo_c = self.lower, self.lower_closed or other.lower_closed
        if self.upper > other.upper:
            hi, hi_c = self.upper, self.upper_closed
        elif other.upper > self.upper:
            hi, hi_c = other.upper, other.upper_closed
        else:
            hi, hi_c = self.upper, self.upper_closed or other.upper_closed
        return NumericInterval(self.feature, lo, hi, lo_c, hi_c)


@dataclass(frozen=True)
class LinearConstraint:
    """``sum(coef * feature) relop threshold`` over continuous features only."""

    terms: tuple[tuple[str, float], ...]
    relation: str
    threshold: float

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((f, float(c)) for f, c in self.terms))
        object.__setattr__(self, "threshold", float(self.threshold))
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        if not any(c != 0.0 for _, c in self.terms):
            raise ValueError("linear constraint needs at least one nonzero coefficient")
        names = [f for f, _ in self.terms]
        if len(set(names)) != len(names):
            raise ValueError("linear constraint repeats a feature")

    def holds(self, value: float) -> bool:
        # Exact floating comparison, no epsilon: coverage sets must be
        # deterministic for Jaccard distances downstream.
        if self.relation == "<=":
            return value <= self.threshold
        if self.relation == "<":
            return value < self.threshold
        if self.relation == ">=":
            return value >= self.threshold
        return value > self.threshold


Predicate = CategoricalEq | NumericInterval | LinearConstraint


class Premise:
    """An immutable conjunction of predicates (empty premise is always true).

    Construction normalises the input: intervals on the same feature are
    intersected, duplicate predicates collapse, and contradictory
    categorical equalities are rejected.
    """

    __slots__ = ("schema", "cat_eqs", "intervals", "linears", "_hash")

    def __init__(self, schema: FeatureSchema, predicates=()):
        cats: dict[str, CategoricalEq] = {}
        ivals: dict[str, NumericInterval] = {}
        lins: list[LinearConstraint] = []
        for p in predicates:
            if isinstance(p, CategoricalEq):
                f = schema.feature(p.feature)
                if not f.is_categorical:
                    raise ValueError(f"feature {p.feature!r} is not categorical")
                if p.value not in f.values:
                    raise ValueError(f"value {p.value!r} not in feature {p.feature!r}")
                prev = cats.get(p.feature)
                if prev is not None and prev.value != p.value:
                    raise ValueError(f"contradictory equalities on {p.feature!r}")
                cats[p.feature] = p
            elif isinstance(p, NumericInterval):
                f = schema.feature(p.feature)
                if f.is_categorical:
                    raise ValueError(f"feature {p.feature!r} is not continuous")
                prev = ivals.get(p.feature)
                ivals[p.feature] = p if prev is None else prev.intersect(p)
            elif isinstance(p, LinearConstraint):
                for name, _ in p.terms:
                    if schema.feature(name).is_categorical:
                        raise ValueError("linear constraints may only use continuous features")
                if p not in lins:
                    lins.append(p)
            else:
                raise TypeError(f"not a predicate: {p!r}")
        self.schema = schema
        self.cat_eqs = tuple(sorted(cats.values(), key=lambda p: p.feature))
        self.intervals = tuple(sorted(ivals.values(), key=lambda p: p.feature))
        self.linears = tuple(sorted(lins, key=_linear_sort_key))
        self._hash = hash((self.cat_eqs, self.intervals, self.linears))

    @property
    def predicates(self) -> tuple[Predicate, ...]:
        return self.cat_eqs + self.intervals + self.linears

    def __len__(self) -> int:
        return len(self.cat_eqs) + len(self.intervals) + len(self.linears)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Premise)
            and self.cat_eqs == other.cat_eqs
            and self.intervals == other.intervals
            and self.linears == other.linears
            and self.schema == other.schema
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        from .ruletext import format_premise

        return f"Premise({format_premise(self) or 'true'})"

    def interval_on(self, feature: str) -> NumericInterval | None:
        for iv in self.intervals:
            if iv.feature == feature:
                return iv
        return None

    def cat_eq_on(self, feature: str) -> CategoricalEq | None:
        for ce in self.cat_eqs:
            if ce.feature == feature:
                return ce
        return None


def _linear_sort_key(lc: LinearConstraint):
    return (lc.terms, lc.relation, lc.threshold)


@dataclass(frozen=True)
class Rule:
    """A conjunctive premise implying a binary class label."""

    premise: Premise
    consequent: int

    def __post_init__(self):
        if self.consequent not in (0, 1):
            raise ValueError("consequent must be 0 or 1")

    @property
    def schema(self) -> FeatureSchema:
        return self.premise.schema

    def __repr__(self) -> str:
        from .ruletext import format_rule

        return f"Rule({format_rule(self)})"


@dataclass(frozen=True)
class CounterfactualRule:
    """An opposite-consequent rule plus the number of features the instance
    would have to change to satisfy it."""

    rule: Rule
    change_count: int


@dataclass(frozen=True)
class ParamRule:
    """Two coupled upper bounds sharing a parameter: ``f <= a`` and
    ``g <= s - a`` for ``a`` in ``[a_lo, a_hi]``, over a fixed base premise.

    The generating endpoint pairs are kept so instantiation at either
    endpoint reproduces the original rules bit-for-bit.
    """

    base: Premise
    feature_a: str
    feature_b: str
    bound_sum: float
    a_lo: float
    a_hi: float
    b_at_lo: float
    b_at_hi: float
    consequent: int

    def __post_init__(self):
        if not self.a_lo <= self.a_hi:
            raise ValueError("parameter range needs a_lo <= a_hi")
        if self.consequent not in (0, 1):
            raise ValueError("consequent must be 0 or 1")

    @property
    def schema(self) -> FeatureSchema:
        return self.base.schema


def _check_record_schema(premise: Premise, record: Record) -> None:
    if record.schema == premise.schema:
        return
    # A different schema is tolerated only if it carries every feature the
    # premise mentions, with the same kind.
    for p in premise.predicates:
        names = [f for f, _ in p.terms] if isinstance(p, LinearConstraint) else [p.feature]
        for name in names:
            if not record.schema.has_feature(name):
                raise SchemaMismatchError(f"record schema lacks feature {name!r}")
            if record.schema.feature(name).kind != premise.schema.feature(name).kind:
                raise SchemaMismatchError(f"feature {name!r} has a different kind")


def covers(premise: Premise, record: Record) -> bool:
    """True iff every predicate of ``premise`` holds on ``record``."""
    _check_record_schema(premise, record)
    for ce in premise.cat_eqs:
        if record[ce.feature] != ce.value:
            return False
    for iv in premise.intervals:
        if not iv.contains_value(float(record[iv.feature])):
            return False
    for lc in premise.linears:
        total = sum(c * float(record[f]) for f, c in lc.terms)
        if not lc.holds(total):
            return False
    return True


def premise_mask(premise: Premise, data: LabeledDataset) -> np.ndarray:
    """Vectorised coverage: boolean mask of covered records in ``data``."""
    return premise_mask_matrix(premise, data.schema, data.matrix)


def premise_mask_matrix(premise: Premise, schema: FeatureSchema, X: np.ndarray) -> np.ndarray:
    """Coverage mask over an encoded record matrix."""
    X = np.atleast_2d(X)
    mask = np.ones(len(X), dtype=bool)
    for ce in premise.cat_eqs:
        j = schema.index_of(ce.feature)
        code = schema.encode_value(j, ce.value)
        mask &= X[:, j] == code
    for iv in premise.intervals:
        j = schema.index_of(iv.feature)
        col = X[:, j]
        if iv.lower_closed:
            mask &= col >= iv.lower
        elif iv.lower != -INF:
            mask &= col > iv.lower
        if iv.upper_closed:
            mask &= col <= iv.upper
        elif iv.upper != INF:
            mask &= col < iv.upper
    for lc in premise.linears:
        total = np.zeros(len(X))
        for f, c in lc.terms:
            total += c * X[:, schema.index_of(f)]
        if lc.relation == "<=":
            mask &= total <= lc.threshold
        elif lc.relation == "<":
            mask &= total < lc.threshold
        elif lc.relation == ">=":
            mask &= total >= lc.threshold
        else:
            mask &= total > lc.threshold
    return mask


@dataclass(frozen=True)
class RuleMeasures:
    """Statistical measures of a rule over a reference dataset.

    ``confidence``, ``lift`` and ``mi_score`` are ``None`` when undefined
    (zero coverage, degenerate marginals) so downstream ranking never
    confuses "no coverage" with "zero confidence".
    """

    support: float
    coverage: float
    confidence: float | None
    lift: float | None
    mi_score: float | None
    p_value: float


def _mutual_information_bits(table: np.ndarray) -> float:
    """I(A;B) in bits from a 2x2 count table.

    Computed term-by-term so exact product tables give exactly 0.0.
    """
    n = table.sum()
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    total = 0.0
    for i in (0, 1):
        for j in (0, 1):
            nij = table[i, j]
            if nij == 0:
                continue
            total += (nij / n) * math.log2((nij * n) / (rows[i] * cols[j]))
    return total


def _entropy_bits(counts) -> float:
    n = sum(counts)
    h = 0.0
    for c in counts:
        if c:
            h -= (c / n) * math.log2(c / n)
    return h


def contingency(rule: Rule, data: LabeledDataset) -> np.ndarray:
    """2x2 table of (covers, label-matches-consequent) counts."""
    cov = premise_mask(rule.premise, data)
    match = data.labels == rule.consequent
    a = int(np.sum(cov & match))
    b = int(np.sum(cov & ~match))
    c = int(np.sum(~cov & match))
    d = int(np.sum(~cov & ~match))
    return np.array([[a, b], [c, d]], dtype=np.int64)


def chi2_pvalue(table: np.ndarray) -> float:
    """Pearson chi-square p-value for a 2x2 table, df=1.

    Yates continuity correction is applied when any expected count falls
    below 5. A zero marginal yields p=1 (no evidence of association).
    """
    table = np.asarray(table, dtype=np.float64)
    n = table.sum()
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    if n == 0 or (rows == 0).any() or (cols == 0).any():
        return 1.0
    expected = np.outer(rows, cols) / n
    if (expected < 5).any():
        dev = np.maximum(np.abs(table - expected) - 0.5, 0.0)
    else:
        dev = np.abs(table - expected)
    stat = float(np.sum(dev * dev / expected))
    return float(chi2.sf(stat, df=1))


def significance_test(rule: Rule, data: LabeledDataset) -> float:
    """Chi-square independence p-value of covers vs. label-matches."""
    if len(data) == 0:
        raise ValueError("dataset is empty")
    return chi2_pvalue(contingency(rule, data))


def measure(rule: Rule, data: LabeledDataset) -> RuleMeasures:
    """Compute support, coverage, confidence, lift, MI score and p-value."""
    n = len(data)
    if n == 0:
        raise ValueError("dataset is empty")
    table = contingency(rule, data)
    n_cov_match = table[0, 0]
    n_cov = table[0, 0] + table[0, 1]
    n_match = table[0, 0] + table[1, 0]

    support = n_cov_match / n
    coverage = n_cov / n
    confidence = support / coverage if n_cov > 0 else None
    p_b = n_match / n
    lift = support / (coverage * p_b) if n_cov > 0 and n_match > 0 else None

    h_a = _entropy_bits([n_cov, n - n_cov])
    h_b = _entropy_bits([n_match, n - n_match])
    denom = min(h_a, h_b)
    if denom > 0:
        mi = _mutual_information_bits(table) / denom
        mi_score = min(max(mi, 0.0), 1.0)
    else:
        mi_score = None

    return RuleMeasures(
        support=support,
        coverage=coverage,
        confidence=confidence,
        lift=lift,
        mi_score=mi_score,
        p_value=chi2_pvalue(table),
    )


def laplace_accuracy(rule: Rule, data: LabeledDataset) -> float:
    """Smoothed precision (n_correct + 1) / (n_covered + 2) over ``data``."""
    cov = premise_mask(rule.premise, data)
    n_cov = int(cov.sum())
    n_correct = int(np.sum(cov & (data.labels == rule.consequent)))
    return (n_correct + 1) / (n_cov + 2)
