"""Operators over rules: subsumption, merging, affine generalisation and
composition with background knowledge.

Subsumption is syntactic and therefore sound but incomplete: a ``True``
answer guarantees the general premise covers a superset of the specific
one on every dataset; a ``False`` answer means no syntactic witness was
found, not that subsumption fails semantically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset, SchemaMismatchError
from .rules import (
    INF,
    CategoricalEq,
    LinearConstraint,
    NumericInterval,
    ParamRule,
    Premise,
    Rule,
    premise_mask,
)

SYNTACTIC = "syntactic"
UNDECIDED = "undecided"


@dataclass(frozen=True)
class SubsumptionResult:
    subsumes: bool
    method: str


@dataclass(frozen=True)
class BackgroundRule:
    """Background knowledge of the form premise-implies-premise, e.g. a
    demographic fact tying one feature region to another."""

    premise: Premise
    implies: Premise


def _normalize_linear(lc: LinearConstraint):
    """Rewrite as coefficient vector with a <= / < relation."""
    if lc.relation in ("<=", "<"):
        return dict(lc.terms), lc.relation, lc.threshold
    return {f: -c for f, c in lc.terms}, ("<=" if lc.relation == ">=" else "<"), -lc.threshold


def _linear_implies(specific: LinearConstraint, general: LinearConstraint) -> bool:
    """True iff ``specific`` implies ``general`` via a positive scaling."""
    cs, rel_s, ts = _normalize_linear(specific)
    cg, rel_g, tg = _normalize_linear(general)
    if set(cs) != set(cg):
        return False
    lam = None
    for f, coef_g in cg.items():
        coef_s = cs[f]
        if coef_g == 0.0 or coef_s == 0.0:
            if coef_g != coef_s:
                return False
            continue
        ratio = coef_s / coef_g
        if ratio <= 0.0:
            return False
        if lam is None:
            lam = ratio
        elif ratio != lam:
            return False
    if lam is None:
        return False
    scaled = ts / lam
    return scaled < tg or (scaled == tg and (rel_g == "<=" or rel_s == "<"))


def subsumes(general: Premise, specific: Premise) -> SubsumptionResult:
    """Decide syntactically whether ``general`` covers everything ``specific`` does."""
    if general.schema != specific.schema:
        raise SchemaMismatchError("premises built against different schemas")
    for ce in general.cat_eqs:
        other = specific.cat_eq_on(ce.feature)
        if other is None or other.value != ce.value:
            return SubsumptionResult(False, UNDECIDED)
    for iv in general.intervals:
        other = specific.interval_on(iv.feature)
        if other is None or not iv.contains_interval(other):
            return SubsumptionResult(False, UNDECIDED)
    for lc in general.linears:
        if not any(_linear_implies(s, lc) for s in specific.linears):
            return SubsumptionResult(False, UNDECIDED)
    return SubsumptionResult(True, SYNTACTIC)


def merge(r1: Rule, r2: Rule) -> Rule:
    """Minimal syntactic generalisation of two same-consequent rules.

    Per feature: equal categorical equalities are kept, disagreeing or
    one-sided ones dropped; interval pairs are replaced by their hull;
    linear constraints survive only when identical in both premises. The
    result subsumes both inputs.
    """
    if r1.consequent != r2.consequent:
        raise ValueError("cannot merge rules with different consequents")
    if r1.schema != r2.schema:
        raise SchemaMismatchError("rules built against different schemas")
    preds = []
    for ce in r1.premise.cat_eqs:
        other = r2.premise.cat_eq_on(ce.feature)
        if other is not None and other.value == ce.value:
            preds.append(ce)
    for iv in r1.premise.intervals:
        other = r2.premise.interval_on(iv.feature)
        if other is not None:
            lo = min(iv.lower, other.lower)
            hi = max(iv.upper, other.upper)
            if not (lo == -INF and hi == INF):  # unbounded hull = no constraint
                preds.append(iv.hull(other))
    for lc in r1.premise.linears:
        if lc in r2.premise.linears:
            preds.append(lc)
    return Rule(Premise(r1.schema, preds), r1.consequent)


def _upper_bounds(premise: Premise) -> dict[str, float]:
    """Features constrained only as ``f <= t`` (closed upper, open lower)."""
    out = {}
    for iv in premise.intervals:
        if iv.lower == -INF and iv.upper != INF and iv.upper_closed:
            out[iv.feature] = iv.upper
    return out


def affine_generalize(r1: Rule, r2: Rule) -> ParamRule:
    """Fold two rules differing in exactly two coupled upper bounds into a
    parameterised rule ``f <= a, g <= s-a``.

    Requires equal consequents, identical remaining predicates, and equal
    bound sums; otherwise raises ``ValueError("not affinely generalizable")``
    and the caller is expected to fall back to :func:`merge`.
    """
    if r1.consequent != r2.consequent:
        raise ValueError("not affinely generalizable: consequents differ")
    if r1.schema != r2.schema:
        raise SchemaMismatchError("rules built against different schemas")
    ub1 = _upper_bounds(r1.premise)
    ub2 = _upper_bounds(r2.premise)
    if set(ub1) != set(ub2):
        raise ValueError("not affinely generalizable: upper-bounded features differ")
    if r1.premise.cat_eqs != r2.premise.cat_eqs or r1.premise.linears != r2.premise.linears:
        raise ValueError("not affinely generalizable: non-parameter predicates differ")
    others1 = [iv for iv in r1.premise.intervals if iv.feature not in ub1]
    others2 = [iv for iv in r2.premise.intervals if iv.feature not in ub2]
    if others1 != others2:
        raise ValueError("not affinely generalizable: non-parameter intervals differ")

    schema_order = {f.name: i for i, f in enumerate(r1.schema.features)}
    differing = sorted((f for f in ub1 if ub1[f] != ub2[f]), key=schema_order.get)
    if len(differing) == 0:
        candidates = sorted(ub1, key=schema_order.get)
        if len(candidates) < 2:
            raise ValueError("not affinely generalizable: fewer than two upper bounds")
        fa, fb = candidates[0], candidates[1]
    elif len(differing) == 2:
        fa, fb = differing
    else:
        raise ValueError("not affinely generalizable: need exactly two differing bounds")

    ta1, tb1 = ub1[fa], ub1[fb]
    ta2, tb2 = ub2[fa], ub2[fb]
    if ta1 + tb1 != ta2 + tb2:
        raise ValueError("not affinely generalizable: bound sums differ")

    base_preds = list(r1.premise.cat_eqs) + list(r1.premise.linears)
    base_preds += [iv for iv in r1.premise.intervals if iv.feature not in (fa, fb)]
    if (ta1, tb1) <= (ta2, tb2):
        a_lo, b_lo, a_hi, b_hi = ta1, tb1, ta2, tb2
    else:
        a_lo, b_lo, a_hi, b_hi = ta2, tb2, ta1, tb1
    return ParamRule(
        base=Premise(r1.schema, base_preds),
        feature_a=fa,
        feature_b=fb,
        bound_sum=ta1 + tb1,
        a_lo=a_lo,
        a_hi=a_hi,
        b_at_lo=b_lo,
        b_at_hi=b_hi,
        consequent=r1.consequent,
    )


def param_instantiate(p: ParamRule, a: float) -> Rule:
    """Substitute a concrete parameter value into a parameterised rule.

    Endpoint values reproduce the generating rules exactly (no float
    round-trip through the bound sum).
    """
    a = float(a)
    if not (p.a_lo <= a <= p.a_hi):
        raise ValueError(f"parameter {a} outside [{p.a_lo}, {p.a_hi}]")
    if a == p.a_lo:
        b = p.b_at_lo
    elif a == p.a_hi:
        b = p.b_at_hi
    else:
        b = p.bound_sum - a
    preds = list(p.base.predicates)
    preds.append(NumericInterval(p.feature_a, -INF, a, False, True))
    preds.append(NumericInterval(p.feature_b, -INF, b, False, True))
    return Rule(Premise(p.schema, preds), p.consequent)


def compose_background(
    decision: Rule, background: BackgroundRule, data: LabeledDataset
) -> tuple[Rule, float]:
    """Rewrite a decision rule through background knowledge sharing its premise.

    Given ``A -> B`` and the background fact ``A -> C``, emit ``C -> B``
    with the set-theoretic confidence lower bound
    ``max(0, (n(A,B) - (n(A) - n(A,C))) / n(C))`` computed over ``data``.
    """
    if decision.premise != background.premise:
        raise ValueError("decision and background premises must match syntactically")
    mask_a = premise_mask(decision.premise, data)
    mask_c = premise_mask(background.implies, data)
    n_c = int(mask_c.sum())
    if n_c == 0:
        raise ValueError("bound undefined: background conclusion covers no records")
    n_a = int(mask_a.sum())
    n_ab = int(np.sum(mask_a & (data.labels == decision.consequent)))
    n_ac = int(np.sum(mask_a & mask_c))
    bound = max(0.0, (n_ab - (n_a - n_ac)) / n_c)
    return Rule(background.implies, decision.consequent), bound
