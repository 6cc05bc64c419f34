"""Local explanations: a decision tree fitted on a neighborhood, a factual
rule read off the instance's root-to-leaf path, and counterfactual rules
from minimal-change opposite-label leaves.

Negative categorical split conditions ("feature is not c", the violating
branch of a one-vs-rest split) cannot be expressed in the rule language.
The factual rule simply drops them, which only widens its premise and never
breaks factual consistency. Counterfactual rules instead pin the feature to
a concrete value (the instance's own value when admissible, otherwise the
most common admissible value among the leaf's training records), so that
every record satisfying a counterfactual premise is guaranteed to reach an
opposite-label leaf.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cart
from .blackbox import CachingOracle, Oracle
from .dataset import FeatureSchema, Record
from .neighborhood import Neighborhood, NeighborhoodConfig, generate
from .rules import INF, CategoricalEq, CounterfactualRule, NumericInterval, Premise, Rule
from .ruletext import format_rule

DEFAULT_MIN_LEAF = 5
DEFAULT_MAX_DEPTH = 8


@dataclass(frozen=True)
class Explanation:
    """Why the black box labeled one instance the way it did.

    ``label`` is the black box's answer for the instance; ``factual`` covers
    the instance by construction; every counterfactual rule concludes the
    opposite class. ``fidelity`` is the surrogate's agreement with the
    oracle over the generating neighborhood.
    """

    instance: Record
    label: int
    factual: Rule
    counterfactuals: tuple[CounterfactualRule, ...]
    fidelity: float
    neighborhood_size: int
    unfaithful_at_x: bool = False
    warning: str | None = None


def fit_tree(
    neighborhood: Neighborhood,
    min_leaf: int = DEFAULT_MIN_LEAF,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> cart.Tree:
    """CART surrogate over the neighborhood (Gini, deterministic ties)."""
    if len(neighborhood) == 0:
        raise ValueError("empty neighborhood")
    return cart.grow_tree(
        neighborhood.matrix,
        neighborhood.labels,
        neighborhood.schema.kinds_mask,
        max_depth=max_depth,
        min_leaf=min_leaf,
    )


def _path_predicates(schema: FeatureSchema, steps):
    """Fold raw path conditions into predicates plus excluded category sets.

    Returns ``(preds, negatives)`` where ``negatives`` maps a feature index
    to the category codes the path rules out without pinning a value.
    """
    preds = []
    positives: dict[int, float] = {}
    negatives: dict[int, set[float]] = {}
    for f, is_cat, v, went_left in steps:
        if is_cat:
            if went_left:
                positives[f] = v
            else:
                negatives.setdefault(f, set()).add(v)
        else:
            name = schema.features[f].name
            if went_left:
                preds.append(NumericInterval(name, -INF, v, False, True))
            else:
                preds.append(NumericInterval(name, v, INF, False, False))
    for f, code in positives.items():
        feat = schema.features[f]
        preds.append(CategoricalEq(feat.name, feat.values[int(code)]))
        negatives.pop(f, None)
    return preds, negatives


def extract_rule(tree: cart.Tree, x: Record) -> Rule:
    """Factual rule: the instance's path conditions, negatives dropped."""
    schema = x.schema
    leaf, steps = tree.path_to_leaf(x.encoded())
    preds, _ = _path_predicates(schema, steps)
    return Rule(Premise(schema, preds), int(tree.klass[leaf]))


def _change_count(schema, x_row, steps) -> int:
    """Number of features whose path constraints the instance violates."""
    upper: dict[int, tuple] = {}
    positives: dict[int, float] = {}
    negatives: dict[int, set[float]] = {}
    intervals: dict[int, list] = {}
    for f, is_cat, v, went_left in steps:
        if is_cat:
            if went_left:
                positives[f] = v
            else:
                negatives.setdefault(f, set()).add(v)
        else:
            intervals.setdefault(f, []).append((v, went_left))
    changed = 0
    for f, conds in intervals.items():
        val = x_row[f]
        ok = all((val <= v) if went_left else (val > v) for v, went_left in conds)
        changed += 0 if ok else 1
    for f, v in positives.items():
        changed += 0 if x_row[f] == v else 1
    for f, excluded in negatives.items():
        if f in positives:
            continue
        changed += 1 if x_row[f] in excluded else 0
    return changed


def _instantiate_negatives(schema, negatives, x_row, leaf_rows):
    """Pick a positive stand-in for each excluded-categories constraint."""
    preds = []
    for f, excluded in negatives.items():
        feat = schema.features[int(f)]
        if x_row[f] not in excluded:
            preds.append(CategoricalEq(feat.name, feat.values[int(x_row[f])]))
            continue
        if len(leaf_rows):
            codes = leaf_rows[:, f].astype(np.int64)
            counts = np.bincount(codes, minlength=len(feat.values))
        else:
            counts = np.zeros(len(feat.values), dtype=np.int64)
        for code in excluded:
            counts[int(code)] = -1
        preds.append(CategoricalEq(feat.name, feat.values[int(np.argmax(counts))]))
    return preds


def extract_counterfactuals(
    tree: cart.Tree,
    x: Record,
    label: int,
    neighborhood_matrix: np.ndarray | None = None,
) -> tuple[CounterfactualRule, ...]:
    """All minimal-change rules from leaves predicting the opposite class.

    The change count of a leaf is the number of features the instance would
    have to alter to satisfy that leaf's path; every leaf achieving the
    minimum is returned. ``neighborhood_matrix`` (the surrogate's training
    block) guides the choice of stand-in values for excluded categories.
    """
    schema = x.schema
    x_row = x.encoded()
    leaf_rows_by_id = None
    if neighborhood_matrix is not None:
        ids = tree.leaf_ids(neighborhood_matrix)
        leaf_rows_by_id = {}
        for leaf in np.unique(ids):
            leaf_rows_by_id[int(leaf)] = neighborhood_matrix[ids == leaf]

    candidates = []
    for leaf, steps in tree.leaves_with_paths():
        if int(tree.klass[leaf]) == int(label):
            continue
        count = _change_count(schema, x_row, steps)
        preds, negatives = _path_predicates(schema, steps)
        if negatives:
            rows = (
                leaf_rows_by_id.get(int(leaf), np.empty((0, len(schema))))
                if leaf_rows_by_id is not None
                else np.empty((0, len(schema)))
            )
            preds.extend(_instantiate_negatives(schema, negatives, x_row, rows))
        rule = Rule(Premise(schema, preds), int(tree.klass[leaf]))
        candidates.append((count, rule))

    if not candidates:
        return ()
    best = min(count for count, _ in candidates)
    chosen = [CounterfactualRule(rule, count) for count, rule in candidates if count == best]
    chosen.sort(key=lambda cf: format_rule(cf.rule))
    return tuple(chosen)


def explain(
    oracle: Oracle,
    x: Record,
    cfg: NeighborhoodConfig,
    min_leaf: int = DEFAULT_MIN_LEAF,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> Explanation:
    """Full local pipeline: neighborhood, surrogate tree, rules.

    When the surrogate disagrees with the oracle on the instance itself the
    explanation is flagged ``unfaithful_at_x`` (and aggregation skips it by
    default); its factual consequent is the surrogate leaf's class.
    """
    cached = CachingOracle(oracle)
    neigh = generate(x, x.schema, cfg, cached)
    tree = fit_tree(neigh, min_leaf=min_leaf, max_depth=max_depth)
    factual = extract_rule(tree, x)
    counterfactuals = extract_counterfactuals(tree, x, neigh.origin_label, neigh.matrix)
    fidelity = float(np.mean(tree.predict(neigh.matrix) == neigh.labels))
    return Explanation(
        instance=x,
        label=neigh.origin_label,
        factual=factual,
        counterfactuals=counterfactuals,
        fidelity=fidelity,
        neighborhood_size=len(neigh),
        unfaithful_at_x=factual.consequent != neigh.origin_label,
        warning=neigh.warning,
    )


def format_explanation(e: Explanation) -> str:
    """Text dump: factual rule, counterfactual lines, key=value trailers."""
    lines = [format_rule(e.factual)]
    for cf in e.counterfactuals:
        lines.append(f"CF[{cf.change_count}] {format_rule(cf.rule)}")
    lines.append(f"# fidelity={e.fidelity!r}")
    lines.append(f"# neighborhood_size={e.neighborhood_size}")
    lines.append(f"# unfaithful_at_x={'true' if e.unfaithful_at_x else 'false'}")
    lines.append(f"# locally_constant={'true' if e.warning else 'false'}")
    return "\n".join(lines)
