import math

import numpy as np
import pytest

from rulelens import (
    FeatureSchema,
    LabeledDataset,
    NeighborhoodConfig,
    NumericInterval,
    Premise,
    Record,
    Rule,
    ThresholdOracle,
    build_dendrogram,
    collect_local,
    continuous,
    cpar_predict,
    dendrogram_dot,
    fidelity,
    format_global,
    format_rule,
    jaccard_distance,
    majority_class,
    premise_mask,
    q_bic,
    relabel,
    select_cut,
)
from rulelens.local2global import (
    ALL_LEAVES_HEIGHT,
    RuleVoter,
    _jaccard,
    cut_nodes,
    evaluate_cuts,
)

INF = math.inf


def line_schema(lo=0.0, hi=10.0):
    return FeatureSchema((continuous("x", lo, hi),))


def upper_rule(schema, t, cls, feature="x"):
    return Rule(Premise(schema, [NumericInterval(feature, -INF, t, False, True)]), cls)


def lower_rule(schema, t, cls, feature="x"):
    return Rule(Premise(schema, [NumericInterval(feature, t, INF, True, False)]), cls)


class TestJaccard:
    def test_identical_disjoint_and_counted(self):
        schema = line_schema()
        xs = [0.5, 1.5, 2.5, 3.5]
        data = LabeledDataset(schema, [(x,) for x in xs], [0, 0, 1, 1])
        r_a = upper_rule(schema, 2.0, 0)  # covers {0,1}
        r_b = upper_rule(schema, 2.0, 1)  # same cover
        r_c = lower_rule(schema, 2.0, 0)  # covers {2,3}
        assert jaccard_distance(r_a, r_b, data) == 0.0
        assert jaccard_distance(r_a, r_c, data) == 1.0
        # covers {0,1,2} vs {1,2,3}: 1 - 2/4
        r_d = upper_rule(schema, 3.0, 0)
        r_e = Rule(Premise(schema, [NumericInterval("x", 1.0, 4.0, True, True)]), 0)
        assert jaccard_distance(r_d, r_e, data) == 0.5

    def test_both_empty_covers_count_as_disjoint(self):
        schema = line_schema()
        data = LabeledDataset(schema, [(5.0,)], [0])
        r1 = upper_rule(schema, 1.0, 0)
        r2 = upper_rule(schema, 2.0, 0)
        assert jaccard_distance(r1, r2, data) == 1.0

    def test_metric_axioms_on_500_random_triples(self):
        rng = np.random.default_rng(77)
        for _ in range(500):
            n = int(rng.integers(3, 40))
            a, b, c = (rng.random(n) < rng.uniform(0.2, 0.9) for _ in range(3))
            # keep the triple non-degenerate: the empty-empty convention
            # deliberately breaks d(x,x)=0 for empty sets
            for m in (a, b, c):
                if not m.any():
                    m[int(rng.integers(0, n))] = True
            dab, dbc, dac = _jaccard(a, b), _jaccard(b, c), _jaccard(a, c)
            assert _jaccard(a, a) == 0.0
            assert dab == _jaccard(b, a)
            assert dac <= dab + dbc + 1e-12
            assert 0.0 <= dab <= 1.0


def abc_fixture():
    """Three class-0 rules with covers {0..4}, {0..3} and {9}; pairwise
    distances 0.2, 1, 1."""
    schema = line_schema()
    xs = [0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5, 9.5]
    data = LabeledDataset(schema, [(x,) for x in xs], [0] * 5 + [1] * 4 + [0])
    r_a = upper_rule(schema, 5.0, 0)
    r_b = upper_rule(schema, 4.0, 0)
    r_c = lower_rule(schema, 9.0, 0)
    return schema, data, r_a, r_b, r_c


class TestDendrogram:
    def test_single_rule_is_a_leaf_root(self):
        schema, data, r_a, _, _ = abc_fixture()
        d = build_dendrogram([r_a], data)
        assert d.n_leaves == 1
        assert len(d.roots) == 1 and d.roots[0].is_leaf

    def test_closest_pair_merges_first(self):
        schema, data, r_a, r_b, r_c = abc_fixture()
        assert jaccard_distance(r_a, r_b, data) == pytest.approx(0.2)
        assert jaccard_distance(r_a, r_c, data) == 1.0
        d = build_dendrogram([r_a, r_b, r_c], data)
        (root,) = d.roots
        assert root.height == 1.0
        inner = root.left if not root.left.is_leaf else root.right
        assert inner.height == pytest.approx(0.2)
        assert {inner.left.text, inner.right.text} == {format_rule(r_a), format_rule(r_b)}

    def test_leaf_count_invariant(self):
        schema = line_schema()
        rng = np.random.default_rng(13)
        data = LabeledDataset(
            schema, [(float(x),) for x in rng.uniform(0, 10, 50)], rng.integers(0, 2, 50)
        )
        rules = []
        for i in range(12):
            t = float(rng.uniform(0, 10))
            cls = int(rng.integers(0, 2))
            rules.append(upper_rule(schema, t, cls) if i % 2 else lower_rule(schema, t, cls))
        rules = list({format_rule(r): r for r in rules}.values())
        d = build_dendrogram(rules, data)
        for root in d.roots:
            leaves = sum(1 for n in root.walk() if n.is_leaf)
            internal = sum(1 for n in root.walk() if not n.is_leaf)
            assert internal == leaves - 1

    def test_merge_nodes_subsume_children(self):
        schema, data, r_a, r_b, r_c = abc_fixture()
        d = build_dendrogram([r_a, r_b, r_c], data)
        for root in d.roots:
            for node in root.walk():
                if node.is_leaf:
                    continue
                union = node.left.cover | node.right.cover
                assert np.all(node.cover | ~union)

    def test_dot_export_structure(self):
        schema, data, r_a, r_b, r_c = abc_fixture()
        d = build_dendrogram([r_a, r_b, r_c], data)
        dot = dendrogram_dot(d)
        assert dot.startswith("digraph dendrogram {")
        edges = [ln for ln in dot.splitlines() if '" -> "' in ln]
        assert len(edges) == 4  # two internal nodes, two edges each
        assert 'label="h=' in dot
        assert format_rule(r_c) in dot


class TestVoting:
    def cpar_fixture(self):
        """Four rules whose Laplace accuracies are 0.9/0.8 (class 0) and
        0.95/0.6 (class 1); all four cover the probe record."""
        schema = FeatureSchema(tuple(continuous(f"f{i}", 0.0, 1.0) for i in range(4)))
        rows = []
        labels = []
        covered_sets = {
            0: set(range(0, 8)),       # rule 0: 8 covered, 8 correct (class 0)
            1: set(range(0, 3)),       # rule 1: 3 covered, 3 correct (class 0)
            2: set(range(10, 28)),     # rule 2: 18 covered, 18 correct (class 1)
            3: {9, 10, 11},            # rule 3: 3 covered, 2 correct (class 1)
        }
        for i in range(30):
            rows.append(tuple(0.2 if i in covered_sets[j] else 0.8 for j in range(4)))
            labels.append(0 if i < 10 else 1)
        data = LabeledDataset(schema, rows, labels)
        rules = [
            upper_rule(schema, 0.5, 0, feature="f0"),
            upper_rule(schema, 0.5, 0, feature="f1"),
            upper_rule(schema, 0.5, 1, feature="f2"),
            upper_rule(schema, 0.5, 1, feature="f3"),
        ]
        return schema, data, rules

    def test_laplace_values_and_weighted_vote(self):
        from rulelens import laplace_accuracy

        schema, data, rules = self.cpar_fixture()
        assert [laplace_accuracy(r, data) for r in rules] == [0.9, 0.8, 0.95, 0.6]
        probe = Record(schema, (0.2, 0.2, 0.2, 0.2))
        # class 0 average 0.85 beats class 1 average 0.775
        assert cpar_predict(rules, probe, default_class=1, data=data) == 0

    def test_single_covering_rule_wins(self):
        schema, data, rules = self.cpar_fixture()
        probe = Record(schema, (0.8, 0.8, 0.2, 0.8))  # only rule 2 covers
        assert cpar_predict(rules, probe, default_class=0, data=data) == 1

    def test_no_covering_rule_falls_back_to_default(self):
        schema, data, rules = self.cpar_fixture()
        probe = Record(schema, (0.8, 0.8, 0.8, 0.8))
        assert cpar_predict(rules, probe, default_class=0, data=data) == 0
        assert cpar_predict(rules, probe, default_class=1, data=data) == 1

    def test_top_k_limits_the_vote(self):
        schema = line_schema()
        data = LabeledDataset(schema, [(1.0,)] * 10, [1] * 6 + [0] * 4)
        rules = [upper_rule(schema, 2.0 + i, 1) for i in range(8)]
        voter = RuleVoter(rules, data)
        m1, c1 = voter._class_votes(1, None)
        assert int(c1[0]) == 5  # eight rules cover, only five vote


def two_rule_bic_fixture():
    """10 records, 2 rules, hand-computable likelihood."""
    schema = line_schema(0.0, 100.0)
    xs = [5.0, 15.0, 25.0, 35.0, 45.0, 55.0, 65.0, 75.0, 85.0, 95.0]
    labels = [0, 0, 0, 0, 1, 1, 1, 1, 1, 0]
    data = LabeledDataset(schema, [(x,) for x in xs], labels)
    r0 = upper_rule(schema, 50.0, 0)  # covers first 5: 4 correct
    r1 = lower_rule(schema, 50.0, 1)  # covers last 5: 4 correct
    return schema, data, [r0, r1]


class TestQBic:
    def test_hand_computed_fixture(self):
        _, data, rules = two_rule_bic_fixture()
        # independent spreadsheet-style recomputation:
        # both rules have laplace (4+1)/(5+2) = 5/7; every record is covered
        # by exactly one rule, so p(rule class) = (5/7+1)/(5/7+2) = 12/19 and
        # p(other class) = 7/19. 8 records match their rule, 2 do not.
        lap = (4 + 1) / (5 + 2)
        p_match = (lap + 1.0) / (lap + 2.0)
        p_miss = 1.0 / (lap + 2.0)
        log_lik = 8 * math.log(p_match) + 2 * math.log(p_miss)
        expected = -(2 * math.log(10) - 2 * log_lik)
        got = q_bic(rules, data)
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(-15.951802776487645, rel=1e-12)  # frozen

    def test_singleton_beats_equal_likelihood_ten_rules(self):
        schema, data, rules = two_rule_bic_fixture()
        base = [upper_rule(schema, 200.0, 0)]  # covers everything
        never = [upper_rule(schema, -5.0 - i, 0) for i in range(9)]  # cover nothing
        q_small = q_bic(base, data)
        q_large = q_bic(base + never, data)
        assert q_small > q_large
        assert q_small - q_large == pytest.approx(9 * math.log(10), rel=1e-9)

    def test_exact_duplicate_never_increases_q(self):
        _, data, rules = two_rule_bic_fixture()
        assert q_bic(rules + [rules[0]], data) <= q_bic(rules, data)

    def test_added_dead_rule_strictly_decreases_q(self):
        schema, data, rules = two_rule_bic_fixture()
        dead = upper_rule(schema, -10.0, 1)
        assert q_bic(rules + [dead], data) < q_bic(rules, data)

    def test_empty_rule_set_rejected(self):
        _, data, _ = two_rule_bic_fixture()
        with pytest.raises(ValueError):
            q_bic([], data)


class TestFidelity:
    def test_exact_decision_regions_give_one(self):
        schema, data, rules = two_rule_bic_fixture()
        exact = [upper_rule(schema, 40.0, 0), lower_rule(schema, 40.0, 1)]
        # relabel according to the rules themselves
        labels = [0, 0, 0, 0, 1, 1, 1, 1, 1, 1]
        data2 = LabeledDataset(schema, [r.values for r in data.records], labels)
        assert fidelity(exact, majority_class(labels), data2) == 1.0

    def test_empty_rules_fall_back_to_majority(self):
        _, data, _ = two_rule_bic_fixture()
        default = majority_class(data.labels)
        expected = float(np.mean(data.labels == default))
        assert fidelity([], default, data) == expected

    def test_eight_of_ten_votes(self):
        _, data, rules = two_rule_bic_fixture()
        assert fidelity(rules, 0, data) == pytest.approx(0.8)


class TestSelectCut:
    def test_single_leaf_dendrogram(self):
        schema, data, r_a, _, _ = abc_fixture()
        d = build_dendrogram([r_a], data)
        g = select_cut(d, data)
        assert g.n_rules == 1
        assert g.rules[0] == r_a

    def test_zero_height_merge_preferred_over_identical_leaves(self):
        # two rules with identical covers plus a far-away third; the h=0 cut
        # keeps the merged rule and wins on complexity
        schema = line_schema()
        xs = [0.5, 1.5, 2.5, 3.5, 4.5, 9.5] + [float(6 + 0.08 * i) for i in range(34)]
        labels = [0] * 6 + [1] * 34
        data = LabeledDataset(schema, [(x,) for x in xs], labels)
        r_a = upper_rule(schema, 5.0, 0)
        r_b = Rule(Premise(schema, [NumericInterval("x", 0.0, 5.0, True, True)]), 0)
        r_c = lower_rule(schema, 9.0, 0)
        assert np.array_equal(premise_mask(r_a.premise, data), premise_mask(r_b.premise, data))
        d = build_dendrogram([r_a, r_b, r_c], data)
        g = select_cut(d, data)
        assert g.n_rules == 2
        texts = {format_rule(r) for r in g.rules}
        assert format_rule(r_c) in texts

    def test_all_roots_cut_has_one_rule_per_class(self):
        schema = line_schema()
        rng = np.random.default_rng(3)
        data = LabeledDataset(
            schema, [(float(x),) for x in rng.uniform(0, 10, 60)], rng.integers(0, 2, 60)
        )
        rules = [upper_rule(schema, float(t), cls) for t in (2, 4, 6) for cls in (0, 1)]
        d = build_dendrogram(rules, data)
        roots_cut = cut_nodes(d, math.inf)
        assert len(roots_cut) == 2
        assert {n.rule.consequent for n in roots_cut} == {0, 1}

    def test_every_candidate_cut_partitions_the_leaves(self):
        schema = line_schema()
        rng = np.random.default_rng(5)
        data = LabeledDataset(
            schema, [(float(x),) for x in rng.uniform(0, 10, 80)], rng.integers(0, 2, 80)
        )
        rules = []
        for i in range(14):
            t = float(rng.uniform(0, 10))
            cls = int(rng.integers(0, 2))
            rules.append(upper_rule(schema, t, cls) if i % 2 else lower_rule(schema, t, cls))
        rules = list({format_rule(r): r for r in rules}.values())
        d = build_dendrogram(rules, data)
        heights = [ALL_LEAVES_HEIGHT] + d.internal_heights() + [math.inf]
        for h in heights:
            nodes = cut_nodes(d, h)
            for leaf in d.leaves:
                owners = [n for n in nodes if leaf.text in {m.text for m in n.walk() if m.is_leaf} and leaf.rule.consequent == n.rule.consequent]
                # exactly one ancestor-or-self per leaf
                count = 0
                for n in nodes:
                    if any(m is leaf for m in n.walk()):
                        count += 1
                assert count == 1

    def test_monotone_compression_vs_all_leaves(self):
        schema = line_schema()
        rng = np.random.default_rng(9)
        data = LabeledDataset(
            schema, [(float(x),) for x in rng.uniform(0, 10, 100)],
            (rng.uniform(0, 10, 100) > 5).astype(int),
        )
        rules = []
        for i in range(16):
            t = float(rng.uniform(0, 10))
            cls = int(rng.integers(0, 2))
            rules.append(upper_rule(schema, t, cls) if i % 2 else lower_rule(schema, t, cls))
        rules = list({format_rule(r): r for r in rules}.values())
        d = build_dendrogram(rules, data)
        candidates = evaluate_cuts(d, data)
        leaves_cand = next(c for c in candidates if c.height == ALL_LEAVES_HEIGHT)
        g = select_cut(d, data)
        assert g.n_rules <= leaves_cand.n_rules
        assert g.q_score >= leaves_cand.q

    def test_mismatched_reference_dataset_rejected(self):
        schema, data, r_a, r_b, r_c = abc_fixture()
        d = build_dendrogram([r_a, r_b], data)
        other = LabeledDataset(schema, [(1.0,)], [0])
        with pytest.raises(ValueError):
            select_cut(d, other)


class TestCollectLocal:
    def cfg(self, seed=0):
        return NeighborhoodConfig(
            size=150, method="uniform", population_size=80, generations=5, rng_seed=seed
        )

    def test_identical_records_collapse_to_one_rule(self):
        schema = line_schema(0.0, 1.0)
        oracle = ThresholdOracle(schema, "x", 0.5)
        data = relabel(oracle, LabeledDataset(schema, [(0.3,)] * 100, [0] * 100))
        explanations = collect_local(oracle, data, self.cfg(1))
        assert len(explanations) == 1

    def test_grid_dataset_yields_few_single_feature_rules(self):
        schema = FeatureSchema((continuous("x1", 0.0, 1.0),))
        oracle = ThresholdOracle(schema, "x1", 0.5)
        rng = np.random.default_rng(2)
        grid = np.round(np.linspace(0.05, 0.95, 10), 2)
        rows = [(float(rng.choice(grid)),) for _ in range(200)]
        data = relabel(oracle, LabeledDataset(schema, rows, [0] * 200))
        explanations = collect_local(oracle, data, self.cfg(3))
        assert 1 <= len(explanations) <= 10
        for e in explanations:
            assert len(e.factual.premise) <= 1
            iv = e.factual.premise.interval_on("x1")
            assert iv is not None

    def test_shuffled_input_gives_same_rule_set(self):
        schema = line_schema(0.0, 1.0)
        oracle = ThresholdOracle(schema, "x", 0.5)
        rng = np.random.default_rng(4)
        rows = [(float(x),) for x in rng.uniform(0, 1, 60)]
        data = relabel(oracle, LabeledDataset(schema, rows, [0] * 60))
        shuffled_rows = list(rows)
        np.random.default_rng(1).shuffle(shuffled_rows)
        data2 = relabel(oracle, LabeledDataset(schema, shuffled_rows, [0] * 60))
        texts1 = {format_rule(e.factual) for e in collect_local(oracle, data, self.cfg(5))}
        texts2 = {format_rule(e.factual) for e in collect_local(oracle, data2, self.cfg(5))}
        assert texts1 == texts2

    def test_parallel_jobs_match_serial(self):
        schema = line_schema(0.0, 1.0)
        oracle = ThresholdOracle(schema, "x", 0.5)
        rng = np.random.default_rng(6)
        rows = [(float(x),) for x in rng.uniform(0, 1, 30)]
        data = relabel(oracle, LabeledDataset(schema, rows, [0] * 30))
        serial = collect_local(oracle, data, self.cfg(7), jobs=1)
        parallel = collect_local(oracle, data, self.cfg(7), jobs=4)
        assert [format_rule(e.factual) for e in serial] == [
            format_rule(e.factual) for e in parallel
        ]


class TestEndToEndDeterminism:
    def test_pipeline_outputs_byte_identical(self):
        schema = FeatureSchema((continuous("x1", 0.0, 1.0), continuous("x2", 0.0, 1.0)))
        oracle = ThresholdOracle(schema, "x1", 0.5)
        rng = np.random.default_rng(11)
        rows = [tuple(map(float, r)) for r in rng.uniform(0, 1, size=(40, 2))]
        cfg = NeighborhoodConfig(size=120, method="genetic", population_size=60,
                                 generations=5, rng_seed=21)

        def run():
            data = relabel(oracle, LabeledDataset(schema, rows, [0] * 40))
            expls = collect_local(oracle, data, cfg)
            d = build_dendrogram([e.factual for e in expls], data)
            g = select_cut(d, data)
            return format_global(g), dendrogram_dot(d)

        assert run() == run()
