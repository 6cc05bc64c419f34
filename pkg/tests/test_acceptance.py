"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the summary lines.
"""

import functools
import math
import statistics
import time

import numpy as np
import pytest

from rulelens import (
    BackgroundRule,
    FeatureSchema,
    LabeledDataset,
    NeighborhoodConfig,
    NumericInterval,
    Premise,
    Record,
    Rule,
    ThresholdOracle,
    affine_generalize,
    build_dendrogram,
    categorical,
    collect_local,
    compose_background,
    continuous,
    covers,
    explain,
    fidelity,
    fit_tree,
    format_param_rule,
    format_rule,
    gen_genetic,
    gen_uniform,
    majority_class,
    measure,
    merge,
    mixed_distance,
    param_instantiate,
    premise_mask,
    q_bic,
    relabel,
    select_cut,
    subsumes,
    train_forest,
)
from rulelens.blackbox import CachingOracle
from rulelens.cli import main as cli_main
from rulelens.local2global import ALL_LEAVES_HEIGHT, _jaccard, cut_nodes, evaluate_cuts
from rulelens.neighborhood import generate
from rulelens.rules import premise_mask_matrix
from rulelens.seeding import derive_seed, spawn_rng

from conftest import make_random_dataset, make_random_premise, make_random_rule


def report(name):
    """Decorator printing one PASS/FAIL line per criterion."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE {name}: FAIL")
                raise
            print(f"ACCEPTANCE {name}: PASS" + (f" ({detail})" if detail else ""))

        return run

    return wrap


# --- criterion 1: compression with fidelity ---------------------------------

BENCH_CATS = {"k0": ("a", "b", "c"), "k1": ("x", "y", "z"), "k2": ("p", "q", "r", "s")}


def benchmark_schema():
    feats = [continuous(f"c{i}", 0.0, 1.0) for i in range(5)]
    feats += [categorical(name, values) for name, values in BENCH_CATS.items()]
    return FeatureSchema(tuple(feats))


def benchmark_dataset(seed, n=1000):
    """8-feature synthetic tabular benchmark (5 continuous, 3 categorical)."""
    rng = spawn_rng(seed, "bench")
    schema = benchmark_schema()
    rows, labels = [], []
    for _ in range(n):
        c = rng.uniform(0.0, 1.0, size=5)
        k0 = BENCH_CATS["k0"][rng.integers(0, 3)]
        k1 = BENCH_CATS["k1"][rng.integers(0, 3)]
        k2 = BENCH_CATS["k2"][rng.integers(0, 4)]
        y = int((c[0] > 0.6) or (c[1] < 0.25 and k0 == "a") or (c[2] > 0.55 and k1 == "x"))
        rows.append(tuple(float(v) for v in c) + (k0, k1, k2))
        labels.append(y)
    return LabeledDataset(schema, rows, labels)


@report("compression-with-fidelity")
def test_compression_with_fidelity():
    started = time.perf_counter()
    ratios, gaps = [], []
    for seed in range(5):
        data = benchmark_dataset(seed)
        forest = train_forest(data, n_trees=100, max_depth=16, seed=seed)
        relabeled = relabel(forest, data)
        cfg = NeighborhoodConfig(size=500, method="uniform", rng_seed=seed)
        kept = collect_local(forest, relabeled, cfg)
        rules = [e.factual for e in kept]
        dendro = build_dendrogram(rules, relabeled)
        selected = select_cut(dendro, relabeled)
        default = majority_class(relabeled.labels)
        local_fid = fidelity(rules, default, relabeled)
        ratios.append(selected.n_rules / len(rules))
        gaps.append(local_fid - selected.fidelity)
    elapsed = time.perf_counter() - started
    med_ratio = statistics.median(ratios)
    med_gap = statistics.median(gaps)
    assert med_ratio <= 0.2, f"median rule-count ratio {med_ratio} exceeds 1/5"
    assert med_gap <= 0.05, f"median fidelity gap {med_gap * 100:.2f}pp exceeds 5pp"
    assert elapsed <= 600.0, f"runtime {elapsed:.0f}s exceeds 10 minutes"
    return (
        f"median ratio {med_ratio:.3f}, median gap {med_gap * 100:.2f}pp, {elapsed:.0f}s"
    )


# --- criterion 2: local faithfulness -----------------------------------------

@report("local-faithfulness")
def test_local_faithfulness():
    schema = FeatureSchema((continuous("x1", 0.0, 1.0), continuous("x2", 0.0, 1.0)))
    oracle = ThresholdOracle(schema, "x1", 0.5)
    cfg = NeighborhoodConfig(size=400, method="genetic", population_size=200,
                             generations=10, rng_seed=0)
    rng = spawn_rng(1234, "faithfulness-instances")
    instances = []
    while len(instances) < 50:
        x1 = float(rng.uniform(0.0, 1.0))
        if abs(x1 - 0.5) > 0.1:
            instances.append(Record(schema, (x1, float(rng.uniform(0.0, 1.0)))))

    good_rules = 0
    for x in instances:
        sub = cfg.with_seed(derive_seed(0, "faithfulness", x.key()))
        e = explain(oracle, x, sub)
        assert e.fidelity >= 0.95, f"surrogate fidelity {e.fidelity} below 0.95"
        assert e.counterfactuals, "empty counterfactual set"
        iv = e.factual.premise.interval_on("x1")
        if iv is not None and len(e.factual.premise) == 1:
            threshold = iv.upper if iv.upper != math.inf else iv.lower
            if abs(threshold - 0.5) <= 0.1:
                good_rules += 1
        # counterfactual validity against the surrogate the explanation used
        neigh = generate(x, schema, sub, CachingOracle(oracle))
        tree = fit_tree(neigh)
        sample_rng = spawn_rng(0, "faithfulness-samples", x.key())
        for cf in e.counterfactuals:
            X = _sample_in_premise(cf.rule.premise, schema, sample_rng, 100)
            assert premise_mask_matrix(cf.rule.premise, schema, X).all()
            assert np.all(tree.predict(X) != e.label), "counterfactual region hit y'"
    assert good_rules >= 45, f"only {good_rules}/50 factual rules were on-target"
    return f"{good_rules}/50 on-target factual rules"


def _sample_in_premise(premise, schema, rng, n):
    X = np.empty((n, len(schema)))
    for j, f in enumerate(schema.features):
        if f.is_categorical:
            ce = premise.cat_eq_on(f.name)
            X[:, j] = (
                schema.encode_value(j, ce.value)
                if ce is not None
                else rng.integers(0, len(f.values), size=n)
            )
        else:
            lo, hi = f.lo, f.hi
            iv = premise.interval_on(f.name)
            if iv is not None:
                lo, hi = max(lo, iv.lower), min(hi, iv.upper)
            eps = 1e-9 * max(1.0, abs(lo), abs(hi))
            X[:, j] = rng.uniform(lo + eps, hi - eps, size=n)
    return X


# --- criterion 3: neighborhood contrast --------------------------------------

@report("neighborhood-contrast")
def test_neighborhood_contrast():
    schema = FeatureSchema(
        (
            continuous("x1", 0.0, 1.0),
            continuous("x2", -5.0, 5.0),
            continuous("x3", 0.0, 2.0),
            categorical("color", ("red", "green", "blue")),
        )
    )
    oracle = ThresholdOracle(schema, "x1", 0.5)
    x = Record(schema, (0.35, 1.0, 0.4, "green"))
    wins = 0
    for seed in range(20):
        cfg = NeighborhoodConfig(size=200, method="genetic", population_size=100,
                                 generations=8, rng_seed=seed)
        genetic = gen_genetic(x, schema, cfg, oracle)
        uniform = gen_uniform(x, schema, cfg, oracle)
        d_gen = float(mixed_distance(x.encoded(), genetic.matrix[:-1], schema).mean())
        d_uni = float(mixed_distance(x.encoded(), uniform.matrix[:-1], schema).mean())
        wins += int(d_gen < d_uni)
    assert wins >= 18, f"genetic denser in only {wins}/20 trials"
    return f"{wins}/20 trials favor genetic"


# --- criterion 4: invariant suites --------------------------------------------

@report("invariant-suites")
def test_invariant_suites(credit_schema, balance_schema):
    rng = np.random.default_rng(2024)

    # rule-measure identity: confidence * coverage == support to 1e-12
    for _ in range(200):
        data = make_random_dataset(credit_schema, int(rng.integers(5, 50)), rng)
        m = measure(make_random_rule(credit_schema, rng), data)
        assert 0.0 <= m.support <= m.coverage <= 1.0
        if m.confidence is not None:
            assert abs(m.confidence * m.coverage - m.support) <= 1e-12

    # Jaccard metric axioms on 500 random cover-set triples
    for _ in range(500):
        n = int(rng.integers(3, 40))
        masks = []
        for _ in range(3):
            mask = rng.random(n) < rng.uniform(0.2, 0.9)
            if not mask.any():
                mask[int(rng.integers(0, n))] = True
            masks.append(mask)
        a, b, c = masks
        assert _jaccard(a, a) == 0.0
        assert _jaccard(a, b) == _jaccard(b, a)
        assert _jaccard(a, c) <= _jaccard(a, b) + _jaccard(b, c) + 1e-12

    # merge subsumption on 200 random same-class rule pairs
    data = make_random_dataset(credit_schema, 300, rng)
    for _ in range(200):
        cls = int(rng.integers(0, 2))
        r1 = make_random_rule(credit_schema, rng, consequent=cls)
        r2 = make_random_rule(credit_schema, rng, consequent=cls)
        merged = merge(r1, r2)
        assert subsumes(merged.premise, r1.premise).subsumes
        assert subsumes(merged.premise, r2.premise).subsumes
        union = premise_mask(r1.premise, data) | premise_mask(r2.premise, data)
        assert np.all(premise_mask(merged.premise, data) | ~union)

    # dendrogram structure: N-1 merges per class, every cut partitions leaves
    schema = FeatureSchema((continuous("x", 0.0, 10.0),))
    ref = LabeledDataset(
        schema,
        [(float(v),) for v in rng.uniform(0, 10, 80)],
        rng.integers(0, 2, 80),
    )
    rules = []
    for i in range(14):
        t = float(rng.uniform(0, 10))
        cls = int(rng.integers(0, 2))
        iv = (
            NumericInterval("x", -math.inf, t, False, True)
            if i % 2
            else NumericInterval("x", t, math.inf, True, False)
        )
        rules.append(Rule(Premise(schema, [iv]), cls))
    rules = list({format_rule(r): r for r in rules}.values())
    dendro = build_dendrogram(rules, ref)
    for root in dendro.roots:
        leaves = sum(1 for nd in root.walk() if nd.is_leaf)
        internal = sum(1 for nd in root.walk() if not nd.is_leaf)
        assert internal == leaves - 1
    for h in [ALL_LEAVES_HEIGHT] + dendro.internal_heights() + [math.inf]:
        nodes = cut_nodes(dendro, h)
        for leaf in dendro.leaves:
            owners = sum(1 for nd in nodes if any(m is leaf for m in nd.walk()))
            assert owners == 1

    # BIC fixtures: a duplicate rule never increases q
    line = FeatureSchema((continuous("x", 0.0, 100.0),))
    bic_data = LabeledDataset(
        line,
        [(float(5 + 10 * i),) for i in range(10)],
        [0, 0, 0, 0, 1, 1, 1, 1, 1, 0],
    )
    r0 = Rule(Premise(line, [NumericInterval("x", -math.inf, 50.0, False, True)]), 0)
    r1 = Rule(Premise(line, [NumericInterval("x", 50.0, math.inf, False, False)]), 1)
    assert q_bic([r0, r1, r0], bic_data) <= q_bic([r0, r1], bic_data)
    dead = Rule(Premise(line, [NumericInterval("x", -math.inf, -1.0, False, True)]), 0)
    assert q_bic([r0, r1, dead], bic_data) < q_bic([r0, r1], bic_data)

    # published affine-generalization example reproduced exactly
    ub = lambda f, t: NumericInterval(f, -math.inf, t, False, True)
    ra = Rule(Premise(balance_schema, [ub("CreditBalance", 200.0), ub("CheckingBalance", 300.0)]), 0)
    rb = Rule(Premise(balance_schema, [ub("CreditBalance", 300.0), ub("CheckingBalance", 200.0)]), 0)
    p = affine_generalize(ra, rb)
    assert format_param_rule(p) == (
        "CreditBalance <= a, CheckingBalance <= 500.0-a, "
        "200.0 <= a <= 300.0 -> Credit = no"
    )
    assert param_instantiate(p, 200.0) == ra
    assert param_instantiate(p, 300.0) == rb

    # composition-bound soundness on 100 random datasets
    done = 0
    while done < 100:
        data = make_random_dataset(credit_schema, int(rng.integers(30, 100)), rng)
        a = make_random_premise(credit_schema, rng, max_preds=2)
        c = make_random_premise(credit_schema, rng, max_preds=2)
        mask_c = premise_mask(c, data)
        if int(mask_c.sum()) == 0:
            continue
        label = int(rng.integers(0, 2))
        _, bound = compose_background(Rule(a, label), BackgroundRule(a, c), data)
        true_conf = float(np.sum(mask_c & (data.labels == label)) / mask_c.sum())
        assert true_conf >= bound - 1e-12
        done += 1
    return None


# --- criterion 5: determinism --------------------------------------------------

@report("globalize-determinism")
def test_globalize_determinism(tmp_path):
    rng = np.random.default_rng(7)
    lines = ["x1,x2,decision"]
    for _ in range(60):
        x1, x2 = (float(v) for v in rng.uniform(0, 1, 2))
        lines.append(f"{x1!r},{x2!r},{int(x1 > 0.5)}")
    data = tmp_path / "d.csv"
    data.write_text("\n".join(lines) + "\n")
    schema = tmp_path / "d.schema"
    schema.write_text("x1\tn\nx2\tn\n")
    outs = []
    for run in ("r1", "r2"):
        out = tmp_path / run
        cli_main([
            "globalize", "--data", str(data), "--schema", str(schema),
            "--oracle", "builtin", "--seed", "17", "--neigh", "genetic",
            "--size", "80", "--population", "40", "--generations", "5",
            "--trees", "15", "--jobs", "2", "--out", str(out),
        ])
        outs.append(out)
    for name in ("all_local.rules", "global.rules", "dendrogram.dot", "metrics.txt", "cuts.csv"):
        b1 = (outs[0] / name).read_bytes()
        b2 = (outs[1] / name).read_bytes()
        assert b1 == b2, f"{name} differs between identical runs"
    return "rule files, DOT and metrics byte-identical"
