"""Full local-to-global pipeline on a synthetic benchmark.

Explains every training record of a 100-tree random forest, merges the
local rules bottom-up into a dendrogram, and selects the BIC-optimal cut.
Prints the compression achieved and the selected global rule set.

Run: python3 demos/global_rules.py
"""

import time

import numpy as np

from rulelens import (
    FeatureSchema,
    LabeledDataset,
    NeighborhoodConfig,
    build_dendrogram,
    categorical,
    collect_local,
    continuous,
    fidelity,
    format_rule,
    majority_class,
    relabel,
    select_cut,
    train_forest,
)

rng = np.random.default_rng(11)
schema = FeatureSchema(
    (
        continuous("income", 0.0, 1.0),
        continuous("debt", 0.0, 1.0),
        continuous("tenure", 0.0, 1.0),
        categorical("segment", ("retail", "smb", "corp")),
    )
)

rows, labels = [], []
for _ in range(600):
    income, debt, tenure = (float(v) for v in rng.uniform(0, 1, 3))
    segment = ("retail", "smb", "corp")[rng.integers(0, 3)]
    y = int(income > 0.55 or (debt < 0.2 and segment == "corp"))
    rows.append((income, debt, tenure, segment))
    labels.append(y)
data = LabeledDataset(schema, rows, labels)

forest = train_forest(data, n_trees=100, max_depth=16, seed=11)
relabeled = relabel(forest, data)

started = time.perf_counter()
cfg = NeighborhoodConfig(size=400, method="uniform", rng_seed=11)
kept = collect_local(forest, relabeled, cfg)
rules = [e.factual for e in kept]
dendrogram = build_dendrogram(rules, relabeled)
selected = select_cut(dendrogram, relabeled)
elapsed = time.perf_counter() - started

default = majority_class(relabeled.labels)
local_fidelity = fidelity(rules, default, relabeled)

print(f"local explanations (deduped): {len(rules)} rules, fidelity {local_fidelity:.3f}")
print(
    f"selected global cut:          {selected.n_rules} rules, "
    f"fidelity {selected.fidelity:.3f} (height {selected.cut_height:.3f})"
)
print(f"compression factor:           {len(rules) / selected.n_rules:.1f}x in {elapsed:.1f}s")
print()
print("global rule set:")
for rule in selected.rules:
    print(" ", format_rule(rule))
