"""Explain one prediction of a random-forest black box.

Trains the builtin forest on a synthetic credit-style dataset, then audits
it around a single applicant: genetic neighborhood, surrogate tree, factual
rule plus minimal-change counterfactuals.

Run: python3 demos/local_explanation.py
"""

import numpy as np

from rulelens import (
    FeatureSchema,
    LabeledDataset,
    NeighborhoodConfig,
    Record,
    categorical,
    continuous,
    explain,
    format_explanation,
    relabel,
    train_forest,
)

rng = np.random.default_rng(7)
schema = FeatureSchema(
    (
        continuous("credit_amount", 0.0, 10000.0),
        continuous("duration_months", 6.0, 72.0),
        continuous("age", 18.0, 80.0),
        categorical("housing", ("own", "rent", "free")),
        categorical("history", ("critical", "paid back", "delayed")),
    ),
    target_name="decision",
    class_names=("deny", "grant"),
)

rows, labels = [], []
for _ in range(800):
    amount = float(rng.uniform(0, 10000))
    duration = float(rng.uniform(6, 72))
    age = float(rng.uniform(18, 80))
    housing = ("own", "rent", "free")[rng.integers(0, 3)]
    history = ("critical", "paid back", "delayed")[rng.integers(0, 3)]
    grant = int(
        (amount < 3000 and history != "critical")
        or (amount < 6000 and housing == "own" and duration < 36)
    )
    rows.append((amount, duration, age, housing, history))
    labels.append(grant)
data = LabeledDataset(schema, rows, labels)

forest = train_forest(data, n_trees=80, max_depth=12, seed=7)
acc = float(np.mean(forest.predict_encoded(data.matrix) == data.labels))
print(f"black box: random forest, training accuracy {acc:.3f}")

applicant = Record(schema, (4200.0, 30.0, 35.0, "own", "paid back"))
print(f"applicant: {applicant.values}")
print(f"black-box decision: {schema.class_names[forest.predict(applicant)]}")
print()

for method in ("genetic", "uniform"):
    cfg = NeighborhoodConfig(
        size=600, method=method, population_size=300, generations=12, rng_seed=42
    )
    e = explain(forest, applicant, cfg)
    print(f"== {method} neighborhood ==")
    print(format_explanation(e))
    print()
