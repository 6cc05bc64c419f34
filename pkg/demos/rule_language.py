"""Tour of the rule language: predicates, coverage, measures, text round-trip.

Run: python3 demos/rule_language.py
"""

import numpy as np

from rulelens import (
    CategoricalEq,
    FeatureSchema,
    LabeledDataset,
    LinearConstraint,
    NumericInterval,
    Premise,
    Record,
    Rule,
    categorical,
    continuous,
    format_rule,
    measure,
    parse_rule,
)

schema = FeatureSchema(
    (
        continuous("credit_amount", 0.0, 10000.0),
        continuous("savings", 0.0, 5000.0),
        categorical("housing", ("own", "rent", "free")),
    ),
    target_name="decision",
)

rng = np.random.default_rng(0)
rows, labels = [], []
for _ in range(400):
    amount = float(rng.uniform(0, 10000))
    savings = float(rng.uniform(0, 5000))
    housing = ("own", "rent", "free")[rng.integers(0, 3)]
    # the "true" process: big loans without savings get rejected
    labels.append(int(amount > 4000 and savings < 1500))
    rows.append((amount, savings, housing))
data = LabeledDataset(schema, rows, labels)

print("== parsing and formatting ==")
text = "credit_amount > 4000, savings <= 1500, housing = rent -> decision = 1"
rule = parse_rule(text, schema)
print("parsed:   ", text)
print("canonical:", format_rule(rule))
assert parse_rule(format_rule(rule), schema) == rule

print()
print("== coverage and measures ==")
for candidate in [
    rule,
    Rule(Premise(schema, [NumericInterval("credit_amount", 4000.0, np.inf, False, False)]), 1),
    Rule(Premise(schema, [CategoricalEq("housing", "own")]), 1),
]:
    m = measure(candidate, data)
    print(f"rule: {format_rule(candidate)}")
    print(
        f"  support={m.support:.3f} coverage={m.coverage:.3f} "
        f"confidence={m.confidence if m.confidence is None else round(m.confidence, 3)} "
        f"lift={m.lift if m.lift is None else round(m.lift, 2)} "
        f"mi={m.mi_score if m.mi_score is None else round(m.mi_score, 3)} "
        f"p={m.p_value:.2e}"
    )

print()
print("== inter-feature constraints ==")
linear = Rule(
    Premise(
        schema,
        [LinearConstraint((("credit_amount", 1.0), ("savings", -2.0)), ">", 1000.0)],
    ),
    1,
)
m = measure(linear, data)
print(f"rule: {format_rule(linear)}")
print(f"  confidence={m.confidence:.3f} on {m.coverage:.0%} of records")

probe = Record(schema, (5200.0, 700.0, "rent"))
print()
print(f"probe record {probe.values} is covered by the parsed rule:",
      format_rule(rule).split(' ->')[0])
