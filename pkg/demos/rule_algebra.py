"""Rule algebra: merging, affine generalisation, background composition.

Run: python3 demos/rule_algebra.py
"""

import numpy as np

from rulelens import (
    BackgroundRule,
    CategoricalEq,
    FeatureSchema,
    LabeledDataset,
    NumericInterval,
    Premise,
    Rule,
    affine_generalize,
    categorical,
    compose_background,
    continuous,
    format_param_rule,
    format_rule,
    merge,
    param_instantiate,
    subsumes,
)

INF = float("inf")

balances = FeatureSchema(
    (
        continuous("CreditBalance", 0.0, 1000.0),
        continuous("CheckingBalance", 0.0, 1000.0),
    ),
    target_name="Credit",
    class_names=("no", "yes"),
)


def upper(feature, t):
    return NumericInterval(feature, -INF, t, False, True)


r1 = Rule(Premise(balances, [upper("CreditBalance", 200.0), upper("CheckingBalance", 300.0)]), 0)
r2 = Rule(Premise(balances, [upper("CreditBalance", 300.0), upper("CheckingBalance", 200.0)]), 0)

print("== merge: the minimal syntactic generalisation ==")
print("r1:", format_rule(r1))
print("r2:", format_rule(r2))
merged = merge(r1, r2)
print("merge(r1, r2):", format_rule(merged))
print("merged subsumes r1:", subsumes(merged.premise, r1.premise).subsumes)
print("merged subsumes r2:", subsumes(merged.premise, r2.premise).subsumes)

print()
print("== affine generalisation: the bounds trade off through a parameter ==")
param = affine_generalize(r1, r2)
print("param rule:", format_param_rule(param))
for a in (200.0, 250.0, 300.0):
    print(f"  a={a:<6}", format_rule(param_instantiate(param, a)))

print()
print("== composing a decision rule with background knowledge ==")
delivery = FeatureSchema(
    (
        categorical("zip", ("02139", "60629")),
        categorical("minority_neighborhood", ("yes", "no")),
    ),
    target_name="free_delivery",
    class_names=("no", "yes"),
)
rng = np.random.default_rng(5)
rows, labels = [], []
for _ in range(500):
    zip_code = "60629" if rng.random() < 0.4 else "02139"
    minority = "yes" if (zip_code == "60629" or rng.random() < 0.1) else "no"
    gets_delivery = int(zip_code != "60629" and rng.random() < 0.9)
    rows.append((zip_code, minority))
    labels.append(gets_delivery)
data = LabeledDataset(delivery, rows, labels)

decision = Rule(Premise(delivery, [CategoricalEq("zip", "60629")]), 0)
background = BackgroundRule(
    Premise(delivery, [CategoricalEq("zip", "60629")]),
    Premise(delivery, [CategoricalEq("minority_neighborhood", "yes")]),
)
lifted, bound = compose_background(decision, background, data)
print("observed decision rule:  ", format_rule(decision))
print("background knowledge:    zip = 60629 implies minority_neighborhood = yes")
print("lifted rule:             ", format_rule(lifted))
print(f"confidence lower bound:   {bound:.3f} (from record counts alone)")
