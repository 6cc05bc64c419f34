import numpy as np
import pytest

from rulelens import FeatureSchema, LabeledDataset, Record, categorical, continuous


@pytest.fixture
def credit_schema():
    """Mixed schema shaped like a small credit-scoring table."""
    return FeatureSchema(
        (
            continuous("credit_amount", 0.0, 20000.0),
            continuous("duration_in_month", 0.0, 72.0),
            categorical("housing", ("own", "rent", "free")),
            categorical("other_debtors", ("none", "guarantor", "co-applicant")),
            categorical("credit_history", ("critical account", "all paid back", "delay")),
        ),
        target_name="decision",
    )


@pytest.fixture
def balance_schema():
    """Continuous-only schema for the balance-style rule examples."""
    return FeatureSchema(
        (
            continuous("CreditBalance", 0.0, 1000.0),
            continuous("SavingBalance", 0.0, 1000.0),
            continuous("CheckingBalance", 0.0, 1000.0),
        ),
        target_name="Credit",
        class_names=("no", "yes"),
    )


def make_random_dataset(schema, n, rng, labels=None):
    rows = []
    for _ in range(n):
        values = []
        for f in schema.features:
            if f.is_categorical:
                values.append(f.values[rng.integers(0, len(f.values))])
            else:
                values.append(float(rng.uniform(f.lo, f.hi)))
        rows.append(tuple(values))
    if labels is None:
        labels = rng.integers(0, 2, size=n)
    return LabeledDataset(schema, rows, labels)


def make_random_premise(schema, rng, max_preds=3):
    from rulelens import CategoricalEq, NumericInterval, Premise

    preds = []
    n_preds = int(rng.integers(0, max_preds + 1))
    feats = list(rng.permutation(len(schema.features))[:n_preds])
    for j in feats:
        f = schema.features[int(j)]
        if f.is_categorical:
            preds.append(CategoricalEq(f.name, f.values[rng.integers(0, len(f.values))]))
        else:
            a, b = sorted(rng.uniform(f.lo, f.hi, size=2))
            shape = rng.integers(0, 4)
            if shape == 0:
                preds.append(NumericInterval(f.name, -np.inf, b, False, True))
            elif shape == 1:
                preds.append(NumericInterval(f.name, a, np.inf, True, False))
            elif shape == 2:
                preds.append(NumericInterval(f.name, a, b, True, True))
            else:
                preds.append(NumericInterval(f.name, a, b, False, True))
    return Premise(schema, preds)


def make_random_rule(schema, rng, max_preds=3, consequent=None):
    from rulelens import Rule

    premise = make_random_premise(schema, rng, max_preds)
    if consequent is None:
        consequent = int(rng.integers(0, 2))
    return Rule(premise, consequent)


@pytest.fixture
def random_rule_factory():
    return make_random_rule


@pytest.fixture
def random_dataset_factory():
    return make_random_dataset
