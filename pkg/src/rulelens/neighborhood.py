"""Synthetic neighborhoods around an instance, labeled by the black box.

Two generation strategies: plain uniform sampling over the schema (the
baseline) and a genetic search that breeds records close to the instance on
both sides of the black box's decision boundary, so the local dataset is
dense exactly where the surrogate needs signal.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .blackbox import CachingOracle, Oracle
from .dataset import FeatureSchema, Record
from .seeding import spawn_rng

UNIFORM = "uniform"
GENETIC = "genetic"

LOCALLY_CONSTANT = "locally constant black box"


@dataclass(frozen=True)
class NeighborhoodConfig:
    """Size, strategy and genetic-search parameters for one neighborhood.

    ``size`` counts synthetic records; the instance itself is appended on
    top. Defaults keep one explanation within roughly 2e4 oracle queries.
    """

    size: int = 1000
    method: str = GENETIC
    population_size: int = 500
    generations: int = 20
    crossover_prob: float = 0.7
    mutation_prob: float = 0.2
    elitism_count: int = 5
    rng_seed: int = 0

    def __post_init__(self):
        if self.size < 10:
            raise ValueError("neighborhood size must be at least 10")
        if self.method not in (UNIFORM, GENETIC):
            raise ValueError(f"unknown neighborhood method {self.method!r}")
        for p in (self.crossover_prob, self.mutation_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.population_size < self.elitism_count:
            raise ValueError("population_size must be >= elitism_count")
        if self.population_size < 1 or self.generations < 0:
            raise ValueError("bad genetic-search parameters")

    def with_seed(self, seed: int) -> "NeighborhoodConfig":
        return replace(self, rng_seed=int(seed))


class Neighborhood:
    """Synthetic records plus oracle labels around one instance.

    The instance appears exactly once, as the last row. ``matrix`` is the
    encoded record block; ``records`` materialises value tuples on demand.
    """

    def __init__(self, schema, matrix, labels, origin: Record, origin_label: int, warning=None):
        self.schema = schema
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.origin = origin
        self.origin_label = int(origin_label)
        self.warning = warning
        self._records = None

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def class_balance(self) -> float:
        """Fraction of records sharing the instance's black-box label."""
        return float(np.mean(self.labels == self.origin_label))

    @property
    def records(self) -> tuple[Record, ...]:
        if self._records is None:
            self._records = tuple(
                Record(self.schema, self.schema.decode(row)) for row in self.matrix
            )
        return self._records


def mixed_distance(x_row: np.ndarray, Z: np.ndarray, schema: FeatureSchema) -> np.ndarray:
    """Mean per-feature distance: 0/1 mismatch for categoricals, range-scaled
    absolute difference (clipped to 1) for continuous features."""
    Z = np.atleast_2d(Z)
    cat = schema.kinds_mask
    spans = np.array([f.span if not f.is_categorical else 1.0 for f in schema.features])
    spans = np.where(spans > 0, spans, 1.0)
    diff = np.abs(Z - x_row)
    cont_d = np.minimum(diff / spans, 1.0)
    cat_d = (Z != x_row).astype(np.float64)
    per_feature = np.where(cat, cat_d, cont_d)
    return per_feature.mean(axis=1)


def _sample_uniform(schema: FeatureSchema, n: int, rng: np.random.Generator) -> np.ndarray:
    Z = np.empty((n, len(schema)), dtype=np.float64)
    for j, f in enumerate(schema.features):
        if f.is_categorical:
            Z[:, j] = rng.integers(0, len(f.values), size=n)
        else:
            Z[:, j] = rng.uniform(f.lo, f.hi, size=n)
    return Z


def gen_uniform(
    x: Record, schema: FeatureSchema, cfg: NeighborhoodConfig, oracle: Oracle
) -> Neighborhood:
    """I.i.d. uniform sampling over the schema, labeled by the oracle."""
    rng = spawn_rng(cfg.rng_seed, "uniform")
    x_row = x.encoded()
    y_x = int(oracle.predict_encoded(x_row[None, :])[0])
    Z = _sample_uniform(schema, cfg.size, rng)
    labels = oracle.predict_encoded(Z)
    matrix = np.vstack([Z, x_row[None, :]])
    all_labels = np.concatenate([labels, [y_x]])
    return Neighborhood(schema, matrix, all_labels, x, y_x)


def _mutate(Z, schema, cfg, rng):
    n, m = Z.shape
    mask = rng.random((n, m)) < cfg.mutation_prob
    jitter = rng.normal(0.0, 1.0, size=(n, m))
    out = Z.copy()
    for j, f in enumerate(schema.features):
        if f.is_categorical:
            resampled = rng.integers(0, len(f.values), size=n).astype(np.float64)
            out[:, j] = np.where(mask[:, j], resampled, out[:, j])
        else:
            sigma = 0.05 * f.span
            moved = np.clip(out[:, j] + jitter[:, j] * sigma, f.lo, f.hi)
            out[:, j] = np.where(mask[:, j], moved, out[:, j])
    return out


def _evolve(x_row, y_x, want_same, schema, cfg, oracle, rng, fitness_trace=None):
    """One genetic population: tournament of 3, per-feature crossover and
    mutation, elitism. Fitness rewards the wanted label and proximity to the
    instance, and penalises exact clones of it.

    The population starts uniform over the schema so the cross-boundary
    population can find the other class even far from the instance; selection
    then drags survivors toward the instance.
    """
    P = cfg.population_size
    pop = _sample_uniform(schema, P, rng)
    labels = oracle.predict_encoded(pop)

    def fitness(Z, lab):
        hit = (lab == y_x) if want_same else (lab != y_x)
        clone = np.all(Z == x_row, axis=1)
        return hit.astype(np.float64) + (1.0 - mixed_distance(x_row, Z, schema)) - clone

    fit = fitness(pop, labels)
    if fitness_trace is not None:
        fitness_trace.append(float(fit.max()))
    for _ in range(cfg.generations):
        elite = np.argsort(-fit, kind="stable")[: cfg.elitism_count]
        n_children = P - len(elite)
        picks = rng.integers(0, P, size=(n_children, 2, 3))
        winners = np.argmax(fit[picks], axis=2)
        parents = np.take_along_axis(picks, winners[..., None], axis=2)[..., 0]
        pa = pop[parents[:, 0]]
        pb = pop[parents[:, 1]]
        take_b = rng.random((n_children, pop.shape[1])) < cfg.crossover_prob
        children = _mutate(np.where(take_b, pb, pa), schema, cfg, rng)
        pop = np.vstack([pop[elite], children])
        labels = oracle.predict_encoded(pop)
        fit = fitness(pop, labels)
        if fitness_trace is not None:
            fitness_trace.append(float(fit.max()))
    return pop, labels


def _resize(pop, labels, k):
    idx = np.arange(k) % len(pop)
    return pop[idx], labels[idx]


def gen_genetic(
    x: Record, schema: FeatureSchema, cfg: NeighborhoodConfig, oracle: Oracle
) -> Neighborhood:
    """Two genetic populations: one kept on the instance's side of the
    boundary, one pushed across it; the neighborhood is their union plus the
    instance. Oracle queries are memoised for the duration of the run."""
    rng = spawn_rng(cfg.rng_seed, "genetic")
    cached = CachingOracle(oracle)
    x_row = x.encoded()
    y_x = int(cached.predict_encoded(x_row[None, :])[0])

    half_same = cfg.size - cfg.size // 2
    half_diff = cfg.size // 2
    pop_same, lab_same = _evolve(x_row, y_x, True, schema, cfg, cached, rng)
    pop_diff, lab_diff = _evolve(x_row, y_x, False, schema, cfg, cached, rng)

    warning = None
    if not np.any(lab_diff != y_x):
        warning = LOCALLY_CONSTANT
        warnings.warn(LOCALLY_CONSTANT, stacklevel=2)

    pop_same, lab_same = _resize(pop_same, lab_same, half_same)
    pop_diff, lab_diff = _resize(pop_diff, lab_diff, half_diff)
    matrix = np.vstack([pop_same, pop_diff, x_row[None, :]])
    labels = np.concatenate([lab_same, lab_diff, [y_x]])
    return Neighborhood(schema, matrix, labels, x, y_x, warning=warning)


def generate(
    x: Record, schema: FeatureSchema, cfg: NeighborhoodConfig, oracle: Oracle
) -> Neighborhood:
    """Dispatch on ``cfg.method``."""
    if cfg.method == UNIFORM:
        return gen_uniform(x, schema, cfg, oracle)
    return gen_genetic(x, schema, cfg, oracle)
