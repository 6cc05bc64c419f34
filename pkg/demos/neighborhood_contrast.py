"""Uniform vs. genetic neighborhood generation around one instance.

The genetic strategy concentrates samples near the instance and on both
sides of the decision boundary; uniform sampling spreads them over the
whole feature space. Prints distance statistics and, when matplotlib is
available, saves a scatter comparison to neighborhood_contrast.png.

Run: python3 demos/neighborhood_contrast.py
"""

import numpy as np

from rulelens import (
    FeatureSchema,
    NeighborhoodConfig,
    Record,
    ThresholdOracle,
    continuous,
    gen_genetic,
    gen_uniform,
    mixed_distance,
)

schema = FeatureSchema((continuous("x1", 0.0, 1.0), continuous("x2", 0.0, 1.0)))
oracle = ThresholdOracle(schema, "x1", 0.5)
x = Record(schema, (0.3, 0.6))

cfg = NeighborhoodConfig(size=800, method="genetic", population_size=400,
                         generations=15, rng_seed=3)
genetic = gen_genetic(x, schema, cfg, oracle)
uniform = gen_uniform(x, schema, cfg, oracle)

for name, neigh in (("uniform", uniform), ("genetic", genetic)):
    d = mixed_distance(x.encoded(), neigh.matrix[:-1], schema)
    print(
        f"{name:8s} mean distance to instance: {d.mean():.3f}   "
        f"class balance: {neigh.class_balance:.2f}"
    )

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not installed; skipping the scatter plot")
else:
    fig, axes = plt.subplots(1, 2, figsize=(10, 5), sharex=True, sharey=True)
    for ax, (name, neigh) in zip(axes, (("uniform", uniform), ("genetic", genetic))):
        Z = neigh.matrix[:-1]
        lab = neigh.labels[:-1]
        ax.scatter(Z[lab == 0, 0], Z[lab == 0, 1], s=6, c="tab:purple", label="class 0")
        ax.scatter(Z[lab == 1, 0], Z[lab == 1, 1], s=6, c="tab:green", label="class 1")
        ax.plot([0.5, 0.5], [0, 1], "k--", lw=1)
        ax.plot([x.values[0]], [x.values[1]], "r*", markersize=15, label="instance")
        ax.set_title(f"{name} generation")
        ax.set_xlabel("x1")
    axes[0].set_ylabel("x2")
    axes[0].legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig("neighborhood_contrast.png", dpi=120)
    print("wrote neighborhood_contrast.png")
