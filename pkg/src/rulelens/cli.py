"""Command-line orchestration.

Subcommands: train, explain, explain-all, globalize, evaluate, export-dot.
All randomness flows from --seed (mandatory): per-instance neighborhoods
derive their generators from the seed plus the record's content, so any
fixed seed makes every file output byte-deterministic. Wall-clock timing
goes to stdout only, never into a file.
"""

from __future__ import annotations

import argparse
import contextlib
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .blackbox import (
    CountingOracle,
    ExternalEndpoint,
    connect_external,
    relabel,
    train_forest,
)
from .dataset import Record
from .io import load_dataset, load_rules_file, write_text
from .local2global import (
    build_dendrogram,
    dedupe_explanations,
    dendrogram_dot,
    evaluate_cuts,
    explain_dataset,
    fidelity,
    format_global,
    majority_class,
    select_cut,
    RuleVoter,
)
from .neighborhood import NeighborhoodConfig
from .rules import premise_mask
from .ruletext import format_rule
from .seeding import derive_seed, spawn_rng
from .surrogate import explain, format_explanation

CONFIG_ALIASES = {
    "neigh.size": "size",
    "neigh.method": "neigh",
    "ga.population_size": "population",
    "ga.generations": "generations",
    "ga.crossover_prob": "crossover_prob",
    "ga.mutation_prob": "mutation_prob",
    "ga.elitism_count": "elitism",
}

DEFAULTS = {
    "neigh": "genetic",
    "size": 1000,
    "jobs": 1,
    "trees": 100,
    "forest_depth": 16,
    "min_leaf": 5,
    "surrogate_depth": 8,
    "population": 500,
    "generations": 20,
    "crossover_prob": 0.7,
    "mutation_prob": 0.2,
    "elitism": 5,
    "out": "rulelens-out",
}

INT_KEYS = {"seed", "size", "jobs", "trees", "forest_depth", "min_leaf",
            "surrogate_depth", "population", "generations", "elitism", "index"}
FLOAT_KEYS = {"crossover_prob", "mutation_prob"}


@dataclass
class RunConfig:
    data: str
    schema: str
    oracle: str
    seed: int
    neigh: str
    size: int
    out: str
    jobs: int
    trees: int
    forest_depth: int
    min_leaf: int
    surrogate_depth: int
    population: int
    generations: int
    crossover_prob: float
    mutation_prob: float
    elitism: int

    def neighborhood_config(self) -> NeighborhoodConfig:
        return NeighborhoodConfig(
            size=self.size,
            method=self.neigh,
            population_size=self.population,
            generations=self.generations,
            crossover_prob=self.crossover_prob,
            mutation_prob=self.mutation_prob,
            elitism_count=self.elitism,
            rng_seed=self.seed,
        )


def load_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SystemExit(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = CONFIG_ALIASES.get(key.strip(), key.strip())
        values[key] = value.strip()
    return values


def _coerce(key, value):
    if value is None or not isinstance(value, str):
        return value
    if key in INT_KEYS:
        return int(value)
    if key in FLOAT_KEYS:
        return float(value)
    return value


def resolve_config(args) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    merged = dict(DEFAULTS)
    merged.update(file_values)
    for key in RunConfig.__dataclass_fields__:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    for key in ("data", "schema", "oracle", "seed"):
        if merged.get(key) is None:
            raise SystemExit(f"missing required option --{key} (flag or config file)")
    fields = {k: _coerce(k, merged.get(k)) for k in RunConfig.__dataclass_fields__}
    return RunConfig(**fields)


def build_oracle(cfg: RunConfig, data):
    if cfg.oracle == "builtin":
        inner = train_forest(data, n_trees=cfg.trees, max_depth=cfg.forest_depth, seed=cfg.seed)
    else:
        endpoint = ExternalEndpoint.parse(cfg.oracle)
        inner = connect_external(endpoint, data.schema)
    return CountingOracle(inner)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _kv_report(pairs) -> str:
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def _fmt(value) -> str:
    return repr(float(value))


# --- subcommands -----------------------------------------------------------

def cmd_train(cfg: RunConfig) -> int:
    data = load_dataset(cfg.data, cfg.schema)
    rng = spawn_rng(cfg.seed, "holdout")
    n = len(data)
    order = rng.permutation(n)
    cut = max(1, int(0.8 * n))
    train_idx, hold_idx = order[:cut], order[cut:]

    def subset(idx):
        return type(data)(data.schema, [data.records[i] for i in idx], data.labels[idx])
    forest = train_forest(subset(train_idx), n_trees=cfg.trees,
                          max_depth=cfg.forest_depth, seed=cfg.seed)
    train_acc = float(np.mean(forest.predict_encoded(subset(train_idx).matrix)
                              == data.labels[train_idx]))
    if len(hold_idx):
        hold_acc = float(np.mean(forest.predict_encoded(subset(hold_idx).matrix)
                                 == data.labels[hold_idx]))
    else:
        hold_acc = float("nan")
    out = _out_dir(cfg)
    write_text(out / "forest.txt", forest.dumps())
    report = _kv_report(
        [
            ("n_records", n),
            ("n_train", len(train_idx)),
            ("n_holdout", len(hold_idx)),
            ("n_trees", cfg.trees),
            ("max_depth", cfg.forest_depth),
            ("seed", cfg.seed),
            ("train_accuracy", _fmt(train_acc)),
            ("holdout_accuracy", _fmt(hold_acc)),
        ]
    )
    write_text(out / "train_report.txt", report)
    sys.stdout.write(report)
    return 0


def _resolve_instance(cfg: RunConfig, args, data) -> Record:
    if args.record is not None:
        values = []
        parts = args.record.split(",")
        if len(parts) != len(data.schema):
            raise SystemExit(
                f"--record needs {len(data.schema)} comma-separated values, got {len(parts)}"
            )
        for part, feat in zip(parts, data.schema.features):
            values.append(part.strip() if feat.is_categorical else float(part))
        return Record(data.schema, tuple(values))
    if args.index is None:
        raise SystemExit("explain needs --index or --record")
    idx = int(args.index)
    if not 0 <= idx < len(data):
        raise SystemExit(f"--index {idx} out of range (dataset has {len(data)} records)")
    return data.records[idx]


def cmd_explain(cfg: RunConfig, args) -> int:
    data = load_dataset(cfg.data, cfg.schema)
    oracle = build_oracle(cfg, data)
    with contextlib.closing(oracle):
        return _cmd_explain(cfg, args, data, oracle)


def _cmd_explain(cfg: RunConfig, args, data, oracle) -> int:
    x = _resolve_instance(cfg, args, data)
    ncfg = cfg.neighborhood_config()
    sub = ncfg.with_seed(derive_seed(cfg.seed, "explain", x.key()))
    explanation = explain(oracle, x, sub, min_leaf=cfg.min_leaf, max_depth=cfg.surrogate_depth)
    dump = format_explanation(explanation) + "\n"
    sys.stdout.write(dump)
    if cfg.out:
        write_text(_out_dir(cfg) / "explanation.txt", dump)
    return 0


def cmd_explain_all(cfg: RunConfig) -> int:
    data = load_dataset(cfg.data, cfg.schema)
    oracle = build_oracle(cfg, data)
    with contextlib.closing(oracle):
        return _cmd_explain_all(cfg, data, oracle)


def _cmd_explain_all(cfg: RunConfig, data, oracle) -> int:
    relabeled = relabel(oracle, data)
    explanations = explain_dataset(
        oracle, relabeled, cfg.neighborhood_config(),
        min_leaf=cfg.min_leaf, max_depth=cfg.surrogate_depth, jobs=cfg.jobs,
    )
    sections = []
    for i, e in enumerate(explanations):
        sections.append(f"## record {i}\n{format_explanation(e)}\n")
    content = "\n".join(sections)
    write_text(_out_dir(cfg) / "explanations.txt", content)
    sys.stdout.write(f"explained {len(explanations)} records "
                     f"({oracle.n_queries} oracle queries)\n")
    return 0


def _evaluate_rules(rules, relabeled):
    default = majority_class(relabeled.labels)
    fid = fidelity(rules, default, relabeled)
    covered = np.zeros(len(relabeled), dtype=bool)
    for r in rules:
        covered |= premise_mask(r.premise, relabeled)
    return {
        "rules": len(rules),
        "predicates": sum(len(r.premise) for r in rules),
        "fidelity": fid,
        "coverage": float(covered.mean()),
        "default_class": default,
    }


def cmd_globalize(cfg: RunConfig, make_plots: bool = False) -> int:
    started = time.perf_counter()
    data = load_dataset(cfg.data, cfg.schema)
    oracle = build_oracle(cfg, data)
    with contextlib.closing(oracle):
        return _cmd_globalize(cfg, make_plots, started, data, oracle)


def _cmd_globalize(cfg: RunConfig, make_plots, started, data, oracle) -> int:
    relabeled = relabel(oracle, data)

    explanations = explain_dataset(
        oracle, relabeled, cfg.neighborhood_config(),
        min_leaf=cfg.min_leaf, max_depth=cfg.surrogate_depth, jobs=cfg.jobs,
    )
    kept = dedupe_explanations(explanations)
    n_unfaithful = sum(1 for e in explanations if e.unfaithful_at_x)
    if not kept:
        raise SystemExit("no faithful local explanations to aggregate")
    local_rules = [e.factual for e in kept]

    dendro = build_dendrogram(local_rules, relabeled)
    cuts = evaluate_cuts(dendro, relabeled)
    selected = select_cut(dendro, relabeled)

    default = majority_class(relabeled.labels)
    local_voter = RuleVoter(local_rules, relabeled)
    local_fid = float(np.mean(local_voter.predict(default) == relabeled.labels))
    local_q = local_voter.quality(relabeled.labels)

    out = _out_dir(cfg)
    all_local_header = (
        f"# q={local_q!r} fidelity={local_fid!r} k={len(local_rules)} default={default}"
    )
    write_text(
        out / "all_local.rules",
        "\n".join([all_local_header] + [format_rule(r) for r in local_rules]) + "\n",
    )
    write_text(out / "global.rules", format_global(selected))
    write_text(out / "dendrogram.dot", dendrogram_dot(dendro))
    cut_lines = ["height,rules,q,fidelity"]
    for c in cuts:
        cut_lines.append(f"{c.height!r},{c.n_rules},{c.q!r},{c.fidelity!r}")
    write_text(out / "cuts.csv", "\n".join(cut_lines) + "\n")

    n_distinct = len({r.key() for r in relabeled.records})
    metrics = _kv_report(
        [
            ("n_records", len(relabeled)),
            ("n_distinct_records", n_distinct),
            ("n_explanations", len(explanations)),
            ("n_unfaithful_excluded", n_unfaithful),
            ("all_local_rules", len(local_rules)),
            ("selected_rules", selected.n_rules),
            ("selected_predicates", selected.n_predicates),
            ("all_local_fidelity", _fmt(local_fid)),
            ("selected_fidelity", _fmt(selected.fidelity)),
            ("all_local_q", _fmt(local_q)),
            ("selected_q", _fmt(selected.q_score)),
            ("selected_cut_height", _fmt(selected.cut_height)),
            ("default_class", default),
            ("oracle_queries", oracle.n_queries),
        ]
    )
    write_text(out / "metrics.txt", metrics)

    wall = time.perf_counter() - started
    sys.stdout.write(metrics)
    sys.stdout.write(f"wall_clock_seconds = {wall:.3f}\n")

    if make_plots:
        _emit_plots(out, dendro, cuts)
    return 0


def _emit_plots(out: Path, dendro, cuts) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        sys.stderr.write("plots skipped: matplotlib is not installed\n")
        return

    fig, ax = plt.subplots(figsize=(8, 5))
    finite = [c for c in cuts if np.isfinite(c.height)]
    ax.plot([c.n_rules for c in finite], [c.fidelity for c in finite], "o-")
    ax.set_xlabel("rules in cut")
    ax.set_ylabel("fidelity")
    ax.set_title("fidelity vs. rule count across dendrogram cuts")
    fig.savefig(out / "fidelity_vs_k.png", dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(10, 6))
    y_slot = [0]

    def draw(node, depth):
        if node.is_leaf:
            y = y_slot[0]
            y_slot[0] += 1
            ax.plot([0], [y], "k.", markersize=3)
            return 0.0, y
        hl, yl = draw(node.left, depth + 1)
        hr, yr = draw(node.right, depth + 1)
        h = node.height
        ax.plot([hl, h], [yl, yl], "b-", lw=0.8)
        ax.plot([hr, h], [yr, yr], "b-", lw=0.8)
        ax.plot([h, h], [yl, yr], "b-", lw=0.8)
        return h, (yl + yr) / 2.0

    for root in dendro.roots:
        draw(root, 0)
        y_slot[0] += 2
    ax.set_xlabel("merge height (Jaccard distance)")
    ax.set_yticks([])
    ax.set_title("dendrogram of local explanations")
    fig.savefig(out / "dendrogram.png", dpi=120)
    plt.close(fig)


def cmd_evaluate(cfg: RunConfig, rules_path: str) -> int:
    data = load_dataset(cfg.data, cfg.schema)
    oracle = build_oracle(cfg, data)
    with contextlib.closing(oracle):
        return _cmd_evaluate(cfg, rules_path, data, oracle)


def _cmd_evaluate(cfg: RunConfig, rules_path: str, data, oracle) -> int:
    relabeled = relabel(oracle, data)
    rules = load_rules_file(rules_path, relabeled.schema)
    if not rules:
        raise SystemExit(f"{rules_path}: no rules to evaluate")
    stats = _evaluate_rules(rules, relabeled)
    report = _kv_report(
        [
            ("rules", stats["rules"]),
            ("predicates", stats["predicates"]),
            ("fidelity", _fmt(stats["fidelity"])),
            ("coverage", _fmt(stats["coverage"])),
            ("default_class", stats["default_class"]),
        ]
    )
    sys.stdout.write(report)
    if cfg.out:
        write_text(_out_dir(cfg) / "evaluation.txt", report)
    return 0


def cmd_export_dot(cfg: RunConfig) -> int:
    data = load_dataset(cfg.data, cfg.schema)
    oracle = build_oracle(cfg, data)
    with contextlib.closing(oracle):
        return _cmd_export_dot(cfg, data, oracle)


def _cmd_export_dot(cfg: RunConfig, data, oracle) -> int:
    relabeled = relabel(oracle, data)
    kept = dedupe_explanations(
        explain_dataset(
            oracle, relabeled, cfg.neighborhood_config(),
            min_leaf=cfg.min_leaf, max_depth=cfg.surrogate_depth, jobs=cfg.jobs,
        )
    )
    if not kept:
        raise SystemExit("no faithful local explanations to aggregate")
    dendro = build_dendrogram([e.factual for e in kept], relabeled)
    write_text(_out_dir(cfg) / "dendrogram.dot", dendrogram_dot(dendro))
    sys.stdout.write(f"wrote dendrogram with {dendro.n_leaves} leaves\n")
    return 0


# --- argument parsing ---------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--config", help="flat key = value file mirroring the flags")
    sp.add_argument("--data", help="dataset CSV (features plus one label column)")
    sp.add_argument("--schema", help="sidecar schema file (name\\tc|n[\\tvalues])")
    sp.add_argument("--oracle", help="builtin | tcp:<host:port> | cmd:<argv>")
    sp.add_argument("--seed", type=int, help="master seed (required)")
    sp.add_argument("--neigh", choices=["uniform", "genetic"], help="neighborhood strategy")
    sp.add_argument("--size", type=int, help="neighborhood size")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--jobs", type=int, help="parallel explanation workers")
    sp.add_argument("--trees", type=int, help="builtin forest size")
    sp.add_argument("--forest-depth", dest="forest_depth", type=int)
    sp.add_argument("--min-leaf", dest="min_leaf", type=int, help="surrogate min leaf size")
    sp.add_argument("--surrogate-depth", dest="surrogate_depth", type=int)
    sp.add_argument("--population", type=int, help="genetic population size")
    sp.add_argument("--generations", type=int)
    sp.add_argument("--crossover-prob", dest="crossover_prob", type=float)
    sp.add_argument("--mutation-prob", dest="mutation_prob", type=float)
    sp.add_argument("--elitism", type=int)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rulelens",
        description="local-to-global rule explanations for black-box classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in [
        ("train", "train the builtin forest and report accuracy"),
        ("explain", "explain one instance"),
        ("explain-all", "explain every dataset record"),
        ("globalize", "build the global explanation from all local ones"),
        ("evaluate", "score a rules file against the black box"),
        ("export-dot", "emit the dendrogram as DOT"),
    ]:
        sp = sub.add_parser(name, help=helptext)
        _add_common(sp)
        if name == "explain":
            sp.add_argument("--index", type=int, help="record index to explain")
            sp.add_argument("--record", help="inline record: comma-separated values")
        if name == "globalize":
            sp.add_argument("--plots", action="store_true", help="emit PNG plots")
        if name == "evaluate":
            sp.add_argument("--rules", required=True, help="rule file to evaluate")

    args = parser.parse_args(argv)
    cfg = resolve_config(args)
    if args.command == "train":
        return cmd_train(cfg)
    if args.command == "explain":
        return cmd_explain(cfg, args)
    if args.command == "explain-all":
        return cmd_explain_all(cfg)
    if args.command == "globalize":
        return cmd_globalize(cfg, make_plots=args.plots)
    if args.command == "evaluate":
        return cmd_evaluate(cfg, args.rules)
    if args.command == "export-dot":
        return cmd_export_dot(cfg)
    raise SystemExit(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
