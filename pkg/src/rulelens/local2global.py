"""Bottom-up composition of local explanations into a compact global rule set.

The pipeline: explain every training record, drop duplicates, build one
dendrogram per consequent class by repeatedly merging the closest pair of
rules (Jaccard distance over covered records), enumerate horizontal cuts,
score each cut with a BIC-style quality (CPAR weighted voting supplies the
likelihood, rule count the complexity) and keep the maximiser.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .algebra import merge
from .blackbox import Oracle
from .dataset import LabeledDataset, Record
from .neighborhood import NeighborhoodConfig
from .rules import Rule, premise_mask, premise_mask_matrix
from .ruletext import format_rule
from .seeding import derive_seed
from .surrogate import DEFAULT_MAX_DEPTH, DEFAULT_MIN_LEAF, Explanation, explain

TOP_K = 5

ALL_LEAVES_HEIGHT = -1.0
ALL_ROOTS_HEIGHT = math.inf


def majority_class(labels) -> int:
    """Majority label, ties resolving to class 0."""
    labels = np.asarray(labels)
    n1 = int((labels == 1).sum())
    return 1 if n1 > len(labels) - n1 else 0


# --- local explanation collection -------------------------------------------

def explain_dataset(
    oracle: Oracle,
    data: LabeledDataset,
    cfg: NeighborhoodConfig,
    min_leaf: int = DEFAULT_MIN_LEAF,
    max_depth: int = DEFAULT_MAX_DEPTH,
    jobs: int = 1,
) -> list[Explanation]:
    """One explanation per record (memoised by record content).

    Each instance's neighborhood seed derives from ``cfg.rng_seed`` plus the
    record's value content, so identical records share one explanation and
    results do not depend on dataset order or thread scheduling.
    """
    distinct: dict[bytes, Record] = {}
    for r in data.records:
        distinct.setdefault(r.key(), r)

    def work(item):
        key, rec = item
        sub = cfg.with_seed(derive_seed(cfg.rng_seed, "explain", key))
        return key, explain(oracle, rec, sub, min_leaf=min_leaf, max_depth=max_depth)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            by_key = dict(pool.map(work, distinct.items()))
    else:
        by_key = dict(map(work, distinct.items()))
    return [by_key[r.key()] for r in data.records]


def dedupe_explanations(
    explanations, include_unfaithful: bool = False
) -> list[Explanation]:
    """Drop duplicate factual rules (and, by default, unfaithful-at-x
    explanations); the survivors are sorted by canonical rule text."""
    seen: dict[str, Explanation] = {}
    for e in explanations:
        if e.unfaithful_at_x and not include_unfaithful:
            continue
        seen.setdefault(format_rule(e.factual), e)
    return [seen[text] for text in sorted(seen)]


def collect_local(
    oracle: Oracle,
    data: LabeledDataset,
    cfg: NeighborhoodConfig,
    min_leaf: int = DEFAULT_MIN_LEAF,
    max_depth: int = DEFAULT_MAX_DEPTH,
    jobs: int = 1,
) -> list[Explanation]:
    """Explain every record of (oracle-relabeled) ``data`` and dedupe."""
    return dedupe_explanations(
        explain_dataset(oracle, data, cfg, min_leaf=min_leaf, max_depth=max_depth, jobs=jobs)
    )


# --- dendrogram ---------------------------------------------------------------

def jaccard_distance(r1: Rule, r2: Rule, data: LabeledDataset) -> float:
    """1 - |cover1 & cover2| / |cover1 | cover2|; two empty covers count as
    disjoint (distance 1)."""
    return _jaccard(premise_mask(r1.premise, data), premise_mask(r2.premise, data))


def _jaccard(a: np.ndarray, b: np.ndarray) -> float:
    union = int(np.sum(a | b))
    if union == 0:
        return 1.0
    inter = int(np.sum(a & b))
    return 1.0 - inter / union


class DendroNode:
    """A rule in the merge tree: a local explanation at the leaves, a merged
    generalisation (recorded at its merge height) everywhere else."""

    __slots__ = ("rule", "height", "left", "right", "cover", "text", "node_id")

    def __init__(self, rule, height, left, right, cover, text, node_id):
        self.rule = rule
        self.height = height
        self.left = left
        self.right = right
        self.cover = cover
        self.text = text
        self.node_id = node_id

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def walk(self):
        """Preorder traversal, left child first."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)


@dataclass(frozen=True)
class Dendrogram:
    """Per-class merge trees over a fixed reference dataset."""

    roots: tuple[DendroNode, ...]
    leaves: tuple[DendroNode, ...]
    n_leaves: int
    ref_fingerprint: str

    def internal_heights(self) -> list[float]:
        heights = set()
        for root in self.roots:
            for node in root.walk():
                if not node.is_leaf:
                    heights.add(node.height)
        return sorted(heights)


def _pairwise_jaccard(covers: np.ndarray) -> np.ndarray:
    C = covers.astype(np.float64)
    inter = C @ C.T
    sizes = C.sum(axis=1)
    union = sizes[:, None] + sizes[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        d = 1.0 - inter / union
    d[union == 0] = 1.0
    return d


def _agglomerate(leaf_nodes: list[DendroNode], data: LabeledDataset, cls: int) -> DendroNode:
    n_rec = len(data)
    total = 2 * len(leaf_nodes) - 1
    nodes = list(leaf_nodes)
    covers = np.zeros((total, n_rec), dtype=bool)
    for i, node in enumerate(nodes):
        covers[i] = node.cover
    D = np.full((total, total), np.inf)
    k0 = len(leaf_nodes)
    D[:k0, :k0] = _pairwise_jaccard(covers[:k0])
    active = list(range(k0))

    step = 0
    while len(active) > 1:
        idx = np.array(active)
        sub = D[np.ix_(idx, idx)]
        upper = np.where(np.triu(np.ones(sub.shape, dtype=bool), k=1), sub, np.inf)
        dmin = upper.min()
        hits = [(int(idx[a]), int(idx[b])) for a, b in np.argwhere(upper == dmin)]
        i, j = min(hits, key=lambda p: (*sorted((nodes[p[0]].text, nodes[p[1]].text)), p))
        a, b = sorted((nodes[i], nodes[j]), key=lambda nd: (nd.text, nd.node_id))
        merged = merge(a.rule, b.rule)
        cover = premise_mask(merged.premise, data)
        node = DendroNode(
            merged, float(dmin), a, b, cover, format_rule(merged), f"c{cls}_m{step}"
        )
        k = len(nodes)
        nodes.append(node)
        covers[k] = cover
        active = [x for x in active if x not in (i, j)]
        if active:
            others = np.array(active)
            Co = covers[others].astype(np.float64)
            cv = cover.astype(np.float64)
            inter = Co @ cv
            union = Co.sum(axis=1) + cv.sum() - inter
            with np.errstate(invalid="ignore", divide="ignore"):
                drow = 1.0 - inter / union
            drow[union == 0] = 1.0
            D[k, others] = drow
            D[others, k] = drow
        active.append(k)
        step += 1
    return nodes[active[0]]


def build_dendrogram(rules, data: LabeledDataset) -> Dendrogram:
    """Greedy nearest-pair merging, one tree per consequent class.

    Distance ties break on the lexicographic order of the pair's canonical
    rule texts; merged rules get their cover sets recomputed from ``data``,
    so every internal node is a concrete rule subsuming its children.
    """
    rules = list(rules)
    if not rules:
        raise ValueError("cannot build a dendrogram from zero rules")
    roots = []
    leaves = []
    for cls in (0, 1):
        cls_rules = sorted(
            {format_rule(r): r for r in rules if r.consequent == cls}.items()
        )
        if not cls_rules:
            continue
        nodes = [
            DendroNode(
                rule, 0.0, None, None, premise_mask(rule.premise, data), text, f"c{cls}_l{i}"
            )
            for i, (text, rule) in enumerate(cls_rules)
        ]
        leaves.extend(nodes)
        roots.append(nodes[0] if len(nodes) == 1 else _agglomerate(nodes, data, cls))
    return Dendrogram(tuple(roots), tuple(leaves), len(leaves), data.fingerprint())


def cut_nodes(dendrogram: Dendrogram, height: float) -> list[DendroNode]:
    """Maximal nodes formed at or below ``height`` (leaves always qualify).

    Descending from each root guarantees the result partitions the leaves:
    every leaf has exactly one ancestor-or-self in the cut.
    """
    out = []
    for root in dendrogram.roots:
        stack = [root]
        while stack:
            node = stack.pop()
            if node.is_leaf or node.height <= height:
                out.append(node)
            else:
                stack.append(node.right)
                stack.append(node.left)
    return out


# --- CPAR voting and BIC quality ----------------------------------------------

class RuleVoter:
    """CPAR-style weighted voting bound to a reference dataset.

    Per class, covering rules are ranked by Laplace accuracy over the
    reference data and the best ``top_k`` vote; records no rule covers fall
    back to a class-frequency prior.
    """

    def __init__(self, rules, data: LabeledDataset, top_k: int = TOP_K, ref_covers=None):
        self.data = data
        self.top_k = top_k
        by_text: dict[str, tuple[Rule, np.ndarray | None]] = {}
        for pos, rule in enumerate(rules):
            text = format_rule(rule)
            if text not in by_text:
                cover = None if ref_covers is None else ref_covers[pos]
                by_text[text] = (rule, cover)
        self.n_rules = len(by_text)
        self._classes = {}
        for cls in (0, 1):
            entries = []
            for text, (rule, cover) in by_text.items():
                if rule.consequent != cls:
                    continue
                if cover is None:
                    cover = premise_mask(rule.premise, data)
                n_cov = int(cover.sum())
                n_ok = int(np.sum(cover & (data.labels == cls)))
                laplace = (n_ok + 1) / (n_cov + 2)
                entries.append((laplace, text, rule, cover))
            entries.sort(key=lambda e: (-e[0], e[1]))
            self._classes[cls] = (
                tuple(e[2] for e in entries),
                np.array([e[0] for e in entries], dtype=np.float64),
                np.array([e[3] for e in entries], dtype=bool).reshape(len(entries), len(data)),
            )

    def rules(self) -> tuple[Rule, ...]:
        return self._classes[0][0] + self._classes[1][0]

    def _class_votes(self, cls: int, X: np.ndarray | None):
        rules_c, laplace, ref_cov = self._classes[cls]
        if X is None:
            C = ref_cov
            n = len(self.data)
        else:
            n = len(X)
            C = np.array(
                [premise_mask_matrix(r.premise, self.data.schema, X) for r in rules_c],
                dtype=bool,
            ).reshape(len(rules_c), n)
        if len(rules_c) == 0:
            return np.zeros(n), np.zeros(n, dtype=np.int64)
        rank = np.cumsum(C, axis=0)
        top = C & (rank <= self.top_k)
        mass = laplace @ top
        return mass, top.sum(axis=0)

    def votes(self, X: np.ndarray | None = None):
        """(mass0, count0, mass1, count1) per record; ``X=None`` means the
        reference records themselves."""
        m0, c0 = self._class_votes(0, X)
        m1, c1 = self._class_votes(1, X)
        return m0, c0, m1, c1

    def predict(self, default_class: int, X: np.ndarray | None = None) -> np.ndarray:
        m0, c0, m1, c1 = self.votes(X)
        avg0 = m0 / np.maximum(c0, 1)
        avg1 = m1 / np.maximum(c1, 1)
        has0 = c0 > 0
        has1 = c1 > 0
        pred = np.full(len(m0), default_class, dtype=np.int64)
        pred[has0 & ~has1] = 0
        pred[has1 & ~has0] = 1
        both = has0 & has1
        pred[both & (avg0 > avg1)] = 0
        pred[both & (avg1 > avg0)] = 1
        return pred

    def quality(self, labels: np.ndarray) -> float:
        """q = -BIC with a smoothed vote-mass likelihood.

        Covered records get p(class) = (mass_class + 1) / (mass0 + mass1 + 2);
        uncovered ones fall back to (count_class + 1) / (n + 2).
        """
        m0, c0, m1, c1 = self.votes(None)
        covered = (c0 + c1) > 0
        denom = m0 + m1 + 2.0
        p_label = np.where(labels == 1, (m1 + 1.0) / denom, (m0 + 1.0) / denom)
        n = len(labels)
        n1 = int((labels == 1).sum())
        prior = np.where(labels == 1, (n1 + 1.0) / (n + 2.0), (n - n1 + 1.0) / (n + 2.0))
        p = np.where(covered, p_label, prior)
        log_lik = float(np.log(p).sum())
        return -(self.n_rules * math.log(n) - 2.0 * log_lik)


def cpar_predict(rules, record: Record, default_class: int, data: LabeledDataset) -> int:
    """Label one record by averaging the top-5 Laplace accuracies per class."""
    voter = RuleVoter(rules, data)
    return int(voter.predict(default_class, record.encoded()[None, :])[0])


def q_bic(rules, relabeled: LabeledDataset) -> float:
    """Quality of a rule set on oracle-relabeled data (larger is better)."""
    rules = list(rules)
    if not rules:
        raise ValueError("q_bic needs a non-empty rule set")
    return RuleVoter(rules, relabeled).quality(relabeled.labels)


def fidelity(rules, default_class: int, relabeled: LabeledDataset) -> float:
    """Fraction of records where CPAR voting reproduces the black-box label."""
    voter = RuleVoter(rules, relabeled)
    return float(np.mean(voter.predict(default_class) == relabeled.labels))


# --- cut selection --------------------------------------------------------------

@dataclass(frozen=True)
class CutCandidate:
    height: float
    n_rules: int
    q: float
    fidelity: float
    nodes: tuple[DendroNode, ...]


@dataclass(frozen=True)
class GlobalExplanation:
    """The selected cut: a compact rule set with its quality metrics."""

    rules: tuple[Rule, ...]
    q_score: float
    fidelity: float
    n_rules: int
    n_predicates: int
    default_class: int
    cut_height: float


def evaluate_cuts(dendrogram: Dendrogram, relabeled: LabeledDataset) -> list[CutCandidate]:
    """Score every horizontal cut (plus all-leaves and all-roots)."""
    if dendrogram.ref_fingerprint != relabeled.fingerprint():
        raise ValueError("dendrogram was built over a different reference dataset")
    default = majority_class(relabeled.labels)
    heights = [ALL_LEAVES_HEIGHT] + dendrogram.internal_heights() + [ALL_ROOTS_HEIGHT]
    seen: set[frozenset] = set()
    out = []
    for h in heights:
        nodes = cut_nodes(dendrogram, h)
        key = frozenset(n.node_id for n in nodes)
        if key in seen:
            continue
        seen.add(key)
        voter = RuleVoter(
            [n.rule for n in nodes], relabeled, ref_covers=[n.cover for n in nodes]
        )
        q = voter.quality(relabeled.labels)
        fid = float(np.mean(voter.predict(default) == relabeled.labels))
        out.append(CutCandidate(h, voter.n_rules, q, fid, tuple(nodes)))
    return out


def select_cut(dendrogram: Dendrogram, relabeled: LabeledDataset) -> GlobalExplanation:
    """Pick the cut maximising q (ties: fewer rules, then lower height)."""
    candidates = evaluate_cuts(dendrogram, relabeled)
    best = max(candidates, key=lambda c: (c.q, -c.n_rules, -c.height))
    rules = tuple(sorted((n.rule for n in best.nodes), key=format_rule))
    return GlobalExplanation(
        rules=rules,
        q_score=best.q,
        fidelity=best.fidelity,
        n_rules=best.n_rules,
        n_predicates=sum(len(r.premise) for r in rules),
        default_class=majority_class(relabeled.labels),
        cut_height=best.height,
    )


# --- exports ---------------------------------------------------------------------

def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def dendrogram_dot(dendrogram: Dendrogram) -> str:
    """DOT digraph with deterministic node ids, parents pointing at children."""
    lines = ["digraph dendrogram {", "  node [shape=box];"]
    for root in dendrogram.roots:
        for node in root.walk():
            if node.is_leaf:
                label = _dot_escape(node.text)
            else:
                label = _dot_escape(f"h={node.height!r} | {node.text}")
            lines.append(f'  "{node.node_id}" [label="{label}"];')
        for node in root.walk():
            if not node.is_leaf:
                lines.append(f'  "{node.node_id}" -> "{node.left.node_id}";')
                lines.append(f'  "{node.node_id}" -> "{node.right.node_id}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def format_global(explanation: GlobalExplanation) -> str:
    """Rule-file text: a metrics header comment, then one rule per line."""
    header = (
        f"# q={explanation.q_score!r} fidelity={explanation.fidelity!r} "
        f"k={explanation.n_rules} default={explanation.default_class}"
    )
    return "\n".join([header] + [format_rule(r) for r in explanation.rules]) + "\n"
