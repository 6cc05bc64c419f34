"""CART decision trees over encoded matrices (binary labels, Gini impurity).

Shared by the builtin random-forest oracle and the surrogate explainer.
Continuous splits test ``value <= threshold`` with thresholds at midpoints
between consecutive distinct sorted values; categorical splits are
one-vs-rest on a single category code (left branch satisfies the test).
Induction is deterministic: features are scanned in ascending index order,
candidate thresholds ascending, and a new split is adopted only when its
children are strictly purer, so ties resolve to the lowest feature index
and then the lowest threshold.
"""

from __future__ import annotations

import numpy as np


class Tree:
    """Flat-array binary decision tree.

    ``feature[i] == -1`` marks a leaf; leaves point left/right at themselves
    so batched traversal needs no branching.
    """

    def __init__(self, feature, value, is_cat, left, right, klass, counts):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.is_cat = np.asarray(is_cat, dtype=bool)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.klass = np.asarray(klass, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def leaf_mask(self) -> np.ndarray:
        return self.feature < 0

    @property
    def n_leaves(self) -> int:
        return int(self.leaf_mask.sum())

    def leaf_ids(self, X: np.ndarray) -> np.ndarray:
        """Route every row of ``X`` to its leaf node index."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        idx = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[idx]
            active = f >= 0
            if not active.any():
                return idx
            rows = np.nonzero(active)[0]
            nodes = idx[rows]
            vals = X[rows, f[rows]]
            go_left = np.where(self.is_cat[nodes], vals == self.value[nodes], vals <= self.value[nodes])
            idx[rows] = np.where(go_left, self.left[nodes], self.right[nodes])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.klass[self.leaf_ids(X)]

    def path_to_leaf(self, x: np.ndarray):
        """Conditions along one record's root-to-leaf path.

        Returns ``(leaf_id, steps)`` where each step is
        ``(feature, is_cat, value, went_left)``.
        """
        x = np.asarray(x, dtype=np.float64)
        node = 0
        steps = []
        while self.feature[node] >= 0:
            f = int(self.feature[node])
            v = float(self.value[node])
            if self.is_cat[node]:
                went_left = x[f] == v
            else:
                went_left = x[f] <= v
            steps.append((f, bool(self.is_cat[node]), v, bool(went_left)))
            node = int(self.left[node]) if went_left else int(self.right[node])
        return node, steps

    def leaves_with_paths(self):
        """Depth-first enumeration of ``(leaf_id, steps)`` for every leaf.

        Steps mirror :meth:`path_to_leaf` with ``went_left`` telling whether
        the leaf lies on the satisfying branch of each condition.
        """
        out = []
        stack = [(0, [])]
        while stack:
            node, steps = stack.pop()
            if self.feature[node] < 0:
                out.append((node, steps))
                continue
            f = int(self.feature[node])
            cat = bool(self.is_cat[node])
            v = float(self.value[node])
            # Right pushed first so the left branch is emitted first.
            stack.append((int(self.right[node]), steps + [(f, cat, v, False)]))
            stack.append((int(self.left[node]), steps + [(f, cat, v, True)]))
        return out


def _best_continuous(col, y, total1, min_leaf):
    n = len(y)
    order = np.argsort(col, kind="stable")
    sv = col[order]
    sy = y[order]
    cut = np.nonzero(sv[1:] != sv[:-1])[0]
    if min_leaf > 1:
        n_left = cut + 1
        cut = cut[(n_left >= min_leaf) & (n - n_left >= min_leaf)]
    if len(cut) == 0:
        return None
    n1_left = np.cumsum(sy)[cut].astype(np.float64)
    n_left = (cut + 1).astype(np.float64)
    n0_left = n_left - n1_left
    n_right = n - n_left
    n1_right = total1 - n1_left
    n0_right = n_right - n1_right
    score = (n0_left**2 + n1_left**2) / n_left + (n0_right**2 + n1_right**2) / n_right
    k = int(np.argmax(score))
    threshold = (sv[cut[k]] + sv[cut[k] + 1]) / 2.0
    return float(score[k]), threshold


def _best_categorical(col, y, total1, min_leaf):
    n = len(y)
    codes = col.astype(np.int64)
    cnt = np.bincount(codes).astype(np.float64)
    cnt1 = np.bincount(codes, weights=y.astype(np.float64))
    floor = max(min_leaf, 1)
    ok = (cnt >= floor) & (n - cnt >= floor)
    if not ok.any():
        return None
    n_left = cnt[ok]
    n1_left = cnt1[ok]
    n0_left = n_left - n1_left
    n_right = n - n_left
    n1_right = total1 - n1_left
    n0_right = n_right - n1_right
    score = (n0_left**2 + n1_left**2) / n_left + (n0_right**2 + n1_right**2) / n_right
    k = int(np.argmax(score))
    code = np.nonzero(ok)[0][k]
    return float(score[k]), float(code)


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    cat_mask: np.ndarray,
    *,
    max_depth: int,
    min_leaf: int = 1,
    n_feature_candidates: int | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Grow a CART tree on an encoded matrix.

    ``n_feature_candidates`` (with ``rng``) draws a fresh feature subset at
    every split, as random forests do; ``None`` scans all features. A node
    becomes a leaf when it is pure, smaller than ``2 * min_leaf``, at
    ``max_depth``, or when no candidate split strictly reduces impurity.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    cat_mask = np.asarray(cat_mask, dtype=bool)
    n, m = X.shape
    if n == 0:
        raise ValueError("cannot grow a tree on zero records")

    feature, value, is_cat, left, right, klass, counts = [], [], [], [], [], [], []

    def alloc():
        feature.append(-1)
        value.append(0.0)
        is_cat.append(False)
        left.append(0)
        right.append(0)
        klass.append(0)
        counts.append((0, 0))
        return len(feature) - 1

    def build(rows: np.ndarray, depth: int) -> int:
        node = alloc()
        yy = y[rows]
        n1 = int(yy.sum())
        n0 = len(yy) - n1
        counts[node] = (n0, n1)
        klass[node] = 0 if n0 >= n1 else 1
        left[node] = right[node] = node
        if n0 == 0 or n1 == 0 or len(rows) < 2 * min_leaf or depth >= max_depth:
            return node

        if n_feature_candidates is not None and n_feature_candidates < m:
            feats = np.sort(rng.choice(m, size=n_feature_candidates, replace=False))
        else:
            feats = np.arange(m)

        parent_score = (float(n0) ** 2 + float(n1) ** 2) / len(rows)
        best_score = parent_score
        best = None
        for j in feats:
            col = X[rows, j]
            found = (
                _best_categorical(col, yy, n1, min_leaf)
                if cat_mask[j]
                else _best_continuous(col, yy, n1, min_leaf)
            )
            if found is not None and found[0] > best_score:
                best_score, best = found[0], (int(j), found[1])
        if best is None:
            return node

        j, split_value = best
        col = X[rows, j]
        go_left = (col == split_value) if cat_mask[j] else (col <= split_value)
        feature[node] = j
        value[node] = split_value
        is_cat[node] = bool(cat_mask[j])
        left[node] = build(rows[go_left], depth + 1)
        right[node] = build(rows[~go_left], depth + 1)
        return node

    build(np.arange(n), 0)
    return Tree(feature, value, is_cat, left, right, klass, counts)
