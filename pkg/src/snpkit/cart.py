"""Classification trees on ternary predictors, grown by greedy Gini splits.

Splits test x_i <= t with t in {0,1} (the only binary cuts a ternary
variable admits).  A split is made only when it strictly lowers the summed
child Gini, which also stops pure nodes.  Leaf labels follow the majority
rule with ties -1.  Row weights are supported so the boosting module can
grow stage trees on weighted pseudo-responses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset


@dataclass
class _Node:
    feature: int = -1        # -1 marks a leaf
    threshold: int = -1
    left: "_Node | None" = None    # x[feature] <= threshold
    right: "_Node | None" = None
    label: int = 0
    leaf_id: int = -1
    n_rows: int = 0


@dataclass(frozen=True)
class ClassTree:
    """Fitted tree; leaves partition {0,1,2}^n and carry +/-1 labels."""

    root: _Node
    n_leaves: int

    def __call__(self, X):
        return tree_predict(self, X)


def gini_from_counts(n_case: float, n_total: float) -> float:
    """2p(1-p) with p the case fraction; empty regions count 0."""
    if n_total <= 0:
        return 0.0
    p = n_case / n_total
    return 2.0 * p * (1.0 - p)


def gini(ds: Dataset, idx, member) -> float:
    """Empirical Gini index of the region C within the subsample."""
    idx = np.asarray(idx)
    mask = np.asarray(member(ds.predictors[idx]), dtype=bool)
    y = ds.phenotype[idx][mask]
    return gini_from_counts(float((y == 1).sum()), float(len(y)))


def _best_split_arrays(X, y, w, min_node: int):
    """Best (feature, threshold) by summed child Gini; None without strict gain.

    Ties break by smaller feature then smaller threshold.  Children smaller
    than ``min_node`` rows are not considered.
    """
    n_case = float(w[y == 1].sum())
    n_tot = float(w.sum())
    parent = gini_from_counts(n_case, n_tot)
    best = None
    best_sum = parent
    for i in range(X.shape[1]):
        col = X[:, i]
        for t in (0, 1):
            left = col <= t
            nl = int(left.sum())
            if nl < min_node or X.shape[0] - nl < min_node:
                continue
            wl = w[left]
            wr = w[~left]
            gl = gini_from_counts(float(wl[y[left] == 1].sum()), float(wl.sum()))
            gr = gini_from_counts(float(wr[y[~left] == 1].sum()), float(wr.sum()))
            s = gl + gr
            if s < best_sum - 1e-15:
                best_sum = s
                best = (i, t)
    return best


def best_split(ds: Dataset, idx, member=None, min_node: int = 1):
    """Public split search on a region of the subsample (unweighted rows)."""
    idx = np.asarray(idx)
    X = ds.predictors[idx]
    y = ds.phenotype[idx]
    if member is not None:
        mask = np.asarray(member(X), dtype=bool)
        X, y = X[mask], y[mask]
    if len(y) == 0:
        raise ValueError("region contains no subsample rows")
    return _best_split_arrays(X, y, np.ones(len(y)), min_node)


def _leaf_label(y, w) -> int:
    """Majority by weight; ties classify -1."""
    pos = float(w[y == 1].sum())
    neg = float(w[y == -1].sum())
    return 1 if pos > neg else -1


def grow_tree_arrays(X, y, w=None, D_max: int = 16, min_node: int = 5) -> ClassTree:
    """Greedy growth, expanding the largest (size x Gini) splittable leaf first."""
    if w is None:
        w = np.ones(len(y))
    rows0 = np.arange(len(y))
    root = _Node(label=_leaf_label(y, w), n_rows=len(y))
    # frontier entries: (priority, node, row indices)
    wsum = float(w.sum())
    g0 = gini_from_counts(float(w[y == 1].sum()), wsum)

    def priority(rows):
        ww = w[rows]
        return float(ww.sum()) * gini_from_counts(float(ww[y[rows] == 1].sum()),
                                                  float(ww.sum()))

    frontier = [(priority(rows0), root, rows0)]
    n_leaves = 1
    while n_leaves < D_max and frontier:
        frontier.sort(key=lambda e: -e[0])
        _, node, rows = frontier.pop(0)
        split = _best_split_arrays(X[rows], y[rows], w[rows], min_node)
        if split is None:
            continue
        i, t = split
        left_mask = X[rows, i] <= t
        rl, rr = rows[left_mask], rows[~left_mask]
        node.feature, node.threshold = i, t
        node.left = _Node(label=_leaf_label(y[rl], w[rl]), n_rows=len(rl))
        node.right = _Node(label=_leaf_label(y[rr], w[rr]), n_rows=len(rr))
        frontier.append((priority(rl), node.left, rl))
        frontier.append((priority(rr), node.right, rr))
        n_leaves += 1
    _assign_leaf_ids(root)
    return ClassTree(root=root, n_leaves=n_leaves)


def _assign_leaf_ids(root: _Node):
    nxt = 0
    stack = [root]
    while stack:
        node = stack.pop()
        if node.feature == -1:
            node.leaf_id = nxt
            nxt += 1
        else:
            stack.append(node.right)
            stack.append(node.left)


def grow_tree(ds: Dataset, idx, D_max: int = 16, min_node: int = 5) -> ClassTree:
    """Fit a classification tree on the subsample rows."""
    idx = np.asarray(idx)
    if len(idx) == 0:
        raise ValueError("empty subsample")
    return grow_tree_arrays(ds.predictors[idx], ds.phenotype[idx],
                            D_max=D_max, min_node=min_node)


def tree_apply(tree: ClassTree, X) -> np.ndarray:
    """Leaf id reached by each row."""
    X = np.atleast_2d(X)
    out = np.empty(X.shape[0], dtype=np.int64)
    _route(tree.root, X, np.arange(X.shape[0]), out)
    return out


def _route(node: _Node, X, rows, out):
    if node.feature == -1:
        out[rows] = node.leaf_id
        return
    mask = X[rows, node.feature] <= node.threshold
    _route(node.left, X, rows[mask], out)
    _route(node.right, X, rows[~mask], out)


def leaf_labels(tree: ClassTree) -> np.ndarray:
    labels = np.zeros(tree.n_leaves, dtype=np.int8)
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if node.feature == -1:
            labels[node.leaf_id] = node.label
        else:
            stack.extend((node.left, node.right))
    return labels


def tree_predict(tree: ClassTree, X) -> np.ndarray:
    """Route each row to its leaf and return the leaf label."""
    return leaf_labels(tree)[tree_apply(tree, X)]


def tree_to_text(tree: ClassTree, names=None, node=None, depth=0) -> str:
    """Nested text rendering of split tests and leaf labels."""
    node = node or tree.root
    pad = "  " * depth
    if node.feature == -1:
        return f"{pad}leaf {node.label:+d} ({node.n_rows} rows)"
    name = names[node.feature] if names else f"x{node.feature + 1}"
    return (f"{pad}{name} <= {node.threshold}?\n"
            + tree_to_text(tree, names, node.left, depth + 1) + "\n"
            + tree_to_text(tree, names, node.right, depth + 1))


def cart_trainer(D_max: int = 16, min_node: int = 5):
    """Trainer closure for the CV harness."""

    def train(ds, idx, seed):
        tree = grow_tree(ds, idx, D_max=D_max, min_node=min_node)
        return lambda X: tree_predict(tree, X)

    return train
