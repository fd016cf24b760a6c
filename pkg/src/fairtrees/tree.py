"""Binary CART trees driven by the five tuned hyperparameters.

Split quality is the weighted impurity decrease
``delta = I(parent) - (WL/W) I(left) - (WR/W) I(right)`` where the class
masses W are instance counts scaled by ``class_weight`` (positive class) and
``1 - class_weight`` (negative class).  Candidate thresholds sit at midpoints
between consecutive distinct sorted feature values.  Ties are broken by
lowest feature index, then lowest threshold, then frontier insertion order,
so training is fully deterministic.

Growth is depth-first when ``max_leaf_nodes`` is unbounded and best-first
(largest total impurity decrease ``W * delta`` first) when it is bounded,
which prunes the globally least useful splits.  A branch stops on weighted
purity, the depth bound, or ``min_samples_split``; an impure node with at
least one candidate threshold is split even at zero gain, which is what lets
unconstrained trees fit XOR-style data exactly.

``TreeBuilder`` presorts the feature columns once per learn set and reuses
that order for every tree, which is what makes evolutionary runs (tens of
thousands of trees on one dataset) cheap.
"""

import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import PredictionError, TrainingError, UndefinedNodeError

GINI = "gini"
ENTROPY = "entropy"
CRITERIA = (GINI, ENTROPY)

LEAF = -1


@dataclass(frozen=True)
class Hyperparameters:
    """The five tuned knobs; ``None`` means unbounded depth/leaves."""

    criterion: str = GINI
    max_depth: int = None
    min_samples_split: int = 2
    max_leaf_nodes: int = None
    class_weight: float = 0.5

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_leaf_nodes is not None and self.max_leaf_nodes < 2:
            raise ValueError("max_leaf_nodes must be >= 2 or None")
        if not 0.0 <= self.class_weight <= 1.0:
            raise ValueError("class_weight must be in [0, 1]")


def impurity(w0: float, w1: float, criterion: str = GINI) -> float:
    """Gini or entropy impurity of a node with weighted class masses w0, w1."""
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    if w0 < 0 or w1 < 0:
        raise ValueError("class masses must be non-negative")
    total = w0 + w1
    if total <= 0:
        raise UndefinedNodeError("impurity of a node with zero class mass is undefined")
    p0, p1 = w0 / total, w1 / total
    if criterion == GINI:
        return 1.0 - p0 * p0 - p1 * p1
    value = 0.0
    if p0 > 0:
        value -= p0 * math.log2(p0)
    if p1 > 0:
        value -= p1 * math.log2(p1)
    return value


def _h(w: np.ndarray) -> np.ndarray:
    """Elementwise w * log2(w) with the 0 * log 0 := 0 convention."""
    out = np.zeros_like(w)
    np.log2(w, out=out, where=w > 0)
    return w * out


def _mass_impurity(w0, w1, criterion):
    """W * I(node) for arrays of class masses; zero-mass nodes count as pure."""
    total = w0 + w1
    if criterion == GINI:
        sq = np.zeros_like(total)
        np.divide(w0 * w0 + w1 * w1, total, out=sq, where=total > 0)
        return total - sq
    return _h(total) - _h(w0) - _h(w1)


@dataclass
class DecisionTree:
    """Array-of-nodes tree; ``feature == -1`` marks leaves."""

    feature: np.ndarray    # int32, split feature or -1
    threshold: np.ndarray  # float64, split threshold (nan at leaves)
    left: np.ndarray       # int32 child ids, -1 at leaves
    right: np.ndarray
    node_w0: np.ndarray    # weighted class masses reaching the node
    node_w1: np.ndarray
    pred: np.ndarray       # int8 leaf votes (defined for every node)
    depth: int
    leaf_count: int
    n_features: int

    @property
    def n_nodes(self):
        return len(self.feature)

    def predict(self, X):
        return predict(self, X)

    def validate(self, hp: Hyperparameters = None):
        """Check structural invariants; used by the test suite."""
        internal = self.feature >= 0
        assert ((self.left[internal] >= 0) & (self.right[internal] >= 0)).all()
        assert (self.left[~internal] == LEAF).all() and (self.right[~internal] == LEAF).all()
        depths = _node_depths(self)
        assert self.depth == depths[~internal].max()
        assert self.leaf_count == int((~internal).sum())
        if hp is not None:
            if hp.max_depth is not None:
                assert self.depth <= hp.max_depth
            if hp.max_leaf_nodes is not None:
                assert self.leaf_count <= hp.max_leaf_nodes


def _node_depths(tree: DecisionTree) -> np.ndarray:
    depths = np.zeros(tree.n_nodes, dtype=np.int32)
    for i in range(tree.n_nodes):
        if tree.feature[i] >= 0:
            depths[tree.left[i]] = depths[i] + 1
            depths[tree.right[i]] = depths[i] + 1
    return depths


class _Nodes:
    """Append-only node arena used during growth."""

    def __init__(self):
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.w0 = []
        self.w1 = []
        self.depth = []

    def add(self, depth, w0, w1):
        self.feature.append(LEAF)
        self.threshold.append(math.nan)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.w0.append(w0)
        self.w1.append(w1)
        self.depth.append(depth)
        return len(self.feature) - 1

    def split(self, node, feat, thr, left, right):
        self.feature[node] = feat
        self.threshold[node] = thr
        self.left[node] = left
        self.right[node] = right

    def freeze(self, class_weight, n_features) -> DecisionTree:
        feature = np.asarray(self.feature, dtype=np.int32)
        w0 = np.asarray(self.w0)
        w1 = np.asarray(self.w1)
        pred = (w1 > w0).astype(np.int8)
        if class_weight >= 1.0:
            # only the positive class carries weight: mass-less nodes hold
            # negative rows made invisible, and vice versa for weight 0
            pred[(w0 == 0) & (w1 == 0)] = 1
        leaves = feature == LEAF
        depth_arr = np.asarray(self.depth)
        return DecisionTree(
            feature=feature,
            threshold=np.asarray(self.threshold),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            node_w0=w0,
            node_w1=w1,
            pred=pred,
            depth=int(depth_arr[leaves].max()),
            leaf_count=int(leaves.sum()),
            n_features=n_features,
        )


class TreeBuilder:
    """Trains any number of trees on one fixed learn set.

    Feature columns are argsorted once; every node reuses the parent's sorted
    order through mask partitioning, so no per-node sorting happens.
    """

    def __init__(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise TrainingError("learn set must be a non-empty 2-d matrix")
        self.X = X
        self.n, self.m = X.shape
        self.is_pos = np.asarray(y) == 1
        self.order0 = np.argsort(X, axis=0, kind="stable").astype(np.int32)
        self._cols = np.arange(self.m, dtype=np.intp)[None, :]
        self._mask = np.zeros(self.n, dtype=bool)
        self._wp = None
        self._wn = None
        self._criterion = None

    def _set_hyperparameters(self, hp: Hyperparameters):
        self._wp = np.where(self.is_pos, hp.class_weight, 0.0)
        self._wn = np.where(self.is_pos, 0.0, 1.0 - hp.class_weight)
        self._criterion = hp.criterion

    def _search(self, order, w0, w1):
        """Best candidate split of a node given its sorted-order matrix.

        Returns ``(feat, pos, threshold, mass_decrease, w0_left, w1_left)``
        or None when every feature is constant within the node.
        ``mass_decrease`` is W * delta, the node's total impurity decrease.
        """
        Xs = self.X[order, self._cols]
        cp = np.cumsum(self._wp[order], axis=0)
        cn = np.cumsum(self._wn[order], axis=0)
        valid = Xs[:-1] != Xs[1:]
        if not valid.any():
            return None
        w0l = cn[:-1]
        w1l = cp[:-1]
        child = (_mass_impurity(w0l, w1l, self._criterion)
                 + _mass_impurity(w0 - w0l, w1 - w1l, self._criterion))
        child[~valid] = np.inf
        best_pos = np.argmin(child, axis=0)
        per_col = child[best_pos, np.arange(self.m)]
        feat = int(np.argmin(per_col))
        pos = int(best_pos[feat])
        parent = float(_mass_impurity(np.float64(w0), np.float64(w1), self._criterion))
        thr = (Xs[pos, feat] + Xs[pos + 1, feat]) / 2.0
        return feat, pos, float(thr), parent - float(per_col[feat]), float(cn[pos, feat]), float(cp[pos, feat])

    def _partition(self, order, feat, pos):
        k = order.shape[0]
        left_rows = order[:pos + 1, feat]
        mask = self._mask
        mask[left_rows] = True
        sel = mask[order]
        left_order = order.T[sel.T].reshape(self.m, pos + 1).T
        right_order = order.T[~sel.T].reshape(self.m, k - pos - 1).T
        mask[left_rows] = False
        return left_order, right_order

    def _candidate(self, order, depth, w0, w1, hp):
        """Split proposal for a node, or None if the node must stay a leaf."""
        if w0 <= 0 or w1 <= 0:  # weighted purity (zero-mass counts as pure)
            return None
        if order.shape[0] < hp.min_samples_split:
            return None
        if hp.max_depth is not None and depth >= hp.max_depth:
            return None
        return self._search(order, w0, w1)

    def train(self, hp: Hyperparameters) -> DecisionTree:
        self._set_hyperparameters(hp)
        w0_root = float(self._wn.sum())
        w1_root = float(self._wp.sum())
        nodes = _Nodes()
        root = nodes.add(0, w0_root, w1_root)
        if hp.max_leaf_nodes is None:
            self._grow_depth_first(nodes, root, hp, w0_root, w1_root)
        else:
            self._grow_best_first(nodes, root, hp, w0_root, w1_root)
        return nodes.freeze(hp.class_weight, self.m)

    def _grow_depth_first(self, nodes, root, hp, w0_root, w1_root):
        stack = [(root, self.order0, 0, w0_root, w1_root)]
        while stack:
            node, order, depth, w0, w1 = stack.pop()
            found = self._candidate(order, depth, w0, w1, hp)
            if found is None:
                continue
            feat, pos, thr, _, w0l, w1l = found
            left_order, right_order = self._partition(order, feat, pos)
            left = nodes.add(depth + 1, w0l, w1l)
            right = nodes.add(depth + 1, w0 - w0l, w1 - w1l)
            nodes.split(node, feat, thr, left, right)
            stack.append((right, right_order, depth + 1, w0 - w0l, w1 - w1l))
            stack.append((left, left_order, depth + 1, w0l, w1l))

    def _grow_best_first(self, nodes, root, hp, w0_root, w1_root):
        heap = []
        tick = 0
        found = self._candidate(self.order0, 0, w0_root, w1_root, hp)
        if found is not None:
            heapq.heappush(heap, (-found[3], tick, root, self.order0, 0, w0_root, w1_root, found))
        leaves = 1
        while heap and leaves < hp.max_leaf_nodes:
            _, _, node, order, depth, w0, w1, found = heapq.heappop(heap)
            feat, pos, thr, _, w0l, w1l = found
            left_order, right_order = self._partition(order, feat, pos)
            left = nodes.add(depth + 1, w0l, w1l)
            right = nodes.add(depth + 1, w0 - w0l, w1 - w1l)
            nodes.split(node, feat, thr, left, right)
            leaves += 1
            for child, child_order, cw0, cw1 in (
                (left, left_order, w0l, w1l),
                (right, right_order, w0 - w0l, w1 - w1l),
            ):
                child_found = self._candidate(child_order, depth + 1, cw0, cw1, hp)
                if child_found is not None:
                    tick += 1
                    heapq.heappush(heap, (-child_found[3], tick, child, child_order,
                                          depth + 1, cw0, cw1, child_found))


def train_tree(learn, hp: Hyperparameters) -> DecisionTree:
    """Fit one tree on an encoded learn set."""
    return TreeBuilder(learn.features, learn.y).train(hp)


def best_split(rows, data, hp: Hyperparameters):
    """Best (feature, threshold, impurity_decrease) over the given rows.

    Returns None when no candidate threshold achieves a strictly positive
    weighted impurity decrease (constant features, pure nodes, ...).
    """
    rows = np.asarray(rows)
    builder = TreeBuilder(data.features[rows], data.y[rows])
    builder._set_hyperparameters(hp)
    w0 = float(builder._wn.sum())
    w1 = float(builder._wp.sum())
    if w0 <= 0 or w1 <= 0:
        return None
    found = builder._search(builder.order0, w0, w1)
    if found is None:
        return None
    feat, _, thr, mass_decrease, _, _ = found
    delta = mass_decrease / (w0 + w1)
    if delta <= 0:
        return None
    return feat, thr, delta


def predict(tree: DecisionTree, X) -> np.ndarray:
    """Route rows down the tree; value <= threshold goes left."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != tree.n_features:
        raise PredictionError(
            f"expected {tree.n_features} feature columns, got {X.shape[1] if X.ndim == 2 else X.ndim}")
    idx = np.zeros(X.shape[0], dtype=np.int32)
    while True:
        feats = tree.feature[idx]
        live = feats >= 0
        if not live.any():
            break
        rows = np.flatnonzero(live)
        at = idx[rows]
        go_left = X[rows, feats[rows]] <= tree.threshold[at]
        idx[rows] = np.where(go_left, tree.left[at], tree.right[at])
    return tree.pred[idx]


def tree_to_text(tree: DecisionTree, feature_names=None) -> str:
    """Indented if/else rendering of the tree."""
    def name(j):
        return feature_names[j] if feature_names else f"x{j}"

    lines = []

    def walk(node, indent):
        pad = "  " * indent
        if tree.feature[node] == LEAF:
            lines.append(f"{pad}leaf #{node}: predict {int(tree.pred[node])} "
                         f"(w0={tree.node_w0[node]:g}, w1={tree.node_w1[node]:g})")
            return
        lines.append(f"{pad}node #{node}: {name(tree.feature[node])} <= {tree.threshold[node]:g}")
        walk(tree.left[node], indent + 1)
        walk(tree.right[node], indent + 1)

    walk(0, 0)
    return "\n".join(lines)


def tree_to_dict(tree: DecisionTree) -> dict:
    nodes = []
    for i in range(tree.n_nodes):
        if tree.feature[i] == LEAF:
            nodes.append({"id": i, "leaf": True, "w0": float(tree.node_w0[i]),
                          "w1": float(tree.node_w1[i]), "prediction": int(tree.pred[i])})
        else:
            nodes.append({"id": i, "leaf": False, "feature": int(tree.feature[i]),
                          "threshold": float(tree.threshold[i]),
                          "left": int(tree.left[i]), "right": int(tree.right[i])})
    return {"depth": tree.depth, "leaf_count": tree.leaf_count,
            "n_features": tree.n_features, "nodes": nodes}


def tree_to_json(tree: DecisionTree, indent=None) -> str:
    return json.dumps(tree_to_dict(tree), indent=indent)
