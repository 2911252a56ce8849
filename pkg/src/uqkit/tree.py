"""Single regression tree shared by the boosting and forest engines.

Split finding is exact greedy over sorted unique feature values with the
squared-error (variance reduction) criterion; trees grow leaf-wise, always
expanding the candidate split with the largest gain. Ties across features go
to the lowest feature index, making growth fully deterministic.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch

LEAF = -1


@dataclass
class RegressionTree:
    """Flat-array binary tree: ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray  # int, LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray  # split gain, 0 for leaves
    n_samples: np.ndarray

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(len(X))
        leaf = self.apply(X)
        out[:] = self.value[leaf]
        return out

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node index for every row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.intp)
        while True:
            internal = self.feature[node] != LEAF
            if not internal.any():
                return node
            idx = np.flatnonzero(internal)
            f = self.feature[node[idx]]
            goes_left = X[idx, f] < self.threshold[node[idx]]
            node[idx] = np.where(goes_left, self.left[node[idx]], self.right[node[idx]])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
            "n_samples": self.n_samples.tolist(),
        }

    @staticmethod
    def from_dict(doc: dict) -> "RegressionTree":
        return RegressionTree(
            feature=np.asarray(doc["feature"], dtype=np.intp),
            threshold=np.asarray(doc["threshold"], dtype=np.float64),
            left=np.asarray(doc["left"], dtype=np.intp),
            right=np.asarray(doc["right"], dtype=np.intp),
            value=np.asarray(doc["value"], dtype=np.float64),
            gain=np.asarray(doc["gain"], dtype=np.float64),
            n_samples=np.asarray(doc["n_samples"], dtype=np.intp),
        )


def _best_split(X, t, idx, features, min_leaf):
    """Best (gain, feature, threshold) over candidate splits of one node.

    Gain is the squared-error improvement SL^2/nL + SR^2/nR - S^2/n of the
    sums of ``t`` over the node. Returns None when no valid split exists.
    """
    n = idx.size
    if n < 2 * min_leaf:
        return None
    tv = t[idx]
    S = tv.sum()
    base = S * S / n
    best_gain = 0.0
    best = None
    for j in features:
        v = X[idx, j]
        order = np.argsort(v, kind="mergesort")
        sv = v[order]
        cs = np.cumsum(tv[order])
        c = np.arange(1, n)  # left-child sizes
        valid = sv[1:] > sv[:-1]
        if min_leaf > 1:
            valid &= (c >= min_leaf) & (n - c >= min_leaf)
        if not valid.any():
            continue
        left_sum = cs[:-1]
        gain = left_sum**2 / c + (S - left_sum) ** 2 / (n - c) - base
        gain[~valid] = -np.inf
        p = int(np.argmax(gain))
        if np.isfinite(gain[p]) and gain[p] > best_gain:
            best_gain = float(gain[p])
            best = (best_gain, int(j), float(0.5 * (sv[p] + sv[p + 1])), order[: p + 1], order[p + 1 :])
    if best is None:
        return None
    gain_, j_, thr_, lo, ro = best
    return gain_, j_, thr_, idx[lo], idx[ro]


def grow_tree(
    X: np.ndarray,
    target: np.ndarray,
    *,
    max_leaves: int,
    min_samples_leaf: int = 1,
    features=None,
):
    """Fit a squared-error tree to ``target``; leaf values are leaf means.

    Returns ``(tree, leaf_of_row)`` where ``leaf_of_row[i]`` is the leaf node
    id of training row i, so callers can re-estimate leaf values afterwards.
    """
    X = np.asarray(X, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if len(X) != len(target):
        raise DimensionMismatch(f"{len(X)} rows vs {len(target)} targets")
    if features is None:
        features = np.arange(X.shape[1])
    features = np.sort(np.asarray(features, dtype=np.intp))

    n = len(target)
    nodes = {
        "feature": [LEAF],
        "threshold": [0.0],
        "left": [-1],
        "right": [-1],
        "value": [float(target.mean())],
        "gain": [0.0],
        "n_samples": [n],
    }
    node_rows = {0: np.arange(n, dtype=np.intp)}

    heap = []
    counter = 0
    root_split = _best_split(X, target, node_rows[0], features, min_samples_leaf)
    if root_split is not None:
        heapq.heappush(heap, (-root_split[0], counter, 0, root_split))
        counter += 1

    n_leaves = 1
    while heap and n_leaves < max_leaves:
        _, _, node_id, (gain, j, thr, left_idx, right_idx) = heapq.heappop(heap)
        left_id = len(nodes["feature"])
        right_id = left_id + 1
        for child_idx in (left_idx, right_idx):
            nodes["feature"].append(LEAF)
            nodes["threshold"].append(0.0)
            nodes["left"].append(-1)
            nodes["right"].append(-1)
            nodes["value"].append(float(target[child_idx].mean()))
            nodes["gain"].append(0.0)
            nodes["n_samples"].append(len(child_idx))
        nodes["feature"][node_id] = int(j)
        nodes["threshold"][node_id] = thr
        nodes["left"][node_id] = left_id
        nodes["right"][node_id] = right_id
        nodes["gain"][node_id] = gain
        node_rows[left_id] = left_idx
        node_rows[right_id] = right_idx
        del node_rows[node_id]
        n_leaves += 1

        for child_id in (left_id, right_id):
            split = _best_split(X, target, node_rows[child_id], features, min_samples_leaf)
            if split is not None:
                heapq.heappush(heap, (-split[0], counter, child_id, split))
                counter += 1

    tree = RegressionTree(
        feature=np.asarray(nodes["feature"], dtype=np.intp),
        threshold=np.asarray(nodes["threshold"], dtype=np.float64),
        left=np.asarray(nodes["left"], dtype=np.intp),
        right=np.asarray(nodes["right"], dtype=np.intp),
        value=np.asarray(nodes["value"], dtype=np.float64),
        gain=np.asarray(nodes["gain"], dtype=np.float64),
        n_samples=np.asarray(nodes["n_samples"], dtype=np.intp),
    )
    leaf_of_row = np.empty(n, dtype=np.intp)
    for node_id, rows in node_rows.items():
        leaf_of_row[rows] = node_id
    return tree, leaf_of_row
