"""Random-forest regressor with fixed, documented defaults.

Trees are grown to purity on bootstrap resamples and averaged. Per-tree RNG
streams are keyed by (seed, tree index), so growing a larger forest with the
same seed leaves earlier trees unchanged. Set ``UQKIT_THREADS`` to cap the
worker threads used while fitting.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DimensionMismatch, TooFewSamples
from .tree import RegressionTree, grow_tree


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get("UQKIT_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_features: object = "all"  # "all" or a fraction in (0, 1]
    min_samples_leaf: int = 1
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_features != "all" and not (0.0 < float(self.max_features) <= 1.0):
            raise ValueError("max_features must be 'all' or a fraction in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_features": self.max_features,
            "min_samples_leaf": self.min_samples_leaf,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(doc: dict) -> "ForestConfig":
        return ForestConfig(**doc)


@dataclass
class ForestModel:
    trees: list
    oob_indices: list  # per-tree out-of-bag row indices into the training set
    config: ForestConfig
    feature_names: tuple
    train_targets: np.ndarray

    def predict(self, features) -> np.ndarray:
        return predict_forest(self, features)

    def oob_error(self, features=None) -> float:
        """Mean squared OOB prediction error over covered training rows."""
        if features is None:
            features = getattr(self, "_train_features", None)
            if features is None:
                raise ValueError("pass the training features to oob_error on a loaded model")
        X = np.asarray(features, dtype=np.float64)
        n = len(self.train_targets)
        total = np.zeros(n)
        counts = np.zeros(n)
        for tree, oob in zip(self.trees, self.oob_indices):
            if len(oob) == 0:
                continue
            total[oob] += tree.predict(X[oob])
            counts[oob] += 1
        covered = counts > 0
        if not covered.any():
            return float("nan")
        err = self.train_targets[covered] - total[covered] / counts[covered]
        return float(np.mean(err * err))

    def to_json(self) -> str:
        doc = {
            "kind": "forest",
            "config": self.config.to_dict(),
            "feature_names": list(self.feature_names),
            "oob_indices": [list(map(int, o)) for o in self.oob_indices],
            "train_targets": self.train_targets.tolist(),
            "trees": [t.to_dict() for t in self.trees],
        }
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ForestModel":
        doc = json.loads(text)
        return ForestModel(
            trees=[RegressionTree.from_dict(t) for t in doc["trees"]],
            oob_indices=[np.asarray(o, dtype=np.intp) for o in doc["oob_indices"]],
            config=ForestConfig.from_dict(doc["config"]),
            feature_names=tuple(doc["feature_names"]),
            train_targets=np.asarray(doc["train_targets"], dtype=np.float64),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @staticmethod
    def load(path) -> "ForestModel":
        with open(path, encoding="utf-8") as fh:
            return ForestModel.from_json(fh.read())


def _fit_one(X, y, config, t):
    n, d = X.shape
    rng = np.random.default_rng([config.seed, t])
    if config.bootstrap:
        rows = rng.integers(0, n, size=n)
        oob = np.setdiff1d(np.arange(n), rows)
    else:
        rows = np.arange(n)
        oob = np.empty(0, dtype=np.intp)
    if config.max_features == "all":
        feats = None
    else:
        kf = max(1, int(round(float(config.max_features) * d)))
        feats = np.sort(rng.choice(d, size=kf, replace=False))
    tree, _ = grow_tree(
        X[rows],
        y[rows],
        max_leaves=n,
        min_samples_leaf=config.min_samples_leaf,
        features=feats,
    )
    return tree, oob


def fit_forest(train: Dataset, config: ForestConfig) -> ForestModel:
    X, y = train.features, train.targets
    if len(y) < 2:
        raise TooFewSamples(f"need n >= 2, got {len(y)}")
    workers = max_workers()
    jobs = range(config.n_trees)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: _fit_one(X, y, config, t), jobs))
    else:
        results = [_fit_one(X, y, config, t) for t in jobs]
    model = ForestModel(
        trees=[r[0] for r in results],
        oob_indices=[r[1] for r in results],
        config=config,
        feature_names=train.feature_names,
        train_targets=y,
    )
    model._train_features = X
    return model


def predict_forest(model: ForestModel, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.feature_names):
        raise DimensionMismatch(
            f"expected (*, {len(model.feature_names)}) features, got {X.shape}"
        )
    out = np.zeros(len(X))
    for tree in model.trees:
        out += tree.predict(X)
    return out / len(model.trees)
