import numpy as np
import pytest

from uqkit.data import Dataset, make_split
from uqkit.errors import TooFewSamples
from uqkit.forest import ForestConfig, ForestModel, fit_forest, predict_forest

from conftest import synthetic_dataset


def test_constant_target():
    ds = synthetic_dataset(50, d=2, fn=lambda X: np.zeros(len(X)) + 4.0, noise=0.0, seed=0)
    model = fit_forest(ds, ForestConfig(n_trees=7, seed=1))
    np.testing.assert_allclose(predict_forest(model, ds.features), 4.0)


def test_single_tree_no_bootstrap_memorizes():
    ds = synthetic_dataset(60, d=1, fn=lambda X: np.sin(5 * X[:, 0]), noise=0.3, seed=4)
    assert len(np.unique(ds.features[:, 0])) == ds.n  # rows distinct
    model = fit_forest(ds, ForestConfig(n_trees=1, bootstrap=False))
    np.testing.assert_allclose(predict_forest(model, ds.features), ds.targets, atol=1e-12)


def test_beats_mean_predictor():
    ds = synthetic_dataset(400, d=1, fn=lambda X: X[:, 0], noise=0.3, seed=8)
    plan = make_split(ds.n, "twoway", 0)
    train, test = ds.subset(plan.partitions[0]), ds.subset(plan.partitions[1])
    model = fit_forest(train, ForestConfig(n_trees=30, seed=2))
    pred = predict_forest(model, test.features)
    forest_mse = np.mean((test.targets - pred) ** 2)
    baseline_mse = np.mean((test.targets - train.targets.mean()) ** 2)
    assert forest_mse < baseline_mse


def test_prediction_is_mean_of_trees_and_within_range():
    ds = synthetic_dataset(100, d=2, seed=5)
    model = fit_forest(ds, ForestConfig(n_trees=9, seed=3))
    per_tree = np.array([t.predict(ds.features) for t in model.trees])
    np.testing.assert_allclose(predict_forest(model, ds.features), per_tree.mean(axis=0))
    pred = predict_forest(model, ds.features)
    assert np.all(pred >= per_tree.min(axis=0) - 1e-12)
    assert np.all(pred <= per_tree.max(axis=0) + 1e-12)


def test_duplicated_tree_shifts_mean_by_averaging_weight():
    ds = synthetic_dataset(80, d=1, seed=6)
    model = fit_forest(ds, ForestConfig(n_trees=4, seed=7))
    dup = ForestModel(
        trees=model.trees + [model.trees[0]],
        oob_indices=model.oob_indices + [model.oob_indices[0]],
        config=model.config,
        feature_names=model.feature_names,
        train_targets=model.train_targets,
    )
    per_tree = np.array([t.predict(ds.features) for t in model.trees])
    expected = (per_tree.sum(axis=0) + per_tree[0]) / 5.0
    np.testing.assert_allclose(predict_forest(dup, ds.features), expected)


def test_permutation_equivariance():
    ds = synthetic_dataset(70, d=2, seed=9)
    model = fit_forest(ds, ForestConfig(n_trees=5, seed=0))
    perm = np.random.default_rng(1).permutation(ds.n)
    np.testing.assert_array_equal(
        predict_forest(model, ds.features[perm]), predict_forest(model, ds.features)[perm]
    )


def test_prefix_property():
    ds = synthetic_dataset(90, d=2, seed=10)
    small = fit_forest(ds, ForestConfig(n_trees=4, seed=11))
    large = fit_forest(ds, ForestConfig(n_trees=8, seed=11))
    for a, b in zip(small.trees, large.trees):
        assert a.to_dict() == b.to_dict()


def test_oob_sets_nonempty_and_error_finite():
    ds = synthetic_dataset(120, d=1, seed=12)
    model = fit_forest(ds, ForestConfig(n_trees=10, seed=13))
    assert all(len(oob) > 0 for oob in model.oob_indices)
    err = model.oob_error()
    assert np.isfinite(err) and err >= 0.0


def test_too_few_samples():
    ds = synthetic_dataset(10, seed=0).subset([0])
    with pytest.raises(TooFewSamples):
        fit_forest(ds, ForestConfig(n_trees=2))


def test_serialization_roundtrip(tmp_path):
    ds = synthetic_dataset(60, d=2, seed=14)
    model = fit_forest(ds, ForestConfig(n_trees=3, seed=15))
    path = tmp_path / "forest.json"
    model.save(path)
    loaded = ForestModel.load(path)
    assert loaded.to_json() == model.to_json()
    np.testing.assert_array_equal(
        predict_forest(loaded, ds.features), predict_forest(model, ds.features)
    )
    assert loaded.oob_error(ds.features) == model.oob_error()
