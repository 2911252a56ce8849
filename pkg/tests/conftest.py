import csv

import numpy as np
import pytest

from uqkit.data import Dataset


def synthetic_dataset(n, d=1, fn=None, noise=1.0, seed=0, x_range=(-2.0, 2.0)):
    """Dataset with uniform features and y = fn(X) + noise * N(0, 1)."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(*x_range, size=(n, d))
    if fn is None:
        fn = lambda X: X[:, 0]
    y = fn(X) + noise * rng.standard_normal(n)
    return Dataset(
        ids=[f"s{i}" for i in range(n)],
        feature_names=tuple(f"x{j}" for j in range(d)),
        features=X,
        targets=y,
    )


def heteroscedastic_dataset(n, seed=0):
    """y = x + |x| * N(0, 1): noise scale grows linearly with |x|."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2.0, 2.0, size=n)
    y = x + np.abs(x) * rng.standard_normal(n)
    return Dataset(
        ids=[f"s{i}" for i in range(n)],
        feature_names=("x0",),
        features=x[:, None],
        targets=y,
    )


def write_fixture_csv(path, n=600, seed=11, noise=0.3):
    """CLI fixture: 3 features, smooth target, known homoscedastic noise."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2.0, 2.0, size=(n, 3))
    y = X[:, 0] + 0.6 * np.sin(2.0 * X[:, 1]) + 0.3 * X[:, 2] + noise * rng.standard_normal(n)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mat_id", "x0", "x1", "x2", "y"])
        for i in range(n):
            writer.writerow(
                [f"m{i}"] + [repr(float(v)) for v in (X[i, 0], X[i, 1], X[i, 2], y[i])]
            )
    return path


@pytest.fixture(scope="session")
def fixture_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("fixture") / "synthetic.csv"
    return write_fixture_csv(path)
