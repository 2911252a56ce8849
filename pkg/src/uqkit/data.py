"""Dataset container, CSV/JSON ingestion, and deterministic split plans."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyDataset,
    MissingColumn,
    TooFewSamples,
    UnparseableNumeric,
)

TWOWAY_FRACTIONS = (0.9, 0.1)
THREEWAY_FRACTIONS = (0.45, 0.45, 0.10)


@dataclass(frozen=True)
class Dataset:
    """Immutable id-indexed feature matrix with a target vector.

    All rows are finite after construction; ingestion drops non-finite rows
    and records how many in ``n_dropped``.
    """

    ids: tuple
    feature_names: tuple
    features: np.ndarray
    targets: np.ndarray
    unit: str = ""
    n_dropped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        features = np.asarray(self.features, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        features.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        n, d = features.shape if features.ndim == 2 else (len(features), 0)
        if len(self.ids) != n or len(targets) != n:
            raise LengthError(f"ids/features/targets disagree: {len(self.ids)}/{n}/{len(targets)}")
        if len(self.feature_names) != d:
            raise LengthError(f"{len(self.feature_names)} feature names for {d} columns")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise LengthError("feature names are not unique")
        if n and (not np.isfinite(features).all() or not np.isfinite(targets).all()):
            raise LengthError("non-finite values survived ingestion")

    @property
    def n(self) -> int:
        return len(self.targets)

    @property
    def d(self) -> int:
        return len(self.feature_names)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(
            ids=tuple(self.ids[i] for i in idx),
            feature_names=self.feature_names,
            features=self.features[idx],
            targets=self.targets[idx],
            unit=self.unit,
        )


class LengthError(EmptyDataset):
    """Internal invariant violation while assembling a Dataset."""


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint index partitions produced by a seeded permutation."""

    kind: str  # "twoway" | "threeway"
    fractions: tuple
    seed: int
    partitions: tuple  # tuple of index tuples

    def __post_init__(self):
        object.__setattr__(
            self, "partitions", tuple(tuple(int(i) for i in p) for p in self.partitions)
        )

    @property
    def sizes(self) -> tuple:
        return tuple(len(p) for p in self.partitions)


def _parse_number(token: str, row: int, col: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise UnparseableNumeric(row, col, token) from None


def _from_rows(ids, feature_names, rows, targets, unit) -> Dataset:
    features = np.asarray(rows, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if features.size == 0:
        raise EmptyDataset("no data rows")
    keep = np.isfinite(features).all(axis=1) & np.isfinite(targets)
    dropped = int(len(targets) - keep.sum())
    if keep.sum() == 0:
        raise EmptyDataset("all rows contain non-finite values")
    kept_ids = tuple(i for i, k in zip(ids, keep) if k)
    return Dataset(
        ids=kept_ids,
        feature_names=tuple(feature_names),
        features=features[keep],
        targets=targets[keep],
        unit=unit,
        n_dropped=dropped,
    )


def load_dataset(path, target_column: str, id_column: str, unit: str = "") -> Dataset:
    """Load a CSV (or ``.json``) file into a Dataset.

    CSV: UTF-8, one header row, the id column holds strings and every other
    column holds decimal reals (scientific notation accepted). Rows with
    NaN/Inf anywhere are dropped and counted in ``Dataset.n_dropped``.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        return _load_json(path, unit)

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        if id_column not in header:
            raise MissingColumn(id_column)
        if target_column not in header:
            raise MissingColumn(target_column)
        id_pos = header.index(id_column)
        target_pos = header.index(target_column)
        feature_names = [c for c in header if c not in (id_column, target_column)]
        feature_pos = [i for i, c in enumerate(header) if c not in (id_column, target_column)]

        ids, rows, targets = [], [], []
        for r, record in enumerate(reader, start=1):
            if not record:
                continue
            ids.append(record[id_pos])
            targets.append(_parse_number(record[target_pos], r, target_column))
            rows.append(
                [_parse_number(record[i], r, header[i]) for i in feature_pos]
            )
    return _from_rows(ids, feature_names, rows, targets, unit)


def _load_json(path: Path, unit: str) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("ids", "feature_names", "features", "targets"):
        if key not in doc:
            raise MissingColumn(key)
    return _from_rows(
        doc["ids"],
        doc["feature_names"],
        doc["features"],
        doc["targets"],
        doc.get("unit", unit),
    )


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def make_split(n: int, kind: str, seed: int) -> SplitPlan:
    """Deterministic disjoint partition of ``range(n)``.

    ``twoway`` yields 90/10 train/test; ``threeway`` yields 45/45/10 where
    the third partition has exactly round(0.10*n) elements so its size
    matches the two-way test set.
    """
    if n < 10:
        raise TooFewSamples(f"need n >= 10, got {n}")
    kind = kind.lower()
    if kind not in ("twoway", "threeway"):
        raise ValueError(f"unknown split kind {kind!r}")

    perm = np.random.default_rng(seed).permutation(n)
    if kind == "twoway":
        fractions = TWOWAY_FRACTIONS
        n_test = _half_up(0.10 * n)
        cuts = [n - n_test]
    else:
        fractions = THREEWAY_FRACTIONS
        n_test = _half_up(0.10 * n)
        n_first = _half_up(0.45 * n)
        cuts = [n_first, n - n_test]
    parts = np.split(perm, cuts)
    return SplitPlan(kind=kind, fractions=fractions, seed=int(seed), partitions=tuple(tuple(int(i) for i in p) for p in parts))
