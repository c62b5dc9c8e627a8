"""Tabular dataset container, CSV ingestion, splitting and scaling."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, NotFittedError

MISSING_POLICIES = ("drop_row", "error")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus regression target.

    Arrays are copied to float64 and marked read-only on construction.
    """

    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...] = ()
    target_name: str = "y"

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, copy=True)
        y = np.array(self.target, dtype=np.float64, copy=True).reshape(-1)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise DataError(
                f"features have {X.shape[0]} rows but target has {y.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        names = tuple(self.feature_names) or tuple(f"x{i}" for i in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError(
                f"{len(names)} feature names for {X.shape[1]} feature columns")
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def take(self, indices) -> "Dataset":
        """Return the rows at ``indices`` (in that order) as a new dataset."""
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.features[idx], self.target[idx],
                       self.feature_names, self.target_name)

    def with_target(self, target) -> "Dataset":
        return Dataset(self.features, target, self.feature_names, self.target_name)


@dataclass(frozen=True)
class ColumnStats:
    means: np.ndarray
    stds: np.ndarray


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(
                f"test_fraction must lie strictly in (0, 1), got {self.test_fraction}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class Standardizer:
    shift: np.ndarray | None = None
    scale: np.ndarray | None = None

    @property
    def fitted(self) -> bool:
        return self.shift is not None


def _parse_cell(text: str) -> float:
    text = text.strip()
    if text == "":
        return math.nan
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def load_csv(path, target_column: str, missing_policy: str = "drop_row") -> Dataset:
    """Read a numeric CSV file with a header row.

    Empty cells count as missing. Under ``drop_row`` any row with a missing
    cell is skipped; under ``error`` it raises. Non-numeric cells always
    raise, since categorical columns are not supported.
    """
    if missing_policy not in MISSING_POLICIES:
        raise ValueError(f"unknown missing_policy {missing_policy!r}")
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        if target_column not in header:
            raise DataError(
                f"target column {target_column!r} not in header of {path}")
        if len(set(header)) != len(header):
            raise DataError(f"duplicate column names in header of {path}")
        t_idx = header.index(target_column)

        rows = []
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(record)}")
            try:
                values = [_parse_cell(cell) for cell in record]
            except ValueError as exc:
                raise DataError(
                    f"{path}:{lineno}: non-numeric cell ({exc}); "
                    "categorical columns are not supported") from None
            if any(math.isnan(v) for v in values):
                if missing_policy == "error":
                    raise DataError(f"{path}:{lineno}: missing value")
                continue
            rows.append(values)

    if not rows:
        raise DataError(f"{path} has no usable rows")
    table = np.asarray(rows, dtype=np.float64)
    feature_idx = [i for i in range(len(header)) if i != t_idx]
    return Dataset(table[:, feature_idx], table[:, t_idx],
                   tuple(header[i] for i in feature_idx), target_column)


def write_csv(data: Dataset, path, extra_column: tuple[str, Sequence[str]] | None = None):
    """Write ``data`` as CSV (features then target, plus an optional text column)."""
    header = list(data.feature_names) + [data.target_name]
    if extra_column is not None:
        header.append(extra_column[0])
        extra = list(extra_column[1])
        if len(extra) != data.n_rows:
            raise DataError("extra column length does not match row count")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(data.n_rows):
            row = [repr(float(v)) for v in data.features[i]]
            row.append(repr(float(data.target[i])))
            if extra_column is not None:
                row.append(extra[i])
            writer.writerow(row)


def compute_column_stats(data: Dataset) -> ColumnStats:
    """Per-column mean and sample standard deviation (n-1 denominator).

    The std is 0 for a single row or a constant column.
    """
    if data.n_rows < 1:
        raise DataError("cannot compute column statistics of an empty dataset")
    X = data.features
    means = X.mean(axis=0)
    if data.n_rows == 1:
        stds = np.zeros(data.n_features)
    else:
        stds = X.std(axis=0, ddof=1)
        # exactly-constant columns can pick up rounding noise in the mean
        stds[np.all(X == X[0], axis=0)] = 0.0
    return ColumnStats(means=means, stds=stds)


def _test_size(n_rows: int, test_fraction: float) -> int:
    # round half up, then keep both sides non-empty
    size = int(math.floor(test_fraction * n_rows + 0.5))
    return min(max(size, 1), n_rows - 1)


def split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Shuffle rows with ``spec.seed`` and cut off a test partition."""
    if data.n_rows < 2:
        raise DataError("need at least 2 rows to split")
    n_test = _test_size(data.n_rows, spec.test_fraction)
    perm = np.random.default_rng(spec.seed).permutation(data.n_rows)
    return data.take(perm[n_test:]), data.take(perm[:n_test])


def subsample(data: Dataset, n: int, seed: int) -> Dataset:
    """Draw ``n`` distinct rows uniformly at random."""
    if not 1 <= n <= data.n_rows:
        raise DataError(f"cannot subsample {n} rows from {data.n_rows}")
    idx = np.random.default_rng(seed).choice(data.n_rows, size=n, replace=False)
    return data.take(idx)


def fit_standardizer(train: Dataset) -> Standardizer:
    if train.n_rows < 1:
        raise DataError("cannot fit a standardizer on an empty dataset")
    stats = compute_column_stats(train)
    scale = stats.stds.copy()
    scale[scale == 0] = 1.0
    return Standardizer(shift=stats.means, scale=scale)


def _check_fitted(s: Standardizer, n_features: int):
    if not s.fitted:
        raise NotFittedError("standardizer has not been fitted")
    if n_features != s.shift.shape[0]:
        raise DataError(
            f"standardizer fitted on {s.shift.shape[0]} features, got {n_features}")


def standardize(s: Standardizer, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    _check_fitted(s, X.shape[1])
    return (X - s.shift) / s.scale


def unstandardize(s: Standardizer, Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    _check_fitted(s, Z.shape[1])
    return Z * s.scale + s.shift


def apply_standardizer(s: Standardizer, data: Dataset) -> Dataset:
    return Dataset(standardize(s, data.features), data.target,
                   data.feature_names, data.target_name)


def invert_standardizer(s: Standardizer, data: Dataset) -> Dataset:
    return Dataset(unstandardize(s, data.features), data.target,
                   data.feature_names, data.target_name)


def concat(first: Dataset, second: Dataset) -> Dataset:
    if first.n_features != second.n_features:
        raise DataError(
            f"feature count mismatch: {first.n_features} vs {second.n_features}")
    return Dataset(np.vstack([first.features, second.features]),
                   np.concatenate([first.target, second.target]),
                   first.feature_names, first.target_name)
