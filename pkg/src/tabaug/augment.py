"""Synthetic-row generators.

``teacher_noise`` is the main method: jitter sampled training rows with
per-column Gaussian noise and let a fitted teacher label them.
``naive_noise`` applies the same jitter but keeps the source row's label.
``mixup`` and ``cmixup`` interpolate pairs of rows; C-Mixup picks the
partner with a Gaussian kernel on label distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import ColumnStats, Dataset, compute_column_stats, concat
from .errors import DataError, NotFittedError
from .teacher import TrainedTeacher, teacher_predict

STRATEGIES = ("teacher_noise", "naive_noise", "mixup", "cmixup", "none")
CENTER_MODES = ("zero_mean", "column_mean")


@dataclass(frozen=True)
class AugmentationConfig:
    strategy: str = "teacher_noise"
    volume: int = 10000
    noise_fraction: float = 0.05
    noise_center_mode: str = "zero_mean"
    mixup_alpha: float = 1.0
    # None means "sample std of the training target"
    cmixup_bandwidth: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.volume < 0:
            raise ValueError("volume must be >= 0")
        if not self.noise_fraction >= 0:
            raise ValueError("noise_fraction must be >= 0")
        if self.noise_center_mode not in CENTER_MODES:
            raise ValueError(f"unknown noise_center_mode {self.noise_center_mode!r}")
        if not self.mixup_alpha > 0:
            raise ValueError("mixup_alpha must be > 0")
        if self.cmixup_bandwidth is not None and not self.cmixup_bandwidth > 0:
            raise ValueError("cmixup_bandwidth must be > 0")


@dataclass(frozen=True)
class SyntheticSet:
    """Generated rows plus where they came from.

    ``sources`` has shape (V, 2); the second column is -1 for the
    single-source noise strategies. ``mix`` holds the mixing weight of the
    first source (NaN when no mixing happened).
    """

    features: np.ndarray
    labels: np.ndarray
    sources: np.ndarray = field(repr=False)
    mix: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.features.shape[0]
        if not (self.labels.shape == (n,) and self.sources.shape == (n, 2)
                and self.mix.shape == (n,)):
            raise DataError("synthetic set components disagree on row count")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.labels))):
            raise DataError("synthetic set contains non-finite values")

    def __len__(self):
        return self.features.shape[0]

    def provenance_labels(self) -> list[str]:
        out = []
        for i, j in self.sources:
            out.append(str(i) if j < 0 else f"{i};{j}")
        return out


def _empty(n_features: int) -> SyntheticSet:
    return SyntheticSet(np.empty((0, n_features)), np.empty(0),
                        np.empty((0, 2), dtype=np.int64), np.empty(0))


def _jitter(train: Dataset, stats: ColumnStats, config: AugmentationConfig):
    if stats.means.shape[0] != train.n_features or stats.stds.shape[0] != train.n_features:
        raise DataError("column stats do not match the training features")
    rng = np.random.default_rng(config.seed)
    V = config.volume
    src = rng.integers(0, train.n_rows, size=V)
    scale = config.noise_fraction * stats.stds
    noise = rng.standard_normal((V, train.n_features)) * scale
    if config.noise_center_mode == "column_mean":
        noise += stats.means
    return src, train.features[src] + noise


def generate_teacher_noise(train: Dataset, stats: ColumnStats,
                           config: AugmentationConfig,
                           teacher: TrainedTeacher) -> SyntheticSet:
    if teacher is None or getattr(teacher, "model", None) is None:
        raise NotFittedError("teacher_noise needs a fitted teacher")
    if teacher.n_features != train.n_features:
        raise DataError(
            f"teacher expects {teacher.n_features} features, train has {train.n_features}")
    if config.volume == 0:
        return _empty(train.n_features)
    src, X = _jitter(train, stats, config)
    y = teacher_predict(teacher, X)
    return SyntheticSet(X, y, np.column_stack([src, np.full_like(src, -1)]),
                        np.full(len(src), np.nan))


def generate_naive_noise(train: Dataset, stats: ColumnStats,
                         config: AugmentationConfig) -> SyntheticSet:
    if config.volume == 0:
        return _empty(train.n_features)
    src, X = _jitter(train, stats, config)
    return SyntheticSet(X, train.target[src].copy(),
                        np.column_stack([src, np.full_like(src, -1)]),
                        np.full(len(src), np.nan))


def convex_mix(train: Dataset, i, j, lam):
    """Return ``lam * row_i + (1 - lam) * row_j`` for features and target."""
    i = np.asarray(i)
    j = np.asarray(j)
    lam = np.asarray(lam, dtype=np.float64)
    X = lam[:, None] * train.features[i] + (1.0 - lam)[:, None] * train.features[j]
    y = lam * train.target[i] + (1.0 - lam) * train.target[j]
    return X, y


def generate_mixup(train: Dataset, config: AugmentationConfig) -> SyntheticSet:
    if train.n_rows < 2:
        raise DataError("mixup needs at least 2 training rows")
    if config.volume == 0:
        return _empty(train.n_features)
    rng = np.random.default_rng(config.seed)
    V = config.volume
    i = rng.integers(0, train.n_rows, size=V)
    j = rng.integers(0, train.n_rows, size=V)
    lam = rng.beta(config.mixup_alpha, config.mixup_alpha, size=V)
    X, y = convex_mix(train, i, j, lam)
    return SyntheticSet(X, y, np.column_stack([i, j]), lam)


def cmixup_partners(targets: np.ndarray, anchors: np.ndarray, bandwidth: float,
                    rng: np.random.Generator, chunk: int = 512) -> np.ndarray:
    """Draw a partner j != i for each anchor i with P(j) ~ exp(-(y_i-y_j)^2 / 2h^2)."""
    n = targets.shape[0]
    u = 1.0 - rng.random(anchors.shape[0])  # in (0, 1], so the target mass is > 0
    out = np.empty(anchors.shape[0], dtype=np.int64)
    cols = np.arange(n)
    for start in range(0, anchors.shape[0], chunk):
        a = anchors[start:start + chunk]
        d = targets[a][:, None] - targets[None, :]
        logw = -(d * d) / (2.0 * bandwidth * bandwidth)
        logw[cols[None, :] == a[:, None]] = -np.inf
        logw -= logw.max(axis=1, keepdims=True)
        cdf = np.cumsum(np.exp(logw), axis=1)
        goal = u[start:start + chunk] * cdf[:, -1]
        j = np.sum(cdf < goal[:, None], axis=1)
        out[start:start + chunk] = np.minimum(j, n - 1)
    return out


def generate_cmixup(train: Dataset, config: AugmentationConfig) -> SyntheticSet:
    if train.n_rows < 2:
        raise DataError("C-Mixup needs at least 2 training rows")
    bandwidth = config.cmixup_bandwidth
    if bandwidth is None:
        bandwidth = float(np.std(train.target, ddof=1)) or 1.0
    if not bandwidth > 0:
        raise ValueError("cmixup bandwidth must be > 0")
    if config.volume == 0:
        return _empty(train.n_features)
    rng = np.random.default_rng(config.seed)
    V = config.volume
    i = rng.integers(0, train.n_rows, size=V)
    lam = rng.beta(config.mixup_alpha, config.mixup_alpha, size=V)
    j = cmixup_partners(train.target, i, bandwidth, rng)
    X, y = convex_mix(train, i, j, lam)
    return SyntheticSet(X, y, np.column_stack([i, j]), lam)


def augment(train: Dataset, config: AugmentationConfig,
            teacher: TrainedTeacher | None = None,
            stats: ColumnStats | None = None) -> SyntheticSet:
    """Dispatch on ``config.strategy``."""
    if config.strategy == "none":
        return _empty(train.n_features)
    if config.strategy in ("teacher_noise", "naive_noise") and stats is None:
        stats = compute_column_stats(train)
    if config.strategy == "teacher_noise":
        return generate_teacher_noise(train, stats, config, teacher)
    if config.strategy == "naive_noise":
        return generate_naive_noise(train, stats, config)
    if config.strategy == "mixup":
        return generate_mixup(train, config)
    return generate_cmixup(train, config)


def combine(train: Dataset, synth: SyntheticSet) -> Dataset:
    """Original rows first, then synthetic rows."""
    if synth.features.shape[1] != train.n_features:
        raise DataError(
            f"feature count mismatch: {train.n_features} vs {synth.features.shape[1]}")
    return concat(train, Dataset(synth.features, synth.labels,
                                 train.feature_names, train.target_name))
