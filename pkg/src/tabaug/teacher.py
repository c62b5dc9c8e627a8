"""Teacher model: grid search with k-fold CV over classical regressors.

The teacher labels synthetic rows. It plays the part of an AutoML system,
reduced to an exhaustive search over three model families so the choice is
deterministic and cheap.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from sklearn.ensemble import RandomForestRegressor

from .dataset import Dataset, Standardizer, fit_standardizer, standardize
from .errors import DataError, FitError

log = logging.getLogger(__name__)

CANDIDATES = ("ridge", "knn", "random_forest")
_MAX_SEED = 2**31 - 1


@dataclass(frozen=True)
class TeacherSpec:
    candidates: tuple[str, ...] = CANDIDATES
    cv_folds: int = 5
    seed: int = 0
    ridge_lambdas: tuple[float, ...] = (1e-4, 1e-2, 1.0)
    knn_ks: tuple[int, ...] = (3, 5, 10)
    forest_n_trees: int = 100
    forest_max_depth: int | None = None
    forest_min_leaf: tuple[int, ...] = (1, 5)
    # fraction of features tried at each split
    forest_max_features: float = 1.0 / 3.0
    forest_bootstrap: bool = True

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("teacher needs at least one candidate")
        unknown = set(self.candidates) - set(CANDIDATES)
        if unknown:
            raise ValueError(f"unknown teacher candidates {sorted(unknown)}")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        grids = {"ridge": self.ridge_lambdas, "knn": self.knn_ks,
                 "random_forest": self.forest_min_leaf}
        for name in self.candidates:
            if not grids[name]:
                raise ValueError(f"empty hyperparameter grid for {name}")
        if any(lam <= 0 for lam in self.ridge_lambdas):
            raise ValueError("ridge lambdas must be > 0")
        if any(k < 1 for k in self.knn_ks):
            raise ValueError("knn k must be >= 1")
        if self.forest_n_trees < 1:
            raise ValueError("forest_n_trees must be >= 1")
        if not 0.0 < self.forest_max_features <= 1.0:
            raise ValueError("forest_max_features must be in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "TeacherSpec":
        d = dict(d)
        for key in ("candidates", "ridge_lambdas", "knn_ks", "forest_min_leaf"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "candidates": list(self.candidates), "cv_folds": self.cv_folds,
            "seed": self.seed, "ridge_lambdas": list(self.ridge_lambdas),
            "knn_ks": list(self.knn_ks), "forest_n_trees": self.forest_n_trees,
            "forest_max_depth": self.forest_max_depth,
            "forest_min_leaf": list(self.forest_min_leaf),
            "forest_max_features": self.forest_max_features,
            "forest_bootstrap": self.forest_bootstrap,
        }

    def grid(self, name: str) -> list[dict]:
        """Hyperparameter combinations for one candidate, lexicographically sorted."""
        if name == "ridge":
            return [{"lam": lam} for lam in sorted(self.ridge_lambdas)]
        if name == "knn":
            return [{"k": k} for k in sorted(self.knn_ks)]
        return [{"min_leaf": m, "n_trees": self.forest_n_trees,
                 "max_depth": self.forest_max_depth,
                 "max_features": self.forest_max_features,
                 "bootstrap": self.forest_bootstrap}
                for m in sorted(self.forest_min_leaf)]


class RidgeModel:
    """Penalized least squares on standardized features with a free intercept."""

    def __init__(self, scaler: Standardizer, coef: np.ndarray, intercept: float):
        self.scaler = scaler
        self.coef = coef
        self.intercept = intercept

    def predict(self, X):
        return standardize(self.scaler, X) @ self.coef + self.intercept


class KNNModel:
    def __init__(self, scaler: Standardizer, Z: np.ndarray, y: np.ndarray, k: int):
        self.scaler = scaler
        self.Z = Z
        self.y = y
        self.k = k
        self._sq_norms = np.einsum("ij,ij->i", Z, Z)

    def predict(self, X, chunk: int = 256):
        Q = standardize(self.scaler, X)
        out = np.empty(Q.shape[0])
        for start in range(0, Q.shape[0], chunk):
            q = Q[start:start + chunk]
            d2 = (np.einsum("ij,ij->i", q, q)[:, None] + self._sq_norms[None, :]
                  - 2.0 * q @ self.Z.T)
            if self.k == 1:
                nearest = np.argmin(d2, axis=1)[:, None]
            else:
                nearest = np.argpartition(d2, self.k - 1, axis=1)[:, :self.k]
            out[start:start + chunk] = self.y[nearest].mean(axis=1)
        return out


class ForestModel:
    def __init__(self, estimator: RandomForestRegressor):
        self.estimator = estimator

    def predict(self, X):
        return self.estimator.predict(np.asarray(X, dtype=np.float64))


def ridge_fit(train: Dataset, lam: float) -> RidgeModel:
    if lam <= 0:
        raise ValueError("ridge requires lambda > 0")
    scaler = fit_standardizer(train)
    Z = standardize(scaler, train.features)
    y_mean = float(train.target.mean())
    A = Z.T @ Z + lam * np.eye(Z.shape[1])
    coef = np.linalg.solve(A, Z.T @ (train.target - y_mean))
    return RidgeModel(scaler, coef, y_mean)


def knn_fit(train: Dataset, k: int) -> KNNModel:
    if not 1 <= k <= train.n_rows:
        raise ValueError(f"k={k} is invalid for {train.n_rows} training rows")
    scaler = fit_standardizer(train)
    return KNNModel(scaler, standardize(scaler, train.features),
                    train.target.copy(), k)


def forest_fit(train: Dataset, n_trees: int = 100, min_leaf: int = 1,
               max_depth: int | None = None, max_features: float = 1.0 / 3.0,
               bootstrap: bool = True, seed: int = 0) -> ForestModel:
    """Bagged CART regression trees with per-split feature subsampling."""
    est = RandomForestRegressor(
        n_estimators=n_trees, criterion="squared_error", max_depth=max_depth,
        min_samples_leaf=min_leaf, max_features=max_features,
        bootstrap=bootstrap, random_state=seed, n_jobs=1)
    est.fit(train.features, train.target)
    return ForestModel(est)


def _fit_candidate(name: str, params: dict, train: Dataset, seed: int):
    if name == "ridge":
        return ridge_fit(train, params["lam"])
    if name == "knn":
        return knn_fit(train, params["k"])
    return forest_fit(train, n_trees=params["n_trees"], min_leaf=params["min_leaf"],
                      max_depth=params["max_depth"],
                      max_features=params["max_features"],
                      bootstrap=params["bootstrap"], seed=seed)


def _derive_seed(*key: int) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0]) % _MAX_SEED


def kfold_indices(n_rows: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded permutation cut into ``k`` near-equal folds."""
    perm = np.random.default_rng(seed).permutation(n_rows)
    return np.array_split(perm, k)


@dataclass(frozen=True)
class TrainedTeacher:
    name: str
    params: dict[str, Any]
    model: Any = field(repr=False)
    cv_rmse: float
    train_target_range: tuple[float, float]
    n_features: int
    cv_scores: tuple[tuple[str, str, float], ...] = ()

    def summary(self) -> str:
        shown = {k: v for k, v in self.params.items()
                 if k in ("lam", "k", "min_leaf")}
        inner = ",".join(f"{k}={v}" for k, v in shown.items())
        return f"{self.name}({inner})"


def fit_teacher(train: Dataset, spec: TeacherSpec) -> TrainedTeacher:
    """Score every (candidate, hyperparameters) pair by k-fold CV RMSE.

    The winner (first in declared order on ties) is refitted on all of
    ``train``.
    """
    if train.n_rows < spec.cv_folds:
        raise DataError(
            f"{train.n_rows} rows is too few for {spec.cv_folds}-fold CV")
    folds = kfold_indices(train.n_rows, spec.cv_folds, spec.seed)
    all_idx = np.arange(train.n_rows)

    best = None
    scores = []
    combo_id = 0
    for name in spec.candidates:
        for params in spec.grid(name):
            combo_id += 1
            oof = np.empty(train.n_rows)
            try:
                for f, test_idx in enumerate(folds):
                    fit_idx = np.setdiff1d(all_idx, test_idx, assume_unique=True)
                    model = _fit_candidate(name, params, train.take(fit_idx),
                                           _derive_seed(spec.seed, combo_id, f))
                    oof[test_idx] = model.predict(train.features[test_idx])
            except (ValueError, np.linalg.LinAlgError) as exc:
                log.debug("teacher candidate %s %s failed: %s", name, params, exc)
                continue
            score = float(np.sqrt(np.mean((oof - train.target) ** 2)))
            if not np.isfinite(score):
                continue
            scores.append((name, repr(params), score))
            log.debug("teacher %s %s cv_rmse=%.6g", name, params, score)
            if best is None or score < best[2]:
                best = (name, params, score, combo_id)

    if best is None:
        raise FitError("all teacher candidates failed to fit")
    name, params, score, combo_id = best
    model = _fit_candidate(name, params, train,
                           _derive_seed(spec.seed, combo_id, spec.cv_folds))
    return TrainedTeacher(
        name=name, params=dict(params), model=model, cv_rmse=score,
        train_target_range=(float(train.target.min()), float(train.target.max())),
        n_features=train.n_features, cv_scores=tuple(scores))


def teacher_predict(model: TrainedTeacher, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(
            f"teacher expects {model.n_features} features, got shape {X.shape}")
    if X.shape[0] == 0:
        return np.empty(0)
    return np.asarray(model.model.predict(X), dtype=np.float64)
