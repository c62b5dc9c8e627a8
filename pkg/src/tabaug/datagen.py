"""Synthetic regression problems with a known ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset

GENERATOR_KINDS = ("friedman1", "linear", "piecewise")


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of a synthetic problem.

    ``coefficients`` is used by ``linear`` (one weight per feature, plus
    ``intercept``). ``piecewise`` is a one-feature hinge: slope
    ``slopes[0]`` left of ``breakpoint`` and ``slopes[1]`` right of it,
    continuous at the breakpoint. Features are uniform on [0, 1] except for
    ``linear``, which draws them from a standard normal.
    """

    kind: str = "friedman1"
    n_rows: int = 1000
    noise_sd: float = 1.0
    seed: int = 0
    n_features: int = 10
    coefficients: tuple[float, ...] = ()
    intercept: float = 0.0
    breakpoint: float = 0.5
    slopes: tuple[float, float] = (1.0, -1.0)

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.n_rows < 1:
            raise ValueError("n_rows must be >= 1")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.kind == "friedman1" and self.n_features < 5:
            raise ValueError("friedman1 needs at least 5 features")
        if self.kind == "linear" and not self.coefficients:
            raise ValueError("linear generator needs coefficients")
        if len(self.slopes) != 2:
            raise ValueError("piecewise generator needs exactly two slopes")

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        d = dict(d)
        if "coefficients" in d:
            d["coefficients"] = tuple(float(c) for c in d["coefficients"])
            d.setdefault("n_features", len(d["coefficients"]))
        if "slopes" in d:
            d["slopes"] = tuple(float(s) for s in d["slopes"])
        if d.get("kind") == "piecewise":
            d.setdefault("n_features", 1)
        return cls(**d)


def friedman1(X: np.ndarray) -> np.ndarray:
    return (10 * np.sin(np.pi * X[:, 0] * X[:, 1]) + 20 * (X[:, 2] - 0.5) ** 2
            + 10 * X[:, 3] + 5 * X[:, 4])


def ground_truth(spec: GeneratorSpec, X: np.ndarray) -> np.ndarray:
    """Noise-free target of ``spec`` evaluated at ``X``."""
    if spec.kind == "friedman1":
        return friedman1(X)
    if spec.kind == "linear":
        return X @ np.asarray(spec.coefficients, dtype=np.float64) + spec.intercept
    left, right = spec.slopes
    d = X[:, 0] - spec.breakpoint
    return np.where(d < 0, left * d, right * d)


def generate(spec: GeneratorSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "linear":
        n_features = len(spec.coefficients)
        X = rng.standard_normal((spec.n_rows, n_features))
    else:
        n_features = spec.n_features
        X = rng.uniform(0.0, 1.0, size=(spec.n_rows, n_features))
    y = ground_truth(spec, X)
    if spec.noise_sd > 0:
        y = y + rng.normal(0.0, spec.noise_sd, size=spec.n_rows)
    names = tuple(f"x{i + 1}" for i in range(n_features))
    return Dataset(X, y, names, "y")
