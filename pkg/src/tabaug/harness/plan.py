"""Experiment plan: JSON schema, validation and dataset resolution."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..augment import CENTER_MODES, STRATEGIES
from ..datagen import GeneratorSpec, generate
from ..dataset import Dataset, load_csv
from ..errors import PlanError
from ..student import StudentSpec
from ..teacher import TeacherSpec

# harness-only strategy: student retrained on teacher-relabelled original rows
DISTILL_ONLY = "distill_only"
PLAN_STRATEGIES = STRATEGIES + (DISTILL_ONLY,)
STANDARD_GRID = (500, 1000, 5000, 10000, 50000)
FULL_TRAIN = "80%"
CAPPED_FULL_TRAIN = "50000 or 80%"

_PLAN_KEYS = {
    "dataset", "datasets", "strategies", "volumes", "train_sizes", "etas",
    "trials", "base_seed", "teacher", "student", "output_dir", "test_fraction",
    "noise_center_mode", "mixup_alpha", "cmixup_bandwidth", "record_timings",
}


@dataclass(frozen=True)
class DatasetSource:
    name: str
    csv_path: str | None = None
    target: str | None = None
    missing_policy: str = "drop_row"
    generator: GeneratorSpec | None = None

    def load(self, base_dir: Path | None = None) -> Dataset:
        if self.generator is not None:
            return generate(self.generator)
        path = Path(self.csv_path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_csv(path, self.target, self.missing_policy)

    def to_dict(self) -> dict:
        if self.generator is not None:
            g = self.generator
            gen = {"kind": g.kind, "n_rows": g.n_rows, "noise_sd": g.noise_sd,
                   "seed": g.seed, "n_features": g.n_features}
            if g.kind == "linear":
                gen.update(coefficients=list(g.coefficients), intercept=g.intercept)
            if g.kind == "piecewise":
                gen.update(breakpoint=g.breakpoint, slopes=list(g.slopes))
            return {"name": self.name, "generator": gen}
        return {"name": self.name, "csv_path": self.csv_path, "target": self.target,
                "missing_policy": self.missing_policy}


@dataclass(frozen=True)
class ExperimentPlan:
    datasets: tuple[DatasetSource, ...]
    strategies: tuple[str, ...] = ("teacher_noise",)
    volumes: tuple[int, ...] = (10000,)
    train_sizes: tuple[int | str, ...] = (FULL_TRAIN,)
    etas: tuple[float, ...] = (0.05,)
    trials: int = 10
    base_seed: int = 0
    teacher: TeacherSpec = field(default_factory=TeacherSpec)
    student: StudentSpec = field(default_factory=StudentSpec)
    output_dir: str = "results"
    test_fraction: float = 0.2
    noise_center_mode: str = "zero_mean"
    mixup_alpha: float = 1.0
    cmixup_bandwidth: float | None = None
    record_timings: bool = False
    base_dir: str | None = None

    def __post_init__(self):
        if not self.datasets:
            raise PlanError("plan needs at least one dataset")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise PlanError("dataset names must be unique")
        if not self.strategies:
            raise PlanError("plan needs at least one strategy")
        bad = [s for s in self.strategies if s not in PLAN_STRATEGIES]
        if bad:
            raise PlanError(f"unknown strategies {bad}; choose from {list(PLAN_STRATEGIES)}")
        if len(set(self.strategies)) != len(self.strategies):
            raise PlanError("duplicate strategies")
        if self.trials < 1:
            raise PlanError("trials must be >= 1")
        if self.base_seed < 0:
            raise PlanError("base_seed must be non-negative")
        if not self.volumes or any(not isinstance(v, int) or v <= 0 for v in self.volumes):
            raise PlanError("volumes must be a non-empty list of positive integers")
        if not self.etas or any(not (isinstance(e, (int, float)) and e > 0
                                     and math.isfinite(e)) for e in self.etas):
            raise PlanError("etas must be a non-empty list of positive numbers")
        if not self.train_sizes:
            raise PlanError("train_sizes must not be empty")
        for t in self.train_sizes:
            _check_train_size(t)
        if not 0 < self.test_fraction < 1:
            raise PlanError("test_fraction must lie in (0, 1)")
        if self.noise_center_mode not in CENTER_MODES:
            raise PlanError(f"noise_center_mode must be one of {CENTER_MODES}")

    def with_overrides(self, seed=None, trials=None, output_dir=None) -> "ExperimentPlan":
        kw = {}
        if seed is not None:
            kw["base_seed"] = seed
        if trials is not None:
            kw["trials"] = trials
        if output_dir is not None:
            kw["output_dir"] = str(output_dir)
        return replace(self, **kw) if kw else self

    def load_datasets(self) -> list[tuple[str, Dataset]]:
        base = Path(self.base_dir) if self.base_dir else None
        return [(src.name, src.load(base)) for src in self.datasets]

    def to_dict(self) -> dict:
        return {
            "datasets": [d.to_dict() for d in self.datasets],
            "strategies": list(self.strategies), "volumes": list(self.volumes),
            "train_sizes": list(self.train_sizes), "etas": list(self.etas),
            "trials": self.trials, "base_seed": self.base_seed,
            "teacher": self.teacher.to_dict(), "student": self.student.to_dict(),
            "test_fraction": self.test_fraction,
            "noise_center_mode": self.noise_center_mode,
            "mixup_alpha": self.mixup_alpha,
            "cmixup_bandwidth": self.cmixup_bandwidth,
            "record_timings": self.record_timings,
        }


_PERCENT = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*%\s*$")
_CAPPED = re.compile(r"^\s*(\d+)\s+or\s+(\d+(?:\.\d+)?)\s*%\s*$")


def _check_train_size(token):
    if isinstance(token, bool):
        raise PlanError(f"invalid train size {token!r}")
    if isinstance(token, int):
        if token <= 0:
            raise PlanError("train sizes must be positive")
        return
    if isinstance(token, str) and (_PERCENT.match(token) or _CAPPED.match(token)):
        pct = float((_PERCENT.match(token) or _CAPPED.match(token)).groups()[-1])
        if not 0 < pct <= 100:
            raise PlanError(f"train size percentage out of range: {token!r}")
        return
    raise PlanError(f"invalid train size {token!r}; use an integer, 'P%' or 'N or P%'")


def resolve_train_size(token, n_rows: int, n_train: int) -> int | None:
    """Translate a train-size grid token into a row count, or None if infeasible.

    ``"P%"`` is P percent of the whole dataset, capped at the train
    partition (so "80%" with a 20% test split is the full partition).
    ``"N or P%"`` is the smaller of N and the "P%" size.
    """
    if isinstance(token, int):
        return token if token <= n_train else None
    m = _CAPPED.match(token)
    if m:
        cap, pct = int(m.group(1)), float(m.group(2))
        return min(cap, min(int(math.floor(pct / 100.0 * n_rows + 0.5)), n_train))
    pct = float(_PERCENT.match(token).group(1))
    return max(1, min(int(math.floor(pct / 100.0 * n_rows + 0.5)), n_train))


def _dataset_source(d, i) -> DatasetSource:
    if not isinstance(d, dict):
        raise PlanError("each dataset entry must be an object")
    name = d.get("name") or f"dataset{i}"
    if ("csv_path" in d) == ("generator" in d):
        raise PlanError(f"dataset {name!r} needs exactly one of csv_path / generator")
    if "generator" in d:
        try:
            return DatasetSource(name=name, generator=GeneratorSpec.from_dict(d["generator"]))
        except (TypeError, ValueError) as exc:
            raise PlanError(f"dataset {name!r}: bad generator: {exc}") from None
    if not d.get("target"):
        raise PlanError(f"dataset {name!r}: csv datasets need a 'target' column")
    return DatasetSource(name=name, csv_path=str(d["csv_path"]), target=d["target"],
                         missing_policy=d.get("missing_policy", "drop_row"))


def plan_from_dict(raw: dict, base_dir: str | None = None) -> ExperimentPlan:
    if not isinstance(raw, dict):
        raise PlanError("plan must be a JSON object")
    unknown = set(raw) - _PLAN_KEYS
    if unknown:
        raise PlanError(f"unknown plan keys {sorted(unknown)}")
    if "datasets" in raw:
        entries = raw["datasets"]
        if not isinstance(entries, list):
            raise PlanError("'datasets' must be a list")
    elif "dataset" in raw:
        entries = [raw["dataset"]]
    else:
        raise PlanError("plan needs a 'dataset' (or 'datasets') entry")
    sources = tuple(_dataset_source(d, i) for i, d in enumerate(entries))

    kw = {}
    for key in ("strategies", "volumes", "train_sizes", "etas"):
        if key in raw:
            if not isinstance(raw[key], list):
                raise PlanError(f"'{key}' must be a list")
            kw[key] = tuple(raw[key])
    if "etas" in kw:
        kw["etas"] = tuple(float(e) if isinstance(e, (int, float)) and not isinstance(e, bool)
                           else e for e in kw["etas"])
    for key in ("trials", "base_seed", "output_dir", "test_fraction",
                "noise_center_mode", "mixup_alpha", "cmixup_bandwidth",
                "record_timings"):
        if key in raw:
            kw[key] = raw[key]
    for key in ("trials", "base_seed"):
        if key in kw and (isinstance(kw[key], bool) or not isinstance(kw[key], int)):
            raise PlanError(f"'{key}' must be an integer")
    try:
        if "teacher" in raw:
            kw["teacher"] = TeacherSpec.from_dict(raw["teacher"])
        if "student" in raw:
            kw["student"] = StudentSpec.from_dict(raw["student"])
    except (TypeError, ValueError) as exc:
        raise PlanError(f"bad model spec: {exc}") from None
    try:
        return ExperimentPlan(datasets=sources, base_dir=base_dir, **kw)
    except TypeError as exc:
        raise PlanError(f"invalid plan value: {exc}") from None


def load_plan(path) -> ExperimentPlan:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise PlanError(f"plan file not found: {path}") from None
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PlanError(f"cannot parse plan {path}: {exc}") from None
    return plan_from_dict(raw, base_dir=str(path.parent.resolve()))
