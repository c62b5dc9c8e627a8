"""One repetition of the augmentation pipeline.

A *trial group* is (dataset, train size, trial index). Everything that does
not depend on the augmentation cell (split, subsample, teacher, baseline
student) is computed once per group and shared by every (strategy, volume,
eta) cell, so all cells of a group are paired on identical data.

Seed derivation: trial ``i`` uses ``seed = base_seed + i``. Each stage draws
from ``SeedSequence([seed, stage, ...])`` keyed on the stage code and the
quantities that identify it, so adding trials, strategies or grid values
never changes the results of existing cells.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..augment import AugmentationConfig, augment, combine
from ..dataset import Dataset, SplitSpec, compute_column_stats, split, subsample
from ..student import fit_student, rmse, student_predict
from ..teacher import fit_teacher, teacher_predict
from .plan import DISTILL_ONLY, ExperimentPlan, resolve_train_size
from .stats import improvement

log = logging.getLogger(__name__)

STAGE_SPLIT, STAGE_SUBSAMPLE, STAGE_TEACHER, STAGE_STUDENT, STAGE_AUGMENT = range(5)
_ETA_INDEPENDENT = ("mixup", "cmixup")
_SEED_MOD = 2**63 - 1


def trial_seed(base_seed: int, trial_index: int) -> int:
    return base_seed + trial_index


def stage_seed(seed: int, stage: int, *key: int) -> int:
    state = np.random.SeedSequence([seed, stage, *key]).generate_state(2, np.uint64)
    return int(state[0]) % _SEED_MOD


def _eta_key(eta: float) -> int:
    return int(round(eta * 1e9))


@dataclass(frozen=True)
class Cell:
    strategy: str
    volume: int
    eta: float


@dataclass(frozen=True)
class TrialResult:
    dataset: str
    trial: int
    seed: int
    train_size: int
    size_label: str
    strategy: str
    volume: int
    eta: float
    p_baseline: float
    p_aug: float
    teacher_rmse: float
    improvement_pct: float
    test_target_std: float
    teacher_model: str
    phase_durations_ms: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class Skipped:
    dataset: str
    train_size: str
    reason: str


def plan_cells(plan: ExperimentPlan) -> list[Cell]:
    """Augmentation cells in report order (strategy, then volume, then eta)."""
    cells = []
    for s in plan.strategies:
        if s in ("none", DISTILL_ONLY):
            cells.append(Cell(s, 0, 0.0))
            continue
        for v in plan.volumes:
            for e in plan.etas:
                cells.append(Cell(s, v, float(e)))
    return cells


def _ms(t0: float) -> float:
    return round((time.perf_counter() - t0) * 1000.0, 3)


def run_trial_group(plan: ExperimentPlan, name: str, data: Dataset, size_token,
                    trial_index: int, cells: list[Cell]) -> list[TrialResult] | Skipped:
    seed = trial_seed(plan.base_seed, trial_index)
    t0 = time.perf_counter()
    train_full, test = split(data, SplitSpec(plan.test_fraction,
                                             stage_seed(seed, STAGE_SPLIT)))
    n_train = resolve_train_size(size_token, data.n_rows, train_full.n_rows)
    if n_train is None:
        return Skipped(name, str(size_token),
                       f"needs {size_token} rows, train partition has {train_full.n_rows}")
    split_ms = _ms(t0)

    t0 = time.perf_counter()
    if n_train == train_full.n_rows:
        train = train_full
    else:
        train = subsample(train_full, n_train,
                          stage_seed(seed, STAGE_SUBSAMPLE, n_train))
    subsample_ms = _ms(t0)

    t0 = time.perf_counter()
    teacher = fit_teacher(train, replace(plan.teacher,
                                         seed=stage_seed(seed, STAGE_TEACHER, n_train)))
    teacher_rmse = rmse(teacher_predict(teacher, test.features), test.target)
    teacher_ms = _ms(t0)

    student_spec = replace(plan.student, seed=stage_seed(seed, STAGE_STUDENT, n_train))
    t0 = time.perf_counter()
    baseline = fit_student(train, student_spec)
    p_baseline = rmse(student_predict(baseline, test.features), test.target)
    baseline_ms = _ms(t0)
    y_std = float(np.std(test.target, ddof=1)) if test.n_rows > 1 else 0.0
    log.info("%s size=%d trial=%d baseline=%.5g teacher=%.5g (%s)",
             name, n_train, trial_index, p_baseline, teacher_rmse, teacher.summary())

    stats = compute_column_stats(train)
    common = dict(dataset=name, trial=trial_index, seed=seed, train_size=n_train,
                  size_label=str(size_token),
                  p_baseline=p_baseline, teacher_rmse=teacher_rmse,
                  test_target_std=y_std, teacher_model=teacher.summary())
    shared = {"split": split_ms, "subsample": subsample_ms, "teacher": teacher_ms,
              "baseline": baseline_ms}
    # both noise strategies share a code: same jittered rows, different labels
    strategy_codes = {"teacher_noise": 1, "naive_noise": 1, "mixup": 3, "cmixup": 4}

    results = []
    done = {}
    for cell in cells:
        if cell.strategy == "none":
            p_aug, phases = p_baseline, {}
        else:
            # mixup variants ignore eta, so reuse the first run at this volume
            key = (cell.strategy, cell.volume,
                   None if cell.strategy in _ETA_INDEPENDENT else cell.eta)
            if key in done:
                p_aug, phases = done[key]
            else:
                t0 = time.perf_counter()
                if cell.strategy == DISTILL_ONLY:
                    relabelled = train.with_target(teacher_predict(teacher, train.features))
                    augment_ms = _ms(t0)
                    fit_data = relabelled
                else:
                    eta_key = 0 if key[2] is None else _eta_key(cell.eta)
                    config = AugmentationConfig(
                        strategy=cell.strategy, volume=cell.volume,
                        noise_fraction=cell.eta,
                        noise_center_mode=plan.noise_center_mode,
                        mixup_alpha=plan.mixup_alpha,
                        cmixup_bandwidth=plan.cmixup_bandwidth,
                        seed=stage_seed(seed, STAGE_AUGMENT, n_train,
                                        strategy_codes[cell.strategy],
                                        cell.volume, eta_key))
                    synth = augment(train, config, teacher=teacher, stats=stats)
                    fit_data = combine(train, synth)
                    augment_ms = _ms(t0)
                t0 = time.perf_counter()
                student = fit_student(fit_data, student_spec)
                p_aug = rmse(student_predict(student, test.features), test.target)
                phases = {"augment": augment_ms, "augmented": _ms(t0)}
                done[key] = (p_aug, phases)
                log.info("  %s V=%d eta=%g p_aug=%.5g", cell.strategy, cell.volume,
                         cell.eta, p_aug)
        results.append(TrialResult(
            strategy=cell.strategy, volume=cell.volume, eta=cell.eta, p_aug=p_aug,
            improvement_pct=improvement(p_baseline, p_aug),
            phase_durations_ms={**shared, **phases}, **common))
    return results


def run_trial(plan: ExperimentPlan, name: str, data: Dataset, size_token,
              trial_index: int, strategy: str, volume: int = 0,
              eta: float = 0.0) -> TrialResult | Skipped:
    """Run a single (strategy, volume, eta) cell of one trial."""
    out = run_trial_group(plan, name, data, size_token, trial_index,
                          [Cell(strategy, volume, float(eta))])
    return out if isinstance(out, Skipped) else out[0]
