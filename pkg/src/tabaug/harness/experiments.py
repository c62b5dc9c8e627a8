"""Experiment modes: benchmark, grid, learning curve, distillation analysis.

Each ``run_*`` executes the plan's trials and hands them to the matching
``*_report`` aggregator. The aggregators are pure functions of the trial
list, so they can be re-run on a trials table loaded from disk.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .plan import DISTILL_ONLY, ExperimentPlan
from .stats import improvement, paired_ttest, summarize
from .trial import Cell, Skipped, TrialResult, plan_cells, run_trial_group

log = logging.getLogger(__name__)

AUGMENTING = ("teacher_noise", "naive_noise", "mixup", "cmixup")
SIGNIFICANCE = 0.05


@dataclass
class Report:
    kind: str
    plan: dict
    trials: list[TrialResult]
    skipped: list[Skipped] = field(default_factory=list)
    sections: dict = field(default_factory=dict)
    record_timings: bool = False

    @property
    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "plan": self.plan,
            "n_trials": len(self.trials),
            "configurations": configuration_summaries(self.trials),
            "overall": overall_means(self.trials),
            "skipped": [vars(s) for s in self.skipped],
            **self.sections,
        }


def _group_task(args):
    plan, name, data, token, trial_index, cells = args
    return run_trial_group(plan, name, data, token, trial_index, cells)


def run_experiment(plan: ExperimentPlan, jobs: int = 1,
                   cells: list[Cell] | None = None):
    """Execute every (dataset, train size, trial) group of ``plan``.

    Results come back in plan order whatever ``jobs`` is.
    """
    cells = plan_cells(plan) if cells is None else cells
    tasks = []
    for name, data in plan.load_datasets():
        for token in plan.train_sizes:
            for i in range(plan.trials):
                tasks.append((plan, name, data, token, i, cells))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_group_task, tasks))
    else:
        outputs = [_group_task(t) for t in tasks]

    trials, skipped = [], []
    for out in outputs:
        if isinstance(out, Skipped):
            if out not in skipped:
                skipped.append(out)
        else:
            trials.extend(out)
    return trials, skipped


def _key(t: TrialResult):
    return (t.dataset, t.train_size, t.strategy, t.volume, t.eta)


def configuration_summaries(trials: list[TrialResult]) -> list[dict]:
    groups = defaultdict(list)
    for t in trials:
        groups[_key(t)].append(t)
    out = []
    for (ds, size, strat, vol, eta), ts in groups.items():
        out.append({
            "dataset": ds, "train_size": size, "strategy": strat, "volume": vol,
            "eta": eta, "size_label": ts[0].size_label,
            "improvement_pct": summarize([t.improvement_pct for t in ts]),
            "p_baseline": summarize([t.p_baseline for t in ts]),
            "p_aug": summarize([t.p_aug for t in ts]),
            "teacher_rmse": summarize([t.teacher_rmse for t in ts]),
        })
    return out


def overall_means(trials: list[TrialResult]) -> dict:
    """Simple mean of improvement_pct over all (dataset, trial) rows per strategy."""
    by = defaultdict(list)
    for t in trials:
        by[t.strategy].append(t.improvement_pct)
    return {s: {"simple_mean_improvement_pct_over_all_rows": float(np.mean(v)),
                "n_rows": len(v)} for s, v in by.items()}


def _ordered_unique(items):
    seen = []
    for x in items:
        if x not in seen:
            seen.append(x)
    return seen


def benchmark_report(trials: list[TrialResult], strategies) -> dict:
    """Mean test RMSE per strategy for every (dataset, train size, volume, eta) row.

    The ``none`` column is the baseline student's RMSE and is always present.
    The best column has the lowest mean; its paired t-test p-value against
    every other column is reported, and it is flagged significant only if
    all of them fall below 0.05.
    """
    columns = ["none"] + [s for s in strategies if s != "none"]
    groups = defaultdict(list)
    for t in trials:
        groups[(t.dataset, t.train_size)].append(t)

    rows = []
    for (ds, size), ts in groups.items():
        baseline = {t.trial: t.p_baseline for t in ts}
        distill = {t.trial: t.p_aug for t in ts if t.strategy == DISTILL_ONLY}
        settings = _ordered_unique((t.volume, t.eta) for t in ts
                                   if t.strategy in AUGMENTING) or [(None, None)]
        for vol, eta in settings:
            per_col = {}
            for col in columns:
                if col == "none":
                    per_col[col] = baseline
                elif col == DISTILL_ONLY:
                    per_col[col] = distill
                else:
                    per_col[col] = {t.trial: t.p_aug for t in ts
                                    if t.strategy == col and t.volume == vol
                                    and t.eta == eta}
            present = [c for c in columns if per_col[c]]
            means = {c: float(np.mean(list(per_col[c].values()))) for c in present}
            best = min(present, key=lambda c: (means[c], present.index(c)))
            pvals = {}
            for c in present:
                if c == best:
                    continue
                common = sorted(set(per_col[c]) & set(per_col[best]))
                pvals[c] = paired_ttest([per_col[best][i] for i in common],
                                        [per_col[c][i] for i in common])
            rows.append({
                "dataset": ds, "train_size": size, "volume": vol, "eta": eta,
                "mean_rmse": means,
                "median_rmse": {c: float(np.median(list(per_col[c].values())))
                                for c in present},
                "ci95_rmse": {c: summarize(list(per_col[c].values()))["ci95"]
                              for c in present},
                "n_trials": {c: len(per_col[c]) for c in present},
                "best": best,
                "p_values_vs_best": pvals,
                "best_significant": bool(pvals) and all(p < SIGNIFICANCE
                                                        for p in pvals.values()),
            })
    wins = {c: sum(1 for r in rows if r["best"] == c) for c in columns}
    return {"columns": columns, "rows": rows, "best_counts": wins}


def grid_report(trials: list[TrialResult], strategies=None) -> dict:
    """Mean and median improvement per (volume, train size) cell.

    Cells pool every trial of every dataset. Rows are volumes and columns are
    train-size labels, one table per (strategy, eta).
    """
    wanted = [s for s in (strategies or AUGMENTING) if s in AUGMENTING]
    tables = []
    for strat in wanted:
        ts = [t for t in trials if t.strategy == strat]
        if not ts:
            continue
        for eta in _ordered_unique(t.eta for t in ts):
            sub = [t for t in ts if t.eta == eta]
            sizes = _ordered_unique(t.size_label for t in sub)
            vols = sorted(_ordered_unique(t.volume for t in sub))
            cells = []
            for v in vols:
                for s in sizes:
                    vals = [t.improvement_pct for t in sub
                            if t.volume == v and t.size_label == s]
                    if vals:
                        cells.append({"volume": v, "size_label": s,
                                      **summarize(vals)})
            tables.append({"strategy": strat, "eta": eta, "volumes": vols,
                           "train_sizes": sizes, "cells": cells})
    return {"tables": tables}


def _groups(trials):
    """One record per (dataset, train size, trial): the baseline-level fields."""
    seen = {}
    for t in trials:
        seen.setdefault((t.dataset, t.size_label, t.trial), t)
    return list(seen.values())


def nrmse(rmse_value: float, target_std: float) -> float:
    return rmse_value / target_std


def curve_report(trials: list[TrialResult]) -> dict:
    """Baseline-student NRMSE (RMSE / std of the test target) per train size."""
    base = _groups(trials)
    curves = []
    for ds in _ordered_unique(t.dataset for t in base):
        sub = [t for t in base if t.dataset == ds]
        points = []
        for label in _ordered_unique(t.size_label for t in sub):
            pts = [t for t in sub if t.size_label == label]
            points.append({
                "size_label": label,
                "train_size": pts[0].train_size,
                "n_trials": len(pts),
                "mean_nrmse": float(np.mean([nrmse(t.p_baseline, t.test_target_std)
                                             for t in pts])),
                "mean_teacher_nrmse": float(np.mean(
                    [nrmse(t.teacher_rmse, t.test_target_std) for t in pts])),
            })
        points.sort(key=lambda p: p["train_size"])
        m = [p["mean_nrmse"] for p in points]
        inversions = sum(1 for a, b in zip(m, m[1:]) if b > a)
        curves.append({"dataset": ds, "points": points, "inversions": inversions})
    return {"curves": curves}


def distillation_report(trials: list[TrialResult]) -> dict:
    """Per-dataset mean teacher advantage vs mean augmentation improvement.

    x is ``improvement(p_baseline, teacher_rmse)``: how much better the
    teacher is than the unaugmented student, in percent. y is the mean
    improvement of teacher_noise augmentation. The distillation-only control
    is reported next to it.
    """
    points = []
    for ds in _ordered_unique(t.dataset for t in trials):
        sub = [t for t in trials if t.dataset == ds]
        base = _groups(sub)
        aug = [t for t in sub if t.strategy == "teacher_noise"]
        dist = [t for t in sub if t.strategy == DISTILL_ONLY]
        point = {
            "dataset": ds,
            "teacher_advantage_pct": float(np.mean(
                [improvement(t.p_baseline, t.teacher_rmse) for t in base])),
            "augmentation_improvement_pct": (
                float(np.mean([t.improvement_pct for t in aug])) if aug else None),
            "distill_only_improvement_pct": (
                float(np.mean([t.improvement_pct for t in dist])) if dist else None),
            "mean_baseline_rmse": float(np.mean([t.p_baseline for t in base])),
            "mean_teacher_rmse": float(np.mean([t.teacher_rmse for t in base])),
            "mean_teacher_noise_rmse": (
                float(np.mean([t.p_aug for t in aug])) if aug else None),
            "mean_distill_only_rmse": (
                float(np.mean([t.p_aug for t in dist])) if dist else None),
            "n_trials": len(base),
        }
        points.append(point)
    return {"advantage_axis": "relative: 100*(p_baseline - teacher_rmse)/p_baseline",
            "points": points}


def _finish(kind, plan, trials, skipped, sections) -> Report:
    return Report(kind=kind, plan=plan.to_dict(), trials=trials, skipped=skipped,
                  sections=sections, record_timings=plan.record_timings)


def run_benchmark(plan: ExperimentPlan, jobs: int = 1) -> Report:
    trials, skipped = run_experiment(plan, jobs)
    return _finish("benchmark", plan, trials, skipped,
                   {"benchmark": benchmark_report(trials, plan.strategies)})


def run_grid(plan: ExperimentPlan, jobs: int = 1) -> Report:
    trials, skipped = run_experiment(plan, jobs)
    return _finish("grid", plan, trials, skipped,
                   {"grid": grid_report(trials, plan.strategies)})


def run_learning_curve(plan: ExperimentPlan, jobs: int = 1) -> Report:
    # only the unaugmented student matters here
    trials, skipped = run_experiment(plan, jobs, cells=[Cell("none", 0, 0.0)])
    return _finish("curve", plan, trials, skipped, {"curve": curve_report(trials)})


def run_distillation_analysis(plan: ExperimentPlan, jobs: int = 1) -> Report:
    strategies = list(plan.strategies)
    if "teacher_noise" not in strategies:
        strategies.append("teacher_noise")
    if DISTILL_ONLY not in strategies:
        strategies.append(DISTILL_ONLY)
    plan = replace(plan, strategies=tuple(strategies))
    trials, skipped = run_experiment(plan, jobs)
    return _finish("distill", plan, trials, skipped,
                   {"distillation": distillation_report(trials),
                    "benchmark": benchmark_report(trials, plan.strategies)})
