"""Experiment harness: plans, trials, aggregation and report files."""

from .experiments import (
    Report,
    benchmark_report,
    curve_report,
    distillation_report,
    grid_report,
    run_benchmark,
    run_distillation_analysis,
    run_experiment,
    run_grid,
    run_learning_curve,
)
from .plan import DISTILL_ONLY, DatasetSource, ExperimentPlan, load_plan, plan_from_dict
from .report import emit_report, read_trials_csv
from .stats import confidence_interval, improvement, paired_ttest, summarize
from .trial import TrialResult, run_trial, run_trial_group

__all__ = [
    "DISTILL_ONLY", "DatasetSource", "ExperimentPlan", "Report", "TrialResult",
    "benchmark_report", "confidence_interval", "curve_report",
    "distillation_report", "emit_report", "grid_report", "improvement",
    "load_plan", "paired_ttest", "plan_from_dict", "read_trials_csv",
    "run_benchmark", "run_distillation_analysis", "run_experiment", "run_grid",
    "run_learning_curve", "run_trial", "run_trial_group", "summarize",
]
