import csv
import json
import math
import statistics
from collections import defaultdict

import numpy as np
import pytest

from tabaug.errors import PlanError
from tabaug.harness.experiments import (
    Report,
    benchmark_report,
    curve_report,
    distillation_report,
    grid_report,
    run_benchmark,
    run_distillation_analysis,
    run_grid,
    run_learning_curve,
)
from tabaug.harness.plan import (
    CAPPED_FULL_TRAIN,
    STANDARD_GRID,
    load_plan,
    plan_from_dict,
    resolve_train_size,
)
from tabaug.harness.report import emit_report, read_trials_csv, trials_csv
from tabaug.harness.stats import (
    confidence_interval,
    improvement,
    paired_ttest,
    summarize,
    t_quantile,
)
from tabaug.harness.trial import TrialResult, run_trial, stage_seed, trial_seed

# two-sided 95% t quantiles from a 40-digit mpmath root of the incomplete beta
T_975 = {1: 12.706204736174693, 2: 4.302652729749462, 4: 2.776445105197793,
         9: 2.262157162798205}


def tiny_plan(**over):
    raw = {
        "dataset": {"name": "f1", "generator": {"kind": "friedman1", "n_rows": 120,
                                                "noise_sd": 1.0, "seed": 0}},
        "strategies": ["teacher_noise", "naive_noise"],
        "volumes": [100], "train_sizes": [60], "etas": [0.05], "trials": 2,
        "teacher": {"candidates": ["ridge", "knn"]},
        "student": {"architectures": [[8]], "max_epochs": 4},
    }
    raw.update(over)
    return plan_from_dict(raw)


def trial(strategy="s", p_base=1.0, p_aug=1.0, trial=0, dataset="d", size=100,
          volume=10, eta=0.05, teacher=1.0, y_std=2.0, label=None):
    return TrialResult(dataset=dataset, trial=trial, seed=trial, train_size=size,
                       size_label=label or str(size), strategy=strategy, volume=volume,
                       eta=eta, p_baseline=p_base, p_aug=p_aug, teacher_rmse=teacher,
                       improvement_pct=improvement(p_base, p_aug),
                       test_target_std=y_std, teacher_model="ridge(lam=1)")


class TestStats:
    def test_improvement_examples(self):
        assert round(improvement(8.62, 6.34), 2) == 26.45
        assert improvement(3.0, 3.0) == 0.0
        assert improvement(1.0, 1.5) == -50.0

    @pytest.mark.parametrize("base", [0.0, -1.0])
    def test_improvement_bad_baseline(self, base):
        with pytest.raises(ValueError):
            improvement(base, 1.0)

    def test_ci_hand_value(self):
        assert confidence_interval([1, 3]) == pytest.approx(T_975[1], abs=1e-10)
        assert f"{confidence_interval([1, 3]):.4f}" == "12.7062"

    def test_t_closed_forms(self):
        # df=1 is Cauchy, df=2 has an algebraic inverse
        assert t_quantile(0.95, 1) == pytest.approx(math.tan(0.475 * math.pi), abs=1e-12)
        p = 0.975
        assert t_quantile(0.95, 2) == pytest.approx((2 * p - 1) / math.sqrt(2 * p * (1 - p)),
                                                    abs=1e-13)

    def test_ci_identical_values(self):
        assert confidence_interval([4.0, 4.0, 4.0]) == 0.0

    def test_ci_shrinks_when_mean_appended(self):
        v = [1.0, 2.0, 6.0]
        assert confidence_interval(v + [3.0]) < confidence_interval(v)

    def test_ci_needs_two(self):
        with pytest.raises(ValueError):
            confidence_interval([1.0])

    @pytest.mark.parametrize("n", [2, 3, 5, 10])
    def test_ci_brute_force(self, rng, n):
        v = rng.normal(size=n).tolist()
        mean = math.fsum(v) / n
        sd = math.sqrt(math.fsum((x - mean) ** 2 for x in v) / (n - 1))
        assert confidence_interval(v) == pytest.approx(T_975[n - 1] * sd / math.sqrt(n),
                                                       abs=1e-10, rel=0)

    def test_paired_identical(self):
        assert paired_ttest([1, 2, 3], [1, 2, 3]) == 1.0

    def test_paired_constant_shift(self):
        assert paired_ttest([1, 2, 3], [2, 3, 4]) == 0.0

    def test_paired_hand_value(self):
        # d = [1, 2, 3]: t = 2 / (1 / sqrt 3) = 3.4641, df 2
        from scipy import stats as sps
        expected = 2 * sps.t.sf(2 * math.sqrt(3), 2)
        assert paired_ttest([2, 4, 6], [1, 2, 3]) == pytest.approx(expected, rel=1e-12)

    def test_summarize(self):
        s = summarize([1.0, 2.0, 6.0])
        assert s["n"] == 3 and s["mean"] == 3.0 and s["median"] == 2.0
        assert s["std"] == pytest.approx(math.sqrt(7.0), rel=1e-14)
        one = summarize([5.0])
        assert one["std"] is None and one["ci95"] is None and one["mean"] == 5.0
        assert summarize([])["mean"] is None


class TestPlan:
    def test_standard_grid_loads(self, tmp_path):
        p = tmp_path / "plan.json"
        p.write_text(json.dumps({
            "dataset": {"name": "f", "generator": {"kind": "friedman1"}},
            "volumes": list(STANDARD_GRID), "train_sizes": list(STANDARD_GRID),
        }))
        plan = load_plan(p)
        assert plan.volumes == (500, 1000, 5000, 10000, 50000)
        assert plan.train_sizes == plan.volumes
        assert plan.trials == 10 and plan.etas == (0.05,)

    def test_defaults(self):
        plan = tiny_plan()
        assert plan.test_fraction == 0.2 and plan.noise_center_mode == "zero_mean"

    @pytest.mark.parametrize("over", [
        {"strategies": ["smote"]}, {"volumes": []}, {"volumes": [0]},
        {"etas": [0.0]}, {"train_sizes": ["abc"]}, {"train_sizes": ["0%"]},
        {"trials": 0}, {"trials": "3"}, {"bogus": 1}, {"noise_center_mode": "x"},
        {"student": {"max_epochs": 0}}, {"teacher": {"candidates": ["svm"]}},
        {"strategies": "teacher_noise"},
    ])
    def test_invalid(self, over):
        with pytest.raises(PlanError):
            tiny_plan(**over)

    def test_missing_and_malformed(self, tmp_path):
        with pytest.raises(PlanError):
            load_plan(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(PlanError):
            load_plan(bad)

    def test_relative_csv_path(self, tmp_path):
        (tmp_path / "d.csv").write_text("a,y\n" + "".join(f"{i},{2*i}\n" for i in range(10)))
        p = tmp_path / "plan.json"
        p.write_text(json.dumps({"dataset": {"name": "d", "csv_path": "d.csv",
                                             "target": "y"}}))
        (name, d), = load_plan(p).load_datasets()
        assert name == "d" and d.n_rows == 10

    def test_resolve_train_size(self):
        assert resolve_train_size(500, 5000, 4000) == 500
        assert resolve_train_size(5000, 5000, 4000) is None
        assert resolve_train_size("80%", 5000, 4000) == 4000
        assert resolve_train_size("10%", 5000, 4000) == 500
        assert resolve_train_size(CAPPED_FULL_TRAIN, 100_000, 80_000) == 50_000
        assert resolve_train_size(CAPPED_FULL_TRAIN, 5000, 4000) == 4000

    def test_overrides(self):
        plan = tiny_plan().with_overrides(seed=7, trials=3, output_dir="x")
        assert (plan.base_seed, plan.trials, plan.output_dir) == (7, 3, "x")


class TestSeeds:
    def test_trial_seed(self):
        assert trial_seed(10, 3) == 13

    def test_stage_seeds_distinct(self):
        seeds = {stage_seed(0, s) for s in range(5)} | {stage_seed(1, 0)}
        assert len(seeds) == 6
        assert stage_seed(5, 2, 500) == stage_seed(5, 2, 500)


class TestAggregation:
    def hand_table(self):
        # 3 trials x 2 strategies, baseline shared within a trial
        base = [2.0, 3.0, 4.0]
        a = [1.5, 2.5, 4.5]
        b = [1.0, 2.0, 3.0]
        rows = []
        for i in range(3):
            rows.append(trial("teacher_noise", base[i], a[i], trial=i))
            rows.append(trial("naive_noise", base[i], b[i], trial=i))
        return rows

    def test_benchmark_by_hand(self):
        rep = benchmark_report(self.hand_table(), ["teacher_noise", "naive_noise"])
        assert rep["columns"] == ["none", "teacher_noise", "naive_noise"]
        (row,) = rep["rows"]
        assert row["mean_rmse"] == {"none": 3.0, "teacher_noise": 17 / 6, "naive_noise": 2.0}
        assert row["median_rmse"] == {"none": 3.0, "teacher_noise": 2.5, "naive_noise": 2.0}
        assert row["best"] == "naive_noise"
        # naive is a constant 1.0 below the baseline
        assert row["p_values_vs_best"]["none"] == 0.0
        assert rep["best_counts"]["naive_noise"] == 1

    def test_identical_strategies_not_significant(self):
        rows = [trial("teacher_noise", 2.0, v, trial=i) for i, v in enumerate([1.0, 1.5, 1.2])]
        rows += [trial("naive_noise", 2.0, v, trial=i) for i, v in enumerate([1.0, 1.5, 1.2])]
        (row,) = benchmark_report(rows, ["teacher_noise", "naive_noise"])["rows"]
        assert row["p_values_vs_best"]["naive_noise"] == 1.0
        assert not row["best_significant"]

    def test_only_none(self):
        rows = [trial("none", 2.0, 2.0, trial=i) for i in range(3)]
        rep = benchmark_report(rows, ["none"])
        assert rep["columns"] == ["none"]
        assert list(rep["rows"][0]["mean_rmse"]) == ["none"]

    def test_grid_by_hand(self):
        rows = [trial("teacher_noise", 2.0, 1.0, trial=0, size=500, volume=10),
                trial("teacher_noise", 2.0, 1.5, trial=1, size=500, volume=10),
                trial("teacher_noise", 2.0, 2.5, trial=0, size=500, volume=20),
                trial("teacher_noise", 4.0, 3.0, trial=0, size=1000, volume=10)]
        (tab,) = grid_report(rows)["tables"]
        assert tab["volumes"] == [10, 20] and tab["train_sizes"] == ["500", "1000"]
        cells = {(c["volume"], c["size_label"]): c for c in tab["cells"]}
        assert cells[(10, "500")]["mean"] == pytest.approx(37.5)
        assert cells[(10, "500")]["median"] == pytest.approx(37.5)
        assert cells[(20, "500")]["mean"] == pytest.approx(-25.0)
        assert cells[(10, "1000")]["n"] == 1 and cells[(10, "1000")]["mean"] == 25.0
        assert (20, "1000") not in cells

    def test_curve_by_hand(self):
        rows = [trial("none", 1.0, 1.0, trial=0, size=500, y_std=2.0),
                trial("none", 3.0, 3.0, trial=1, size=500, y_std=2.0),
                trial("none", 0.0001, 0.0001, trial=0, size=1000, y_std=1.0)]
        (c,) = curve_report(rows)["curves"]
        assert c["points"][0]["mean_nrmse"] == 1.0
        assert c["points"][1]["mean_nrmse"] == pytest.approx(1e-4)
        assert c["inversions"] == 0

    def test_curve_constant_predictor_near_one(self, rng):
        y = rng.normal(3, 2, size=10_000)
        r = float(np.sqrt(np.mean((y - y.mean()) ** 2)))
        rows = [trial("none", r, r, y_std=float(np.std(y, ddof=1)))]
        nr = curve_report(rows)["curves"][0]["points"][0]["mean_nrmse"]
        assert nr == pytest.approx(1.0, abs=1e-3)

    def test_distillation_by_hand(self):
        rows = [trial("teacher_noise", 2.0, 1.0, trial=0, teacher=1.0),
                trial("distill_only", 2.0, 1.5, trial=0, teacher=1.0),
                trial("teacher_noise", 4.0, 4.0, trial=1, teacher=5.0),
                trial("distill_only", 4.0, 4.4, trial=1, teacher=5.0)]
        (p,) = distillation_report(rows)["points"]
        assert p["teacher_advantage_pct"] == pytest.approx((50.0 - 25.0) / 2)
        assert p["augmentation_improvement_pct"] == pytest.approx(25.0)
        assert p["distill_only_improvement_pct"] == pytest.approx((25.0 - 10.0) / 2)
        assert p["n_trials"] == 2


@pytest.fixture(scope="module")
def grid_run():
    return run_grid(tiny_plan())


class TestPipeline:
    def test_none_equals_baseline(self):
        plan = tiny_plan()
        (name, data), = plan.load_datasets()
        r = run_trial(plan, name, data, 60, 0, "none")
        assert r.p_aug == r.p_baseline and r.improvement_pct == 0.0

    def test_run_trial_deterministic(self):
        plan = tiny_plan()
        (name, data), = plan.load_datasets()
        a = run_trial(plan, name, data, 60, 1, "teacher_noise", 100, 0.05)
        b = run_trial(plan, name, data, 60, 1, "teacher_noise", 100, 0.05)
        assert a == b

    def test_cells_paired(self, grid_run):
        by = defaultdict(set)
        for t in grid_run.trials:
            by[t.trial].add((t.p_baseline, t.teacher_rmse, t.seed))
        assert all(len(v) == 1 for v in by.values())
        assert len(grid_run.trials) == 4

    def test_trial_results_independent_of_trial_count(self, grid_run):
        more = run_grid(tiny_plan(trials=3))
        assert more.trials[:4] == grid_run.trials

    def test_adding_strategy_keeps_existing_cells(self, grid_run):
        plan = tiny_plan(strategies=["teacher_noise", "mixup", "naive_noise"])
        rep = run_grid(plan)
        old = {(t.trial, t.strategy): t for t in grid_run.trials}
        new = {(t.trial, t.strategy): t for t in rep.trials}
        for k, t in old.items():
            assert new[k] == t

    def test_infeasible_size_skipped(self):
        rep = run_grid(tiny_plan(train_sizes=[60, 5000], trials=1))
        assert {t.train_size for t in rep.trials} == {60}
        assert len(rep.skipped) == 1 and rep.skipped[0].train_size == "5000"

    def test_grid_one_by_one(self, grid_run):
        tabs = grid_run.summary["grid"]["tables"]
        t = next(x for x in tabs if x["strategy"] == "teacher_noise")
        (cell,) = t["cells"]
        vals = [r.improvement_pct for r in grid_run.trials if r.strategy == "teacher_noise"]
        assert cell["mean"] == pytest.approx(np.mean(vals), abs=1e-12)

    def test_learning_curve_cardinality(self):
        rep = run_learning_curve(tiny_plan(train_sizes=[30, 60], trials=1))
        (c,) = rep.summary["curve"]["curves"]
        assert [p["train_size"] for p in c["points"]] == [30, 60]
        assert all(t.strategy == "none" for t in rep.trials)

    def test_distillation_cardinality(self):
        rep = run_distillation_analysis(tiny_plan(strategies=["naive_noise"], trials=1))
        (p,) = rep.summary["distillation"]["points"]
        assert p["distill_only_improvement_pct"] is not None
        assert {t.strategy for t in rep.trials} == {"naive_noise", "teacher_noise",
                                                    "distill_only"}
        assert "distill_only" in rep.summary["benchmark"]["columns"]

    def test_distill_only_with_exact_teacher(self):
        # noiseless linear target: ridge is essentially exact, labels barely change
        plan = plan_from_dict({
            "dataset": {"name": "lin", "generator": {"kind": "linear", "n_rows": 200,
                                                     "coefficients": [1, -2, 0.5],
                                                     "noise_sd": 0.0}},
            "strategies": ["distill_only"], "train_sizes": [150], "trials": 1,
            "teacher": {"candidates": ["ridge"], "ridge_lambdas": [1e-6]},
            "student": {"architectures": [[16]], "max_epochs": 30},
        })
        (t,) = run_benchmark(plan).trials
        assert t.teacher_rmse < 1e-4
        assert abs(t.p_aug - t.p_baseline) < 0.05 * t.p_baseline + 1e-3


class TestReport:
    def test_empty_report(self, tmp_path):
        rep = Report("benchmark", {}, [], [], {})
        emit_report(rep, tmp_path / "out")
        lines = (tmp_path / "out" / "trials.csv").read_text().splitlines()
        assert len(lines) == 1 and lines[0].startswith("seed,train_size,strategy")
        assert json.loads((tmp_path / "out" / "summary.json").read_text())["n_trials"] == 0
        assert (tmp_path / "out" / "tables.md").read_text().startswith("# benchmark")

    def test_header_fixed_prefix(self, grid_run):
        header = trials_csv(grid_run.trials).splitlines()[0].split(",")
        assert header[:10] == ["seed", "train_size", "strategy", "volume", "eta",
                               "p_baseline", "p_aug", "teacher_rmse",
                               "improvement_pct", "phase_durations_ms"]

    def test_round_trip(self, grid_run, tmp_path):
        emit_report(grid_run, tmp_path)
        assert read_trials_csv(tmp_path / "trials.csv") == grid_run.trials

    def test_rerun_byte_identical(self, grid_run, tmp_path):
        emit_report(grid_run, tmp_path / "a")
        emit_report(run_grid(tiny_plan()), tmp_path / "b")
        for f in ("trials.csv", "summary.json", "tables.md"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_timings_only_when_requested(self, tmp_path):
        rep = run_grid(tiny_plan(trials=1, record_timings=True))
        emit_report(rep, tmp_path)
        with open(tmp_path / "trials.csv") as fh:
            row = next(csv.DictReader(fh))
        assert "teacher=" in row["phase_durations_ms"]

    def test_summary_recomputed_from_csv(self, tmp_path):
        rep = run_benchmark(tiny_plan(strategies=["none", "teacher_noise", "naive_noise"]))
        emit_report(rep, tmp_path)
        summary = json.loads((tmp_path / "summary.json").read_text())
        groups = defaultdict(list)
        with open(tmp_path / "trials.csv") as fh:
            for r in csv.DictReader(fh):
                key = (r["dataset"], int(r["train_size"]), r["strategy"],
                       int(r["volume"]), float(r["eta"]))
                groups[key].append(r)
        assert len(groups) == len(summary["configurations"])
        for c in summary["configurations"]:
            rows = groups[(c["dataset"], c["train_size"], c["strategy"], c["volume"],
                           c["eta"])]
            for col in ("improvement_pct", "p_baseline", "p_aug", "teacher_rmse"):
                vals = [float(r[col]) for r in rows]
                assert c[col]["mean"] == pytest.approx(math.fsum(vals) / len(vals),
                                                       abs=1e-10)
                assert c[col]["median"] == pytest.approx(statistics.median(vals), abs=1e-10)
        bench = summary["benchmark"]["rows"][0]
        for strat in ("teacher_noise", "naive_noise"):
            vals = [float(r["p_aug"]) for k, rs in groups.items() if k[2] == strat for r in rs]
            assert bench["mean_rmse"][strat] == pytest.approx(math.fsum(vals) / len(vals),
                                                              abs=1e-10)
        overall = summary["overall"]["teacher_noise"]["simple_mean_improvement_pct_over_all_rows"]
        vals = [float(r["improvement_pct"]) for k, rs in groups.items()
                if k[2] == "teacher_noise" for r in rs]
        assert overall == pytest.approx(math.fsum(vals) / len(vals), abs=1e-10)

    def test_improvement_column_consistent(self, grid_run):
        for t in grid_run.trials:
            assert t.improvement_pct == pytest.approx(
                100 * (t.p_baseline - t.p_aug) / t.p_baseline, abs=1e-10)

    def test_existing_dir_replaced_atomically(self, grid_run, tmp_path):
        (tmp_path / "keep.txt").write_text("x")
        emit_report(grid_run, tmp_path)
        assert (tmp_path / "keep.txt").exists() and (tmp_path / "trials.csv").exists()
        assert not [p for p in tmp_path.iterdir() if p.name.startswith(".")]
