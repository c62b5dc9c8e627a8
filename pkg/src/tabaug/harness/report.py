"""Report emission: trials.csv, summary.json and tables.md.

Files are written to a temporary location and moved into place only when
all of them are complete, so a failed run leaves no new files behind.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import shutil
import tempfile
from pathlib import Path

from .experiments import Report
from .trial import TrialResult

TRIAL_COLUMNS = (
    "seed", "train_size", "strategy", "volume", "eta", "p_baseline", "p_aug",
    "teacher_rmse", "improvement_pct", "phase_durations_ms",
    # extra columns, after the fixed interface
    "dataset", "trial", "size_label", "test_target_std", "teacher_model",
)


def _num(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def _durations(d: dict) -> str:
    return ";".join(f"{k}={v!r}" for k, v in sorted(d.items()))


def trials_csv(trials: list[TrialResult], record_timings: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for t in trials:
        w.writerow([
            t.seed, t.train_size, t.strategy, t.volume, _num(t.eta),
            _num(t.p_baseline), _num(t.p_aug), _num(t.teacher_rmse),
            _num(t.improvement_pct),
            _durations(t.phase_durations_ms) if record_timings else "",
            t.dataset, t.trial, t.size_label, _num(t.test_target_std),
            t.teacher_model,
        ])
    return buf.getvalue()


def read_trials_csv(path) -> list[TrialResult]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            durations = {}
            if row["phase_durations_ms"]:
                for part in row["phase_durations_ms"].split(";"):
                    k, v = part.split("=")
                    durations[k] = float(v)
            out.append(TrialResult(
                dataset=row["dataset"], trial=int(row["trial"]), seed=int(row["seed"]),
                train_size=int(row["train_size"]), size_label=row["size_label"],
                strategy=row["strategy"], volume=int(row["volume"]),
                eta=float(row["eta"]), p_baseline=float(row["p_baseline"]),
                p_aug=float(row["p_aug"]), teacher_rmse=float(row["teacher_rmse"]),
                improvement_pct=float(row["improvement_pct"]),
                test_target_std=float(row["test_target_std"]),
                teacher_model=row["teacher_model"], phase_durations_ms=durations))
    return out


def _clean(obj):
    """Make ``obj`` strict-JSON safe: NaN/inf become null, tuples become lists."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def summary_json(report: Report) -> str:
    return json.dumps(_clean(report.summary), indent=2, sort_keys=True,
                      allow_nan=False) + "\n"


def _f(x, digits=4) -> str:
    if x is None:
        return "-"
    return f"{x:.{digits}g}" if abs(x) >= 1e4 or abs(x) < 1e-3 and x != 0 else f"{x:.{digits}f}"


def _pct(x) -> str:
    return "-" if x is None else f"{x:.2f}%"


def _md_table(header, rows) -> list[str]:
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return lines


def tables_md(report: Report) -> str:
    s = report.summary
    lines = [f"# {report.kind} report", "",
             f"{s['n_trials']} trial rows.", ""]

    if "benchmark" in s:
        b = s["benchmark"]
        lines += ["## Mean test RMSE per strategy", "",
                  "Best column per row in **bold**; `*` marks a best that is "
                  "significant (paired t-test p < 0.05 against every other column).", ""]
        header = ["dataset", "train size", "V", "eta"] + b["columns"]
        rows = []
        for r in b["rows"]:
            cells = [r["dataset"], str(r["train_size"]),
                     "-" if r["volume"] is None else str(r["volume"]),
                     "-" if r["eta"] is None else f"{r['eta']:g}"]
            for c in b["columns"]:
                if c not in r["mean_rmse"]:
                    cells.append("-")
                    continue
                ci = r["ci95_rmse"][c]
                txt = _f(r["mean_rmse"][c]) + ("" if ci is None else f"±{_f(ci)}")
                if c == r["best"]:
                    txt = f"**{txt}**" + ("*" if r["best_significant"] else "")
                cells.append(txt)
            rows.append(cells)
        rows.append(["# best", "", "", ""] + [str(b["best_counts"][c]) for c in b["columns"]])
        lines += _md_table(header, rows) + [""]

    if "grid" in s:
        for tab in s["grid"]["tables"]:
            lines += [f"## Improvement by augmentation: {tab['strategy']}, eta={tab['eta']:g}",
                      "", "mean (median) of improvement_pct; rows = synthesized rows, "
                      "columns = train size.", ""]
            cell = {(c["volume"], c["size_label"]): c for c in tab["cells"]}
            rows = []
            for v in tab["volumes"]:
                row = [str(v)]
                for size in tab["train_sizes"]:
                    c = cell.get((v, size))
                    row.append("skipped" if c is None
                               else f"{_pct(c['mean'])} ({_pct(c['median'])})")
                rows.append(row)
            lines += _md_table(["# synthesized rows"] + tab["train_sizes"], rows) + [""]

    if "curve" in s:
        lines += ["## Learning curve (unaugmented student)", "",
                  "NRMSE = RMSE / std(y_test), averaged over trials.", ""]
        for c in s["curve"]["curves"]:
            rows = [[p["size_label"], str(p["train_size"]), str(p["n_trials"]),
                     _f(p["mean_nrmse"]), _f(p["mean_teacher_nrmse"])]
                    for p in c["points"]]
            lines += [f"### {c['dataset']} ({c['inversions']} inversions)", ""]
            lines += _md_table(["train size", "rows", "trials", "student NRMSE",
                                "teacher NRMSE"], rows) + [""]

    if "distillation" in s:
        d = s["distillation"]
        lines += ["## Augmentation vs. distillation", "",
                  f"x axis: {d['advantage_axis']}.", ""]
        rows = [[p["dataset"], _pct(p["teacher_advantage_pct"]),
                 _pct(p["augmentation_improvement_pct"]),
                 _pct(p["distill_only_improvement_pct"]), str(p["n_trials"])]
                for p in d["points"]]
        lines += _md_table(["dataset", "teacher advantage", "teacher_noise improvement",
                            "distill_only improvement", "trials"], rows) + [""]

    lines += ["## Overall", ""]
    rows = [[k, _pct(v["simple_mean_improvement_pct_over_all_rows"]), str(v["n_rows"])]
            for k, v in s["overall"].items()]
    lines += _md_table(["strategy", "simple mean improvement over all (dataset, trial) rows",
                        "rows"], rows) + [""]
    if s["skipped"]:
        lines += ["## Skipped cells", ""]
        lines += [f"- {k['dataset']} train size {k['train_size']}: {k['reason']}"
                  for k in s["skipped"]]
        lines.append("")
    return "\n".join(lines)


def write_atomically(outdir, files: dict[str, str]):
    """Write ``{filename: text}`` into ``outdir`` with all-or-nothing semantics."""
    outdir = Path(outdir)
    outdir.parent.mkdir(parents=True, exist_ok=True)
    if outdir.exists() and not outdir.is_dir():
        raise NotADirectoryError(f"{outdir} exists and is not a directory")
    fresh = not outdir.exists()
    tmp = Path(tempfile.mkdtemp(prefix=f".{outdir.name}.", dir=outdir.parent))
    try:
        for name, text in files.items():
            with open(tmp / name, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        if fresh:
            os.rename(tmp, outdir)
        else:
            for name in files:
                os.replace(tmp / name, outdir / name)
    finally:
        if tmp.exists():
            shutil.rmtree(tmp, ignore_errors=True)


def emit_report(report: Report, outdir) -> Path:
    files = {
        "trials.csv": trials_csv(report.trials, report.record_timings),
        "summary.json": summary_json(report),
        "tables.md": tables_md(report),
    }
    write_atomically(outdir, files)
    return Path(outdir)
