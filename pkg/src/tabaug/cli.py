"""Command-line entry point."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from .augment import STRATEGIES, AugmentationConfig, augment, combine
from .dataset import write_csv
from .errors import DataError, PlanError, TabAugError
from .harness.experiments import (
    run_benchmark,
    run_distillation_analysis,
    run_grid,
    run_learning_curve,
)
from .harness.plan import load_plan
from .harness.report import emit_report
from .harness.trial import STAGE_AUGMENT, STAGE_TEACHER, stage_seed
from .teacher import fit_teacher

EXIT_OK, EXIT_USAGE, EXIT_PLAN, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4, 5

EPILOG = """\
exit codes:
  0  success
  2  usage error (unknown flag, missing argument)
  3  plan file missing, unparseable or invalid
  4  dataset error (missing file or column, bad cell, too few rows)
  5  runtime failure (model fitting, unwritable output)
"""

EXPERIMENTS = {
    "benchmark": run_benchmark,
    "grid": run_grid,
    "curve": run_learning_curve,
    "distill": run_distillation_analysis,
}

log = logging.getLogger("tabaug")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabaug",
        description="Tabular regression augmentation experiments.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    helps = {
        "augment": "write the dataset plus synthetic rows as CSV",
        "benchmark": "compare strategies (mean RMSE, best per row, paired t-tests)",
        "grid": "improvement by train size x augmentation volume",
        "curve": "learning curve of the unaugmented student",
        "distill": "teacher advantage vs. improvement, with a distillation-only control",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--plan", required=True, metavar="PATH",
                       help="experiment plan (JSON)")
        p.add_argument("--out", metavar="PATH",
                       help="output CSV for augment, output directory otherwise")
        p.add_argument("--seed", type=_u64, help="override base_seed")
        p.add_argument("--trials", type=_positive, help="override trials")
        p.add_argument("--jobs", type=_positive, default=1,
                       help="worker processes for trials (default 1)")
        p.add_argument("--verbose", "-v", action="count", default=0)
    return parser


def _augment(plan, out: Path):
    name, data = plan.load_datasets()[0]
    usable = [s for s in plan.strategies if s in STRATEGIES]
    strategy = next((s for s in usable if s != "none"), usable[0] if usable else None)
    if strategy is None:
        raise PlanError("augment needs one of the strategies " + ", ".join(STRATEGIES))
    seed = plan.base_seed
    teacher = None
    if strategy == "teacher_noise":
        teacher = fit_teacher(data, replace(plan.teacher,
                                            seed=stage_seed(seed, STAGE_TEACHER)))
    config = AugmentationConfig(
        strategy=strategy, volume=0 if strategy == "none" else plan.volumes[0],
        noise_fraction=plan.etas[0], noise_center_mode=plan.noise_center_mode,
        mixup_alpha=plan.mixup_alpha, cmixup_bandwidth=plan.cmixup_bandwidth,
        seed=stage_seed(seed, STAGE_AUGMENT))
    synth = augment(data, config, teacher=teacher)
    combined = combine(data, synth)
    provenance = [""] * data.n_rows + synth.provenance_labels()
    log.info("%s: %d original + %d synthetic rows (%s)", name, data.n_rows,
             len(synth), strategy)

    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{out.name}.", dir=out.parent)
    os.close(fd)
    try:
        write_csv(combined, tmp, extra_column=("provenance", provenance))
        os.replace(tmp, out)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.WARNING if args.verbose == 0 else
        logging.INFO if args.verbose == 1 else logging.DEBUG,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    try:
        plan = load_plan(args.plan)
        plan = plan.with_overrides(seed=args.seed, trials=args.trials,
                                   output_dir=None if args.command == "augment"
                                   else args.out)
        if args.command == "augment":
            if not args.out:
                parser.error("augment requires --out")
            _augment(plan, Path(args.out))
            return EXIT_OK
        report = EXPERIMENTS[args.command](plan, jobs=args.jobs)
        outdir = emit_report(report, plan.output_dir)
        print(f"wrote {outdir}/trials.csv, summary.json, tables.md")
        return EXIT_OK
    except SystemExit as exc:
        return int(exc.code or 0)
    except PlanError as exc:
        print(f"tabaug: plan error: {exc}", file=sys.stderr)
        return EXIT_PLAN
    except DataError as exc:
        print(f"tabaug: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TabAugError, OSError, RuntimeError, ValueError) as exc:
        print(f"tabaug: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
