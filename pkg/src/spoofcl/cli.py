"""Command-line entry point: ``spoofcl run|report|select|gradcheck``."""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import BenchmarkError, ConfigError


def _strategies(text):
    return tuple(s.strip() for s in text.split(",") if s.strip())


def build_parser():
    p = argparse.ArgumentParser(prog="spoofcl", description="Continual-learning benchmark for spoof detection.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train and evaluate every strategy on every seed")
    r.add_argument("config", help="experiment config file (may be empty for defaults)")
    r.add_argument("--seed", type=int, help="master seed (overrides config)")
    r.add_argument("--seeds", type=int, metavar="N", help="number of seeds (overrides config)")
    r.add_argument("--out", metavar="DIR", help="report directory (overrides config)")
    r.add_argument("--strategies", type=_strategies, metavar="a,b,c", help="strategy subset")
    r.add_argument("--tasks-from", metavar="FILE", help="file of [task.N] sections replacing the config's tasks")
    r.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    r.add_argument("--quiet", action="store_true", help="no per-run progress lines")

    rep = sub.add_parser("report", help="re-render summary and figures from an emitted report directory")
    rep.add_argument("record_dir")
    rep.add_argument("--no-figures", action="store_true")

    s = sub.add_parser("select", help="balanced train/eval selection from a feature file")
    s.add_argument("--mode", choices=("random", "informative"), required=True)
    s.add_argument("--pool", required=True, help="feature file to select from")
    s.add_argument("--committee-pool", action="append", default=[], metavar="FILE",
                   help="external feature file for committee training (informative; repeatable)")
    s.add_argument("--committee-size", type=int, default=5)
    s.add_argument("--train-count", type=int, default=2000)
    s.add_argument("--eval-count", type=int, default=5000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, metavar="DIR", help="writes train.txt and eval.txt here")

    g = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients on random small models")
    g.add_argument("--trials", type=int, default=200)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--step", type=float, default=1e-5)
    g.add_argument("--tol", type=float, default=1e-5)
    return p


def cmd_run(args, out=sys.stdout):
    from .config import parse_config, parse_task_file, validate
    from .reports import emit_reports, summary_rows, summary_text
    from .runner import run_benchmark

    cfg = parse_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.seeds is not None:
        overrides["seeds"] = args.seeds
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.strategies is not None:
        overrides["strategies"] = args.strategies
    if args.tasks_from is not None:
        overrides["tasks"] = parse_task_file(args.tasks_from)
    cfg = replace(cfg, **overrides)
    validate(cfg)

    def progress(run):
        if not args.quiet:
            print(f"{run.strategy:>9} seed {run.seed}: avg {run.summary.avg_final:6.2f}  "
                  f"bwt {run.summary.backward_transfer:+6.2f}  ({run.seconds:.1f}s)", file=out, flush=True)

    record = run_benchmark(cfg, progress)
    emit_reports(record, cfg.output_dir, figures=not args.no_figures)
    grouped = {}
    for (name, _), run in record.runs.items():
        grouped.setdefault(name, []).append(run.matrix)
    print(summary_text(record.task_names, summary_rows(grouped), len(record.seeds)), file=out)
    print(f"wrote {cfg.output_dir}", file=out)
    return 0


def cmd_report(args, out=sys.stdout):
    from .reports import rerender, summary_text

    manifest, rows, _ = rerender(args.record_dir, figures=not args.no_figures)
    print(summary_text(manifest["task_names"], rows, len(manifest["seeds"])), file=out)
    return 0


def cmd_select(args, out=sys.stdout):
    from .data import (TaskSpec, committee_votes, informative_select, load_feature_file,
                       random_split_select, train_committee, write_feature_file)
    from .errors import DataError

    try:
        spec = TaskSpec(1, Path(args.pool).stem, train_count=args.train_count, eval_count=args.eval_count,
                        shift=None, path=args.pool)
    except DataError as exc:
        raise ConfigError(str(exc)) from None
    pool = load_feature_file(args.pool)
    if args.mode == "random":
        task = random_split_select(pool, spec, args.seed)
    else:
        if not args.committee_pool:
            raise ConfigError("informative selection needs at least one --committee-pool")
        experts = train_committee([load_feature_file(p) for p in args.committee_pool], args.committee_size, args.seed)
        task = informative_select(pool, committee_votes(experts, pool), spec)
    dest = Path(args.out)
    try:
        dest.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {dest}: {exc}") from None
    write_feature_file(dest / "train.txt", task.train, f"{args.mode} selection from {args.pool}, train split")
    write_feature_file(dest / "eval.txt", task.eval, f"{args.mode} selection from {args.pool}, eval split")
    print(f"selected {len(task.train)} train and {len(task.eval)} eval samples into {dest}", file=out)
    return 0


def cmd_gradcheck(args, out=sys.stdout):
    from .nn import gradcheck_suite

    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    worst = gradcheck_suite(args.trials, args.seed, args.step)
    ok = worst < args.tol
    print(f"gradcheck: {args.trials} cases, max relative error {worst:.3e} "
          f"({'pass' if ok else 'FAIL'} at tol {args.tol:g})", file=out)
    return 0 if ok else 1


COMMANDS = {"run": cmd_run, "report": cmd_report, "select": cmd_select, "gradcheck": cmd_gradcheck}


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except BenchmarkError as exc:
        print(f"{exc.category}: {exc}", file=err)
        return exc.exit_code


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
