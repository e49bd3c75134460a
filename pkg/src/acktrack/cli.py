"""Command-line interface.

Subcommands:
  run    --config F --out DIR [--seed N]     one scenario -> run CSV
  sweep  --config F --out DIR [--jobs K]     controller x course x speed matrix
  plot   --kind KIND --out FILE CSV...       SVG from run CSVs
  repro  --figure NAME --out DIR             regenerate a benchmark figure

Exit codes: 0 success, 1 usage/config error, 2 run divergence.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import AcktrackError, ConfigError
from .harness import (csv_to_record, parse_config, record_to_csv, run_scenario,
                      run_sweep, summary_csv, sweep_scenarios)
from .metrics import RunRecord
from .presets import FIGURES, build_preset, default_sweep
from .svgplot import emit_plot

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGED = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="acktrack",
                     description="Path-tracking benchmark laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)

    p_sweep = sub.add_parser("sweep", help="run a scenario sweep")
    p_sweep.add_argument("--config", default=None,
                         help="base scenario config (defaults apply if omitted)")
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--jobs", type=int, default=1)

    p_plot = sub.add_parser("plot", help="plot run CSVs as SVG")
    p_plot.add_argument("--kind", default="error_vs_distance",
                        choices=("error_vs_distance", "abs_error_vs_distance",
                                 "velocity_vs_time", "trajectory"))
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("csvs", nargs="+")

    p_repro = sub.add_parser("repro", help="regenerate a benchmark figure")
    p_repro.add_argument("--figure", required=True, choices=FIGURES)
    p_repro.add_argument("--out", required=True)
    return parser


def _cmd_run(args) -> int:
    cfg = parse_config(Path(args.config).read_text())
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    record = run_scenario(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{cfg.name}.csv").write_text(record_to_csv(record))
    if record.diverged:
        print(f"{cfg.name}: DIVERGED (|e| exceeded guard)", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"{cfg.name}: {len(record.t)} samples -> {out / (cfg.name + '.csv')}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec = default_sweep()
    if args.config:
        base = parse_config(Path(args.config).read_text())
        spec = replace(spec, base=base)
    scenarios = sweep_scenarios(spec)
    results = run_sweep(scenarios, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, rec in results.items():
        if isinstance(rec, RunRecord):
            (out / f"{name}.csv").write_text(record_to_csv(rec))
    (out / "summary.csv").write_text(summary_csv(results))
    n_err = sum(1 for r in results.values() if not isinstance(r, RunRecord))
    print(f"{len(results)} runs -> {out} ({n_err} failed)")
    return EXIT_OK


def _cmd_plot(args) -> int:
    records = [csv_to_record(Path(p).read_text()) for p in args.csvs]
    Path(args.out).write_text(emit_plot(records, args.kind))
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_repro(args) -> int:
    plots, csvs = build_preset(args.figure)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for stem, svg in plots:
        (out / f"{stem}.svg").write_text(svg)
    for name, text in csvs:
        (out / name).write_text(text)
    print(f"{args.figure}: {len(plots)} plots, {len(csvs)} data files -> {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or EXIT_USAGE)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "plot":
            return _cmd_plot(args)
        if args.command == "repro":
            return _cmd_repro(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AcktrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
