"""Command line entry point: ``bench run | summarize | plotdata | worldgen``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from potential_gap.bench.experiment import (ExperimentSpec, SpecError, read_records,
                                            run_experiment, write_results)
from potential_gap.bench.summary import format_table, summarize, summary_csv, write_plotdata
from potential_gap.sim.world import KINDS, generate_world, save

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_SPEC = 2


def _cmd_run(args) -> int:
    try:
        spec = ExperimentSpec.load(args.spec)
        if args.seeds is not None:
            spec = spec.with_seeds(args.seeds)
    except SpecError as e:
        print(f"spec error: {e}", file=sys.stderr)
        return EXIT_SPEC
    total = len(spec.trials())
    done = [0]

    def progress(rec):
        done[0] += 1
        if not args.quiet:
            print(f"[{done[0]}/{total}] {rec.config} seed={rec.seed} {rec.outcome}",
                  file=sys.stderr, flush=True)

    records = run_experiment(spec, jobs=args.jobs, progress=progress)
    out = write_results(args.out, spec, records)
    rows = summarize(records)
    (out / "summary.csv").write_text(summary_csv(rows))
    (out / "summary.txt").write_text(format_table(rows))
    print(format_table(rows), end="")
    return EXIT_OK


def _load_rows(directory):
    path = Path(directory)
    if not (path / "records.csv").exists():
        print(f"no records.csv in {path}", file=sys.stderr)
        return None
    records = read_records(path)
    if not records:
        print(f"{path / 'records.csv'} holds no records", file=sys.stderr)
        return None
    return summarize(records)


def _cmd_summarize(args) -> int:
    rows = _load_rows(args.dir)
    if rows is None:
        return EXIT_FAILURE
    path = Path(args.dir)
    (path / "summary.csv").write_text(summary_csv(rows))
    (path / "summary.txt").write_text(format_table(rows))
    print(format_table(rows), end="")
    return EXIT_OK


def _cmd_plotdata(args) -> int:
    rows = _load_rows(args.dir)
    if rows is None:
        return EXIT_FAILURE
    out = Path(args.out) if args.out else Path(args.dir) / "plotdata"
    for p in write_plotdata(rows, out):
        print(p)
    return EXIT_OK


def _cmd_worldgen(args) -> int:
    params = {}
    for item in args.param or []:
        key, _, val = item.partition("=")
        try:
            params[key] = float(val)
        except ValueError:
            print(f"bad parameter {item!r}; expected key=number", file=sys.stderr)
            return EXIT_SPEC
    try:
        world = generate_world(args.kind, args.seed, params)
    except ValueError as e:
        print(f"world generation failed: {e}", file=sys.stderr)
        return EXIT_FAILURE
    save(world, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bench", description="Gap-planner Monte Carlo benchmark.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment spec")
    r.add_argument("--spec", required=True, help="YAML experiment spec")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    r.add_argument("--seeds", type=int, default=None, help="override the seed count")
    r.add_argument("--quiet", action="store_true", help="no per-trial progress lines")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("summarize", help="print and store the summary table of a run")
    s.add_argument("dir")
    s.set_defaults(func=_cmd_summarize)

    d = sub.add_parser("plotdata", help="write x/y series per field of view and r_min")
    d.add_argument("dir")
    d.add_argument("--out", default=None, help="directory for the series files")
    d.set_defaults(func=_cmd_plotdata)

    w = sub.add_parser("worldgen", help="write a procedural world file")
    w.add_argument("--kind", required=True, choices=KINDS)
    w.add_argument("--seed", type=int, required=True)
    w.add_argument("--out", required=True)
    w.add_argument("--param", action="append", help="generation parameter key=value")
    w.set_defaults(func=_cmd_worldgen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return EXIT_SPEC
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
