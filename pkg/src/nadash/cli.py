"""Command-line entry point: run experiments, validate configs, certify the search."""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

from .bandwidth import load_trace, read_trace_csv, sample_hold_volume, write_timeline_csv
from .config import RunConfig, bundled_config, load_config, render_config
from .errors import NadashError
from .oracle import check_agreement, random_instance
from .simcore import (
    BASELINE,
    BUFFER_SIZE,
    KBIT_PER_KB,
    POLICIES,
    WINDOW_SIZE,
    SimulationReport,
    SweepResult,
    sweep,
    window_config,
)

RUN_COLUMNS = (
    "seed", "policy", "buffer_s", "window_s", "utility", "utility_norm", "mean_bitrate_kbps",
    "up_switches", "down_switches", "rebuffer_s", "cache_peak_kB", "cache_mean_kB",
)
SUMMARY_COLUMNS = ("panel", "policy", "x", "mean", "std", "n")
SEGMENT_COLUMNS = (
    "experiment", "x", "seed", "policy", "segment", "bitrate_kbps", "quality",
    "request_s", "finish_s", "wait_s", "stall_s", "cache_kB",
)


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def run_row(report: SimulationReport) -> tuple:
    return (
        report.seed, report.policy, float(report.buffer_s), float(report.window_s),
        report.utility, report.utility_norm, report.mean_bitrate,
        report.up_switches, report.down_switches, report.rebuffer_total,
        report.cache_peak_kB, report.cache_mean_kB,
    )


def summary_rows(result: SweepResult):
    axis = "buffer" if result.experiment == BUFFER_SIZE else "window"
    for row in result.rows:
        yield (f"utility_vs_{axis}", row.policy, row.value, row.utility_mean, row.utility_std, row.n)
        yield (f"utility_norm_vs_{axis}", row.policy, row.value, row.utility_norm_mean, row.utility_norm_std, row.n)
        yield (f"bitrate_vs_{axis}", row.policy, row.value, row.bitrate_mean, row.bitrate_std, row.n)


def execute(config: RunConfig, log=print) -> List[SweepResult]:
    """Run every configured sweep and write the result files; returns the sweeps."""
    scenario = config.scenario()
    plans = []
    if config.buffer_values:
        plans.append((BUFFER_SIZE, config.buffer_values))
    if config.window_values:
        plans.append((WINDOW_SIZE, config.window_values))
    if not plans:
        plans.append((BUFFER_SIZE, (config.baseline.buffer_limit,)))
    results = []
    for experiment, values in plans:
        started = time.perf_counter()
        result = sweep(
            experiment, values, config.repetitions, scenario, config.seed, config.policies, config.jobs
        )
        log(f"{experiment}: {len(result.reports)} sessions in {time.perf_counter() - started:.1f}s")
        results.append(result)

    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "runs.csv", RUN_COLUMNS, (run_row(r) for res in results for _, r in res.reports))
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, (row for res in results for row in summary_rows(res)))
    if config.per_segment_log:
        _write_csv(
            out / "segments.csv",
            SEGMENT_COLUMNS,
            (
                (res.experiment, float(x), r.seed, r.policy, s.segment, s.bitrate, s.quality,
                 s.request, s.finish, s.wait, s.stall, s.cache_kbit / KBIT_PER_KB)
                for res in results
                for x, r in res.reports
                for s in r.per_segment
            ),
        )
    if config.emit_timelines:
        tdir = out / "timelines"
        tdir.mkdir(exist_ok=True)
        longest = {}
        for res in results:
            for _, r in res.reports:
                longest[r.seed] = max(longest.get(r.seed, 0.0), r.config.get("horizon", 0.0))
        for seed in config.seeds:
            core, edge = scenario.timelines(seed, longest.get(seed) or None)
            write_timeline_csv(core, tdir / f"seed{seed}_core.csv")
            write_timeline_csv(edge, tdir / f"seed{seed}_edge.csv")
    log(f"wrote results to {out}")
    return results


def _resolve(path: str) -> Path:
    p = Path(path)
    if not p.exists() and not p.parent.parts:
        try:
            return bundled_config(path)
        except NadashError:
            pass
    return p


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(_resolve(args.config))
    if args.policy:
        config = replace(config, policies=POLICIES if args.policy == "both" else (args.policy,))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.output:
        config = replace(config, output_dir=Path(args.output))
    single = args.buffer is not None or args.window is not None
    if single:
        scheduler = config.scheduler
        if args.window is not None:
            scheduler = window_config(scheduler, args.window)
        baseline = config.baseline
        if args.buffer is not None:
            baseline = replace(baseline, buffer_limit=args.buffer)
        config = replace(
            config, scheduler=scheduler, baseline=baseline, buffer_values=(), window_values=(),
            repetitions=args.repetitions or 1,
        )
    elif args.repetitions:
        config = replace(config, repetitions=args.repetitions)
    if args.jobs:
        config = replace(config, jobs=args.jobs)
    if args.per_segment:
        config = replace(config, per_segment_log=True)
    if args.emit_timelines:
        config = replace(config, emit_timelines=True)
    log = (lambda *_: None) if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    execute(config, log)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    config = load_config(_resolve(args.config))
    print("valid")
    print(render_config(config), end="")
    return 0


def cmd_oracle_check(args: argparse.Namespace) -> int:
    agreements = 0
    infeasible = 0
    for k in range(args.seeds):
        seed = args.seed_base + k
        same, oracle, searched = check_agreement(random_instance(seed, args.n, args.m), prune=args.prune)
        if same:
            agreements += 1
        else:
            print(f"seed {seed}: search {searched.score} {searched.bitrates} "
                  f"vs oracle {oracle.best_utility} {oracle.best_path.bitrates}")
        if oracle.feasible == 0:
            infeasible += 1
    print(f"{agreements}/{args.seeds} agreements (N={args.n}, M={args.m}, {infeasible} infeasible instances)")
    return 0 if agreements == args.seeds else 1


def cmd_trace_inspect(args: argparse.Namespace) -> int:
    source = read_trace_csv(args.trace)
    timeline = load_trace(source, args.quantization)
    rates = [r for _, r in source.samples]
    held = sample_hold_volume(source)
    stepped = float(timeline.cumulative(0, timeline.horizon))
    print(f"samples: {len(rates)}")
    print(f"span_s: {source.samples[-1][0] - source.samples[0][0]!r}")
    print(f"rate_kbps: min {min(rates)!r} mean {sum(rates) / len(rates)!r} max {max(rates)!r}")
    print(f"steps: {len(timeline.rates)} of {args.quantization!r}s")
    print(f"volume_kbit: held {held!r} quantized {stepped!r}")
    if args.output:
        write_timeline_csv(timeline, args.output)
        print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nadash", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured experiments and write CSV results")
    p.add_argument("config", help="configuration file, or the name of a bundled one")
    p.add_argument("--policy", choices=("both",) + POLICIES)
    p.add_argument("--buffer", type=float, help="single run at this client buffer size (s)")
    p.add_argument("--window", type=float, help="single run at this knowledge window (s)")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="output directory")
    p.add_argument("--jobs", type=int)
    p.add_argument("--per-segment", action="store_true", help="also write segments.csv")
    p.add_argument("--emit-timelines", action="store_true", help="dump realised bandwidth timelines")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a configuration and print its effective settings")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle-check", help="compare the search with exhaustive enumeration")
    p.add_argument("--n", type=int, default=5, help="segments per instance")
    p.add_argument("--m", type=int, default=3, help="ladder size")
    p.add_argument("--seeds", type=int, default=100, help="number of random instances")
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--prune", action="store_true", help="enable floor pruning in the search")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("trace-inspect", help="summarise a throughput trace and its quantized timeline")
    p.add_argument("trace")
    p.add_argument("--quantization", type=float, default=1.0)
    p.add_argument("--output", help="write the quantized timeline as CSV")
    p.set_defaults(func=cmd_trace_inspect)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NadashError, OSError) as exc:
        print(f"nadash {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
