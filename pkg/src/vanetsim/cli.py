"""Command line: ``run``, ``matrix``, ``analyze`` and ``trends``."""

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ScenarioConfig, apply_overrides
from .matrix import BatchSpec, paper_matrix, rows_to_csv, run_matrix, with_repetitions
from .metrics import MalformedRecord, analyze, parse_trace
from .scenario import run_scenario
from .traffic import InvalidScenario
from .trends import IncompleteMatrix, read_rows, report_trends

OUT_ENV = "VANETSIM_OUT"


def default_out() -> Path:
    return Path(os.environ.get(OUT_ENV, "vanetsim-out"))


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise InvalidScenario(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def build_config(args) -> ScenarioConfig:
    """Config file first, then explicit flags; flags win."""
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    flags = {}
    for name, key in (("protocol", "protocol"), ("listeners", "listeners"), ("sessions", "sessions"),
                      ("seed", "seed"), ("duration", "duration"), ("nodes", "nodes")):
        value = getattr(args, name, None)
        if value is not None:
            flags[key] = value
    flags.update(_parse_set(args.set))
    return apply_overrides(cfg, flags) if flags else cfg


def _scenario_flags(p: argparse.ArgumentParser, protocol=True) -> None:
    p.add_argument("--config", type=Path, help="JSON scenario file")
    if protocol:
        p.add_argument("--protocol", choices=("maodv", "puma"))
    p.add_argument("-L", "--listeners", type=int)
    p.add_argument("-S", "--sessions", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--nodes", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key, e.g. traffic.mean_bitrate=128000")
    p.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./vanetsim-out)")
    p.add_argument("--eed-per", choices=("sent", "received"), default="sent",
                   help="average delay denominator")


def cmd_run(args) -> int:
    cfg = build_config(args).validate()
    out = args.out or default_out()
    out.mkdir(parents=True, exist_ok=True)
    trace = out / f"{cfg.scenario_id}.tr"
    result = run_scenario(cfg, trace_path=trace, eed_per=args.eed_per)
    (out / f"{cfg.scenario_id}.csv").write_text(rows_to_csv([result.csv_row()]), encoding="ascii")
    (out / f"{cfg.scenario_id}.json").write_text(cfg.dumps() + "\n", encoding="utf-8")
    _print_report(cfg.scenario_id, result.report)
    print(f"trace: {trace}")
    return 0


def cmd_matrix(args) -> int:
    base = build_config(args)
    if args.paper_matrix:
        configs = paper_matrix(base.seed, base)
    else:
        configs = [base]
    configs = with_repetitions(configs, args.reps)
    out = args.out or default_out()
    spec = BatchSpec(configs, out, workers=args.workers, eed_per=args.eed_per, write_traces=not args.no_traces)

    def progress(outcome):
        sid, row, err = outcome
        print(f"{sid}: {'FAILED ' + err if err else ' '.join(row[4:])}", flush=True)

    result = run_matrix(spec, progress=progress)
    print(f"results: {result.csv_path}")
    status = 0 if result.ok else 1
    if args.trends:
        status |= _trends(result.csv_path)
    return status


def cmd_analyze(args) -> int:
    status = 0
    for path in args.traces:
        try:
            report = analyze(parse_trace(path), eed_per=args.eed_per)
        except (MalformedRecord, OSError) as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            status = 1
            continue
        _print_report(str(path), report)
    return status


def _trends(csv_path) -> int:
    try:
        results = report_trends(read_rows(csv_path))
    except IncompleteMatrix as exc:
        print(f"incomplete matrix: {exc}", file=sys.stderr)
        return 2
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_trends(args) -> int:
    return _trends(args.csv)


def _print_report(label, report) -> None:
    sent, received, control, expected = report.counts
    print(f"{label}: pdr={report.pdr:.4f} avg_eed={report.avg_eed:.6f}s "
          f"throughput={report.throughput:.2f}Kbps nrl={report.nrl:.4f} "
          f"(data sent {sent}, received {received}, expected {expected}, control {control})")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vanetsim", description="VANET multicast routing simulator")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="run one scenario")
    _scenario_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("matrix", help="run a batch of scenarios")
    _scenario_flags(p)
    p.add_argument("--paper-matrix", action="store_true",
                   help="both protocols x listeners 10/20/40/60 x sessions 5/10/20")
    p.add_argument("--reps", type=int, default=1, help="repetitions; seeds seed, seed+1, ...")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-traces", action="store_true", help="skip writing per-scenario trace files")
    p.add_argument("--trends", action="store_true", help="evaluate trend checks on the results")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("analyze", help="compute metrics from trace files")
    p.add_argument("traces", nargs="+", type=Path)
    p.add_argument("--eed-per", choices=("sent", "received"), default="sent")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("trends", help="check protocol-comparison trends in a results CSV")
    p.add_argument("csv", type=Path)
    p.set_defaults(func=cmd_trends)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidScenario as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
