"""Command-line entry point: ``cyres run|sweep|verify-log|report``.

Exit codes: 0 ok, 1 usage or configuration error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .canonical import canonical_json
from .decision_log import verify_jsonl
from .errors import CyresError
from .output import merge_summaries, read_summary, write_run
from .runner import run_scenario
from .scenario import parse_scenario
from .sweep import run_sweep, write_sweep

EXIT_OK, EXIT_USAGE, EXIT_CORRUPT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _values(text: str) -> list:
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            out.append(json.loads(token))
        except json.JSONDecodeError:
            out.append(token)
    return out


def _load(path: str):
    return parse_scenario(Path(path).read_bytes())


def cmd_run(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    result = run_scenario(scenario, args.seed)
    summary = write_run(result, args.out)
    report = summary["report"]
    status = report["outcome"] if report else "NoEvent"
    print(f"{status}  seed={result.seed}  log_entries={summary['log_entries']}  out={args.out}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    points = run_sweep(scenario, args.param, _values(args.values), args.runs, args.seed,
                       paired=args.paired, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep(points, args.param, out / "sweep.csv")
    print(f"{len(points)} points x {args.runs} runs -> {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_verify_log(args: argparse.Namespace) -> int:
    d = Path(args.dir)
    data = (d / "decisions.jsonl").read_bytes()
    expected = None
    summary_path = d / "summary.json"
    if summary_path.exists():
        expected = read_summary(summary_path)["log_entries"]
    verdict = verify_jsonl(data, expected)
    if verdict.valid:
        print("Valid")
        return EXIT_OK
    print(f"{verdict}: {verdict.reason}")
    return EXIT_CORRUPT


def cmd_report(args: argparse.Namespace) -> int:
    summaries = [read_summary(Path(d) / "summary.json") for d in args.dirs]
    text = canonical_json(merge_summaries(summaries).as_dict())
    if args.out:
        Path(args.out).write_bytes((text + "\n").encode("utf-8"))
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cyres", description="Fleet cyber-resilience simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="simulate one scenario and write its artefacts")
    p.add_argument("scenario")
    p.add_argument("--seed", type=_u64, default=None, help="override run.seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="Monte Carlo sweep over one parameter")
    p.add_argument("scenario")
    p.add_argument("--param", required=True, help="dotted path, e.g. monitors.anomaly_rate or threats[0].beta")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--paired", action="store_true", help="reuse the same seeds at every point")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-log", help="check decisions.jsonl against its hash chain and entry count")
    p.add_argument("dir")
    p.set_defaults(func=cmd_verify_log)

    p = sub.add_parser("report", help="merge run summaries into one certification report")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CyresError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"cyres: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
