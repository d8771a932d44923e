"""Command line entry point.

Exit codes: 0 pass, 1 failed verdict or verification, 2 config/schema
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .config import ConfigError, ExperimentConfig
from .runner import run, sweep, verify_report, write_csv, write_report, write_sweep_csv

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _load_config(path: Optional[str]) -> ExperimentConfig:
    return ExperimentConfig.load(path) if path else ExperimentConfig()


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_path"] = args.out
    cfg = cfg.replace(**overrides).validate()
    report = run(cfg)
    det = report["deterministic"]
    if cfg.output_path:
        write_report(report, cfg.output_path)
    if args.csv:
        write_csv(report, args.csv)
    for c in det["checks"]:
        print(f"{'ok  ' if c['satisfied'] else 'FAIL'} {c['name']:<34} slack={c['slack']:+.3e}")
    for r in det["reconstructions"]:
        print(f"{'ok  ' if r['converged'] else 'FAIL'} {r['method']:<34} iterations<={r['iterations_max']}")
    print(f"theta={det['instance']['theta']:.6g}  verdict={det['verdict']}  hash={report['content_hash'][:16]}")
    for reason in det["reasons"]:
        print(f"  reason: {reason}")
    if not cfg.output_path:
        json.dump({"verdict": det["verdict"], "content_hash": report["content_hash"]}, sys.stdout)
        print()
    return EXIT_PASS if det["verdict"] == "pass" else EXIT_FAIL


def _cmd_verify(args) -> int:
    with open(args.report) as fh:
        try:
            report = json.load(fh)
        except json.JSONDecodeError as exc:
            print(f"schema error: report is not valid JSON ({exc})", file=sys.stderr)
            return EXIT_CONFIG
    code, message = verify_report(report)
    print(message, file=sys.stdout if code == 0 else sys.stderr)
    return code


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    rows = sweep(cfg, args.param, [v.strip() for v in args.values.split(",") if v.strip()])
    out = args.out or f"sweep_{args.param}.csv"
    write_sweep_csv(rows, out)
    for row in rows:
        print(f"{args.param}={row['value']:<8} verdict={row['verdict']}")
    print(f"wrote {out}")
    return EXIT_PASS if all(r["verdict"] == "pass" for r in rows) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="derivlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one seeded experiment")
    p.add_argument("--config", help="JSON config file (defaults used when omitted)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="path of the JSON report")
    p.add_argument("--csv", help="path of the per-point CSV table")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("verify", help="recompute the verdicts stored in a report")
    p.add_argument("report")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("sweep", help="run a family of experiments over one parameter")
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma separated values")
    p.add_argument("--config")
    p.add_argument("--out", help="CSV path (default sweep_<param>.csv)")
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
