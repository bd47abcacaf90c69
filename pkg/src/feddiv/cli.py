"""Command-line entry point: run, compare, inspect."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .config import VARIANTS, ConfigError, RunConfig, apply_overrides, load_config_file
from .federation import prepare_environment, run_protocol
from .runlog import (COMPARE_CSV_HEADER, LogFormatError, format_inspect_table, read_log,
                     write_jsonl, write_summary)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_INVALID = 2


def _load_config(path: str, overrides: list[str]) -> RunConfig:
    raw = load_config_file(path)
    merged = apply_overrides(raw, overrides or [])
    return RunConfig.from_dict(merged)


def cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config, args.set)
    result = run_protocol(prepare_environment(config), config, workers=args.workers)
    write_jsonl(os.path.join(args.out, "run.jsonl"), result.entries)
    write_summary(os.path.join(args.out, "summary.json"), result.summary)
    print(f"run complete: best test accuracy {result.summary['best_test_accuracy']:.4f} "
          f"(round {result.summary['best_round']}); logs in {args.out}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    base = _load_config(args.config, args.set)
    env = prepare_environment(base)
    rows = []
    for variant in VARIANTS:
        config = replace(base, algorithm_variant=variant)
        result = run_protocol(env, config, workers=args.workers)
        out_dir = os.path.join(args.out, variant)
        write_jsonl(os.path.join(out_dir, "run.jsonl"), result.entries)
        write_summary(os.path.join(out_dir, "summary.json"), result.summary)
        mean_filter = result.summary["mean_filtering_accuracy"]
        rows.append((variant,
                     f"{result.summary['best_test_accuracy']:.6f}",
                     f"{result.summary['final_test_accuracy']:.6f}",
                     "" if mean_filter is None else f"{mean_filter:.6f}"))
    csv_path = os.path.join(args.out, "comparison.csv")
    os.makedirs(args.out, exist_ok=True)
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(COMPARE_CSV_HEADER + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    print(f"comparison written to {csv_path}")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    entries = read_log(args.log)
    print(format_inspect_table(entries))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feddiv",
                                     description="Federated learning with noisy labels, at desk scale")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one experiment from a JSON config")
    run_p.add_argument("config", help="path to the JSON config file")
    run_p.add_argument("--out", required=True, help="output directory for run.jsonl and summary.json")
    run_p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field (repeatable)")
    run_p.add_argument("--workers", type=int, default=1,
                       help="client-parallel worker threads (results are identical)")
    run_p.set_defaults(func=cmd_run)

    cmp_p = sub.add_parser("compare", help="run all variants on identical data and emit a CSV")
    cmp_p.add_argument("config", help="path to the JSON config file")
    cmp_p.add_argument("--out", required=True, help="output directory")
    cmp_p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    cmp_p.add_argument("--workers", type=int, default=1)
    cmp_p.set_defaults(func=cmd_compare)

    ins_p = sub.add_parser("inspect", help="print a per-round table from a run.jsonl")
    ins_p.add_argument("log", help="path to run.jsonl")
    ins_p.set_defaults(func=cmd_inspect)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_PARSE
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON config: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except LogFormatError as exc:
        print(f"error: malformed run log: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
