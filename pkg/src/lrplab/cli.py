"""Command-line entry point: one subcommand per experiment kind."""

from __future__ import annotations

import argparse
import json
import sys

from .harness import EXIT_INFEASIBLE, EXIT_IO, KINDS, ExperimentConfig, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lrplab",
        description="Long-range percolation simulation laboratory",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", required=True, help="path to a JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--replicas", type=int, default=None, help="override the replica count")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument(
            "--threads", type=int, default=None,
            help="worker threads (affects speed, never output bytes)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    for key in ("seed", "replicas", "out", "threads"):
        val = getattr(args, key)
        if val is not None:
            raw[key] = val
    try:
        config = ExperimentConfig.from_dict(raw, kind=args.kind)
    except (ValueError, KeyError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    code, summary = run_experiment(config)
    if "error" in summary.get("results", summary):
        detail = summary.get("results", summary).get("error")
        print(f"error: {detail}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
