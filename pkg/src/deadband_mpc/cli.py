"""Command-line entry point.

Verbs:
  run <config>      single closed-loop run of the base scenario
  sweep <config>    execute the sweep configured in the file
  timing <config>   same, emphasizing repeated runs for solve-time stats
  validate <config> parse and invariant-check only

Exit codes: 0 success, 2 config error, 3 any run failed fatally. The
environment variable DEADBAND_MPC_OUTPUT_ROOT relocates relative output
directories.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .experiments import ConfigError, ExperimentSpec, SweepAxis, load_config, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deadband-mpc",
        description="Deadband-constrained MPC rendezvous experiments",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, needs_threads in (("run", True), ("sweep", True), ("timing", True), ("validate", False)):
        cmd = sub.add_parser(verb)
        cmd.add_argument("config", help="path to a flat key = value config file")
        if needs_threads:
            cmd.add_argument("--threads", type=int, default=1, help="parallel runs (default 1)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.verb == "validate":
        print(f"{args.config}: ok")
        return 0

    if args.verb == "run":
        spec = ExperimentSpec(
            base=spec.base,
            sweep_axis=SweepAxis.NONE,
            sweep_values=(),
            repetitions=1,
            output_dir=spec.output_dir,
        )
    if args.verb == "timing" and spec.repetitions < 1:
        print("config error: timing requires repetitions >= 1", file=sys.stderr)
        return 2

    threads = max(1, args.threads)
    status = run_experiment(spec, threads=threads)
    if status != 0:
        print("one or more runs failed; see failures.txt", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
