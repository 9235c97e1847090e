"""Command-line front end: advbench <subcommand> --config <path> [--seed N] [--out DIR].

Subcommands run a single phase against the config's output tree; `run`
executes the config's full phase list. Exit codes: 0 success, 2 validation,
3 numeric, 4 IO.
"""

from __future__ import annotations

import argparse
import sys

from .errors import AdvBenchError, exit_code_for
from .harness.experiment import PHASES
from .harness.runner import run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advbench",
        description="Robustness evaluation: attacks, defenses, benchmark, reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("train", "train the configured zoo model"),
        ("attack", "attack the test split with the configured budget"),
        ("defend", "train the configured defense methods"),
        ("bench", "materialize the common-perturbation benchmark"),
        ("eval", "compute metrics over existing artifacts"),
        ("report", "render tables and figures from eval artifacts"),
        ("run", "execute the config's full phase list"),
    ]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="YAML or JSON config file")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
        cmd.add_argument("--out", default=None, help="override the output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    phases = None if args.command == "run" else [args.command]
    try:
        record = run_experiment(
            config_path=args.config, phases=phases, seed=args.seed, out=args.out
        )
    except (AdvBenchError, OSError) as exc:
        print(f"advbench: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    for phase, seconds in record.phase_timings.items():
        print(f"{phase}: {seconds:.2f}s")
    for key, value in sorted(record.metrics.items()):
        print(f"{key}: {value}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
