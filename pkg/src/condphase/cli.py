"""Command line entry point.

Each experiment id is a subcommand taking a JSON config file; sweeps are
structured data, so flags cover only the config path, output path and worker
count.  The master seed can be overridden with the CONDPHASE_SEED environment
variable.  Exit codes: 0 success, 2 invalid config, 3 budget violation, 4
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    run,
    validate,
)
from .inference import BudgetExceeded, InconsistentObservations
from .mcmc import DominationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_INVARIANT = 4


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="condphase",
        description="finite-window experiments on conditional distributions of lattice models",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("run", "validate"):
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON config file")
        p.add_argument("--output", help="CSV output path (overrides config)")
        p.add_argument("--workers", type=int, help="worker processes")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = ExperimentConfig.from_json(args.config)
        if args.command not in ("run", "validate"):
            config.experiment = args.command
        if args.workers:
            config.workers = args.workers
        if args.command == "validate":
            report = validate(config)
            print(json.dumps(report, indent=2))
            return EXIT_OK if report["ok"] else EXIT_CONFIG
        run(config, output=args.output)
        return EXIT_OK
    except (ConfigError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        if isinstance(exc, BudgetExceeded):
            print(f"budget violation: {exc}", file=sys.stderr)
            return EXIT_BUDGET
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget violation: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (DominationError, InconsistentObservations, AssertionError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
