"""Command-line driver for the staged verification pipeline.

Exit codes: 0 all executed checks passed, 1 a check failed or a stage raised,
2 the configuration was malformed (nothing is written in that case).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import ConfigError, load_config, run_suite, validate_config

_SUBCOMMANDS = {
    "assemble": ("assemble",),
    "gap": ("assemble", "gap"),
    "branches": ("assemble", "gap", "branches"),
    "chain": ("assemble", "gap", "branches", "chain"),
    "decompose": ("assemble", "gap", "branches", "chain", "green"),
    "verify": None,
}

_HELP = {
    "assemble": "build the collision operators and write them out",
    "gap": "scan kappa for the spectral gap and long-wave threshold",
    "branches": "trace the fluid dispersion branches and fit them",
    "chain": "integrate the expansion chain for the configured field",
    "decompose": "split the mode solution into its decay buckets",
    "verify": "run every stage and print one line per acceptance check",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landaulab",
        description="staged pipeline for the lattice collision-operator study",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, stages in _SUBCOMMANDS.items():
        del stages
        sp = sub.add_parser(name, help=_HELP[name])
        sp.add_argument("--config", type=Path, default=None,
                        help="JSON config file (defaults are built in)")
        sp.add_argument("--out", type=Path, default=Path("landaulab-out"),
                        help="artifact directory")
        speed = sp.add_mutually_exclusive_group()
        speed.add_argument("--fast", action="store_true",
                           help="skip the expensive checks (default)")
        speed.add_argument("--slow", action="store_true",
                           help="include the fine-grid and regime checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        else:
            cfg = validate_config({})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        report = run_suite(
            cfg,
            args.out,
            fast=not args.slow,
            slow=args.slow,
            stages=_SUBCOMMANDS[args.command],
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - deliberate: exit 1 on any stage failure
        print(f"pipeline failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    for check in report.checks:
        print(check.line())
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict}: {len(report.stages_done)} stage(s), artifacts in {args.out}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
