"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(dimension caps, non-convergence).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bhchaos",
        description="Bose-Hubbard chaos experiments: exact dynamics, "
                    "mean-field, TWA, OTOCs, spectral statistics.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("cbs", "Fock-space return-probability enhancement on a disordered ring"),
        ("otoc", "out-of-time-order correlator at a hyperbolic relative equilibrium"),
        ("spectral", "disorder-ensemble form factor and spacing statistics"),
        ("actions", "dimer density-of-states action spectroscopy"),
        ("twa", "truncated Wigner occupations vs. exact evolution"),
        ("modes", "catalog of relative-periodic mean-field modes"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", required=True, help="path to an INI-style config")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override [run] seed")
        p.add_argument("--threads", type=int, default=None,
                       help="cap BLAS/OpenMP threads")
        p.add_argument("--max-dim", type=int, default=None,
                       help="override the Fock-sector dimension cap")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from .harness import (ConfigError, NumericalError, parse_config,
                          run_experiment, write_results)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = parse_config(text)
        if config.kind != args.command:
            raise ConfigError(
                f"config kind {config.kind!r} does not match "
                f"subcommand {args.command!r}")
        if args.seed is not None:
            config.seed = args.seed
        if args.max_dim is not None:
            config.max_dim = args.max_dim
        if args.threads is not None:
            config.threads = args.threads
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        table = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = write_results(table, args.out)
    print(f"wrote {out / 'results.csv'} and {out / 'manifest.json'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
