"""Command-line entry point: ``pivchol <subcommand> [options]``.

Exit codes: 0 success, 1 input error, 2 bound violation, 3 numerical breakdown.
"""

import argparse
import sys

from .errors import BreakdownError, ConfigError, NumericalError, ResourceLimitError
from .experiments import (
    EXIT_BREAKDOWN, EXIT_INPUT, ExperimentConfig, cmd_bounds, cmd_catalog, cmd_convergence,
    cmd_gp_demo, cmd_matrix, parse_config, read_config,
)


def _load(args):
    entries = read_config(args.config) if args.config else {}
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        entries[key.strip()] = value.strip()
    if args.strategy is not None:
        entries["strategy"] = args.strategy
    if args.seed is not None:
        entries["seed"] = str(args.seed)
    return parse_config(entries) if entries else ExperimentConfig()


def build_parser():
    parser = argparse.ArgumentParser(prog="pivchol", description="Pivoted Cholesky experiments on SPD kernels.")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value experiment file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry")
        p.add_argument("--strategy", help="complete | delta:<d> | uniform:<m> | random:<seed> | maxvol:<sweeps>")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="CSV output path")
        return p

    conv = experiment("convergence", "run a factorization, write its trace and fit the decay rate")
    conv.add_argument("--timing", action="store_true", help="include wall_time_ms in the CSV")
    experiment("bounds", "check every applicable error bound along a run")
    experiment("gp-demo", "GP regression at complete-pivoting sites")
    mat = sub.add_parser("matrix", help="complete-pivoting Cholesky on a matrix file")
    mat.add_argument("path")
    mat.add_argument("--n-max", type=int)
    mat.add_argument("--out")
    cat = sub.add_parser("catalog", help="list kernels and their constants")
    cat.add_argument("--dim", type=int, default=1)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    out = sys.stdout
    try:
        if args.command == "catalog":
            return cmd_catalog(out, args.dim)
        if args.command == "matrix":
            return cmd_matrix(args.path, args.n_max, args.out, out)
        cfg = _load(args)
        if args.command == "convergence":
            return cmd_convergence(cfg, args.out, out, args.timing)
        if args.command == "bounds":
            return cmd_bounds(cfg, args.out, out)
        return cmd_gp_demo(cfg, args.out, out)
    except (ConfigError, ResourceLimitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (BreakdownError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN


if __name__ == "__main__":
    sys.exit(main())
