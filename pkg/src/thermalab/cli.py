"""``thermalab`` command-line driver.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

import argparse
import sys

from .config import apply_overrides, load_config
from .errors import ConfigError, NumericFailure

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("spectrum", "evolve", "eth", "report")


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    p = argparse.ArgumentParser(prog="thermalab",
                                description="Random-matrix thermalization experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="INI-style experiment configuration")
    p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, help="worker threads (default: $THERMALAB_JOBS or all cores)")
    p.add_argument("--n-levels", type=int, dest="n_levels")
    p.add_argument("--delta", type=float)
    p.add_argument("--lambda", type=float, dest="coupling", help="microscopic coupling")
    return p


def run(argv=None):
    from . import runner

    args = build_parser().parse_args(argv)
    try:
        config = apply_overrides(load_config(args.config), seed=args.seed, out=args.out,
                                 jobs=args.jobs, n_levels=args.n_levels, delta=args.delta,
                                 coupling=args.coupling)
        if args.command == "spectrum":
            result = runner.run_spectrum(config)
        elif args.command == "evolve":
            result = runner.run_evolve(config)
        elif args.command == "eth":
            result = runner.run_eth(config)
        else:
            result = runner.run_report(config.output_dir)
    except ConfigError as exc:
        print(f"thermalab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"thermalab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"thermalab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # invalid physical parameters that survived parsing
        print(f"thermalab: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if isinstance(result, dict):
        print(f"thermalab {args.command}: wrote {config.output_dir}")
    else:
        print(f"thermalab report: wrote {result}")
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
