"""Command-line entry point: ``specshare <subcommand> [options]``.

Exit codes: 0 success, 1 acceptance criterion failed, 2 solver failure
in at least one table row, 3 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .exceptions import ConfigError
from .experiments import (
    gnuplot_script,
    load_config,
    parse_config,
    run_basis_sweep,
    run_capacity_sweep,
    run_pdf_experiment,
    run_timeseries,
    write_table,
)

EXIT_OK = 0
EXIT_ACCEPTANCE = 1
EXIT_SOLVER = 2
EXIT_CONFIG = 3

_RUNNERS = {
    "capacity-sweep": run_capacity_sweep,
    "rap-pdf": run_pdf_experiment,
    "rap-timeseries": run_timeseries,
    "basis-sweep": run_basis_sweep,
}


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value config file")
    common.add_argument("--seed", type=_u64, help="override the config seed")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")

    parser = argparse.ArgumentParser(prog="specshare", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, runner in _RUNNERS.items():
        p = sub.add_parser(name, parents=[common], help=runner.__doc__.splitlines()[0])
        p.add_argument("--samples", type=int, help="override n_samples")
        p.add_argument("--gnuplot", action="store_true", help="also write <out>.gp (requires --out)")
    p = sub.add_parser(
        "acceptance", parents=[common], help="Run the numbered acceptance checks, one PASS/FAIL line each."
    )
    p.add_argument("--only", type=int, nargs="+", metavar="N", help="criterion numbers to run")
    return parser


def _config(args, **extra):
    overrides = dict(seed=args.seed, **extra)
    if args.config is not None:
        return load_config(args.config, **overrides)
    return parse_config("", **overrides)


def _run_experiment(args) -> int:
    config = _config(args, n_samples=args.samples, output_path=str(args.out) if args.out else None)
    table = _RUNNERS[args.command](config)
    if args.out is None:
        if args.gnuplot:
            raise ConfigError("--gnuplot needs --out so the script can reference the CSV")
        sys.stdout.write(table.to_csv())
    else:
        write_table(table, args.out)
        if args.gnuplot:
            args.out.with_suffix(".gp").write_text(gnuplot_script(table, args.out))
    if table.failures:
        print(f"{len(table.failures)} solver failure(s); see status column", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _run_acceptance(args) -> int:
    from .acceptance import run_all

    config = _config(args)
    lines = []
    ok = True
    for result in run_all(config, only=args.only):
        lines.append(result.line())
        print(lines[-1], flush=True)
        ok &= result.passed
    if args.out is not None:
        args.out.write_text("\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_ACCEPTANCE


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "acceptance":
            return _run_acceptance(args)
        return _run_experiment(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
