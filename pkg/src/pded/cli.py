"""Command-line entry point: gen, run, report, bank.

Exit codes: 0 success, 1 usage error, 2 runtime error. All failures print
a single machine-parseable line to stderr prefixed with "pded-error:".
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bank as bank_mod
from . import engine, report, solver
from .errors import PdedError


class UsageError(Exception):
    def __init__(self, message: str, usage: str = ""):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as exit code 1."""

    def error(self, message):
        raise UsageError(message, self.format_usage())


def _build_parser() -> _Parser:
    parser = _Parser(prog="pded", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    p_gen = sub.add_parser(
        "gen", help="generate a benchmark dataset",
        description="Solve one benchmark PDE and write the dataset container.")
    p_gen.add_argument("--pde", required=True,
                       help=f"one of {', '.join(solver.pde_names())}")
    p_gen.add_argument("--out", required=True, help="output .pded path")
    p_gen.add_argument("--seed", type=int, default=0,
                       help="initial-condition seed (default 0)")

    p_run = sub.add_parser(
        "run", help="run discovery trials",
        description="Run the configured trials, one JSONL log per trial.")
    p_run.add_argument("--config", required=True, help="run config JSON")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--resume", default=None,
                       help="checkpoint file to resume from")
    p_run.add_argument("--jobs", type=int, default=None,
                       help="parallel trial workers (default: trial count)")

    p_rep = sub.add_parser(
        "report", help="aggregate run logs",
        description="Summarize runs into CSV/table, trajectories, figures.")
    p_rep.add_argument("--runs", required=True, help="directory of trial logs")
    p_rep.add_argument("--format", choices=("csv", "table"), default="csv")
    p_rep.add_argument("--out", required=True, help="output directory")
    p_rep.add_argument("--no-figures", action="store_true",
                       help="skip figure rendering")

    p_bank = sub.add_parser("bank", help="strategy bank tooling")
    bank_sub = p_bank.add_subparsers(dest="bank_command", metavar="subcommand")
    p_val = bank_sub.add_parser("validate", help="validate a bank file")
    p_val.add_argument("--path", required=True)
    p_genb = bank_sub.add_parser(
        "generate", help="regenerate a bank via an LLM endpoint")
    p_genb.add_argument("--out", required=True)
    p_genb.add_argument("--k", type=int, default=100)
    p_genb.add_argument("--base-url", required=True)
    p_genb.add_argument("--model", required=True)
    return parser


def _cmd_gen(args) -> int:
    try:
        spec = solver.pde_spec(args.pde)
    except KeyError as exc:
        raise UsageError(str(exc.args[0]))
    dataset = solver.generate_named(spec.name, ic_seed=args.seed)
    solver.save_dataset(dataset, args.out)
    print(f"wrote {args.out} [{dataset.nx} x {dataset.nt}] "
          f"crc32={dataset.payload_crc32:08x}")
    return 0


def _cmd_run(args) -> int:
    config_path = Path(args.config)
    try:
        raw = json.loads(config_path.read_text(encoding="utf-8"))
        config = engine.RunConfig.from_json(raw)
    except (OSError, ValueError) as exc:
        raise UsageError(f"bad run config {config_path}: {exc}")
    if args.resume:
        footer = engine.resume(config, args.resume, args.out)
        print(f"resumed trial finished; y_star={footer.get('y_star')}")
        return 0
    footers = engine.run(config, args.out, jobs=args.jobs)
    for i, footer in enumerate(footers):
        print(f"trial {i}: y_star={footer.get('y_star')} "
              f"r2_test={footer.get('r2_test')}")
    return 0


def _cmd_report(args) -> int:
    written = report.report(args.runs, args.out, fmt=args.format,
                            figures=not args.no_figures)
    if args.format == "table":
        print(report.render_table(written["summary_rows"]))
    for row in written["summary_rows"]:
        if row["flag"]:
            print(f"warning: {row['pde']}/{row['mode']}: {row['flag']}",
                  file=sys.stderr)
    print(f"report written to {args.out}")
    return 0


def _cmd_bank(args, parser: _Parser) -> int:
    if args.bank_command == "validate":
        b = bank_mod.load_bank(args.path)
        counts = {}
        for s in b.strategies:
            counts[s.category.value] = counts.get(s.category.value, 0) + 1
        print(f"valid bank: K={b.K} " +
              " ".join(f"{k}={v}" for k, v in sorted(counts.items())))
        return 0
    if args.bank_command == "generate":
        b = bank_mod.generate_bank(args.base_url, args.model, args.out,
                                   k=args.k)
        print(f"wrote {args.out} with K={b.K}")
        return 0
    raise UsageError("bank requires a subcommand",
                     "usage: pded bank {validate,generate} ...\n")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help exits 0 through here
            return int(exc.code or 0)
        if args.command is None:
            raise UsageError("a command is required", parser.format_usage())
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
        return _cmd_bank(args, parser)
    except UsageError as exc:
        if exc.usage:
            print(exc.usage, end="", file=sys.stderr)
        print(f"pded-error: {exc}", file=sys.stderr)
        return 1
    except PdedError as exc:
        print(f"pded-error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"pded-error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
