"""Command-line entry point ``fockqms``.

Exit codes: 0 ok, 1 usage, 2 schema, 3 budget, 4 dominance failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from pydantic import ValidationError

from .config import bundled_scenarios, load_config
from .gksl import BudgetError

EXIT_OK, EXIT_USAGE, EXIT_SCHEMA, EXIT_BUDGET, EXIT_DOMINANCE = 0, 1, 2, 3, 4
ENV_PREFIX = "FOCKQMS_"
COMMON = ("config", "out", "seed", "jobs", "budget_dim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fockqms", description="Moment bounds and dynamics of bosonic semigroups.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, config_required=True):
        p.add_argument("--config", help="scenario JSON path or bundled scenario name")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=_u64)
        p.add_argument("--jobs", type=int)
        p.add_argument("--budget-dim", dest="budget_dim", type=int)
        p.set_defaults(config_required=config_required)

    for name in ("evolve", "certify", "catcode", "multimode"):
        common(sub.add_parser(name, help=f"run a {name} scenario"))
    sw = sub.add_parser("sweep", help="run a scenario over a list of parameter values")
    common(sw)
    sw.add_argument("--param", required=True, help="dotted parameter path, e.g. certificate.k")
    sw.add_argument("--values", required=True, help="JSON list of values")
    st = sub.add_parser("selftest", help="run the acceptance suite")
    common(st, config_required=False)
    st.add_argument("--only", help="comma-separated criterion numbers")
    sub.add_parser("list", help="list bundled scenarios")
    return parser


def _apply_env(args):
    for name in COMMON:
        if getattr(args, name, None) is None:
            env = os.environ.get(ENV_PREFIX + name.upper())
            if env is not None:
                if name in ("seed", "jobs", "budget_dim"):
                    try:
                        env = int(env)
                    except ValueError as exc:
                        raise UsageError(f"{ENV_PREFIX}{name.upper()} must be an integer") from exc
                setattr(args, name, env)
    if getattr(args, "jobs", None) is None:
        args.jobs = 1
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["seed"] = args.seed
    if args.budget_dim is not None:
        out["budget_dim"] = args.budget_dim
    return out


def _run(args) -> int:
    from .runner import run_scenario, sweep

    if args.command == "list":
        for name in sorted(bundled_scenarios()):
            print(name)
        return EXIT_OK
    if args.command == "selftest":
        from .acceptance import run_all
        only = None if not args.only else [int(x) for x in args.only.split(",")]
        results = run_all(only)
        for r in results:
            print(r.line())
        return EXIT_OK if all(r.passed for r in results) else EXIT_DOMINANCE
    if not args.config:
        raise UsageError("--config is required")
    config = load_config(args.config, _overrides(args))
    if args.command == "sweep":
        try:
            values = json.loads(args.values)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--values is not valid JSON: {exc}") from exc
        if not isinstance(values, list):
            raise UsageError("--values must be a JSON list")
        reports = sweep(config, args.param, values, jobs=args.jobs, out=args.out)
        for v, r in zip(values, reports):
            print(f"{args.param}={json.dumps(v)}: {'PASS' if r.passed else 'FAIL'} worst_slack={r.worst_slack!r}")
        return EXIT_OK if all(r.passed for r in reports) else EXIT_DOMINANCE
    if config.experiment != args.command:
        raise UsageError(f"scenario {config.name!r} is a {config.experiment} scenario, not {args.command}")
    report = run_scenario(config, args.out)
    print(f"{report.name}: {'PASS' if report.passed else 'FAIL'} worst_slack={report.worst_slack!r}")
    return EXIT_OK if report.passed else EXIT_DOMINANCE


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        _apply_env(args)
        return _run(args)
    except UsageError as exc:
        print(f"fockqms: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"fockqms: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, json.JSONDecodeError, KeyError) as exc:
        print(f"fockqms: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except BudgetError as exc:
        print(f"fockqms: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
