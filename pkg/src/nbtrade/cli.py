"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric or stability error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from .config import Config
from .errors import ConfigError, NumericError
from .scenario import (Sweep, bundled_scenarios, compare_engines, load_scenario,
                       reference_costs_csv, run_scenario, write_result)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _parse_set(items):
    overrides = {}
    for item in items or ():
        path, sep, raw = item.partition("=")
        if not sep or not path:
            raise ConfigError("set", f"expected PATH=VALUE, got {item!r}")
        try:
            overrides[path.strip()] = yaml.safe_load(raw)
        except yaml.YAMLError:
            raise ConfigError(path, f"cannot parse value {raw!r}") from None
    return overrides


def _load_config(args) -> Config:
    cfg = Config.load(args.config) if args.config else Config.defaults()
    overrides = _parse_set(args.set)
    if args.seed is not None:
        overrides["simulation.seed"] = args.seed
    if args.workers is not None:
        overrides["simulation.workers"] = args.workers
    return cfg.with_values(overrides) if overrides else cfg


def _check_replications(n):
    if n is not None and n < 1:
        raise ConfigError("simulation.n_replications", "must be >= 1")
    return n


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    changes = {}
    if args.engine:
        changes["engine"] = args.engine
    if args.sweep:
        changes["sweep"] = Sweep.parse(args.sweep)
    if args.protocols:
        changes["protocols"] = tuple(args.protocols.split(","))
    if changes:
        scenario = scenario.replace(**changes)
    config = _load_config(args)
    result = run_scenario(scenario, config, _check_replications(args.replications))
    out = Path(args.output) if args.output else Path(scenario.output_dir)
    for path in write_result(result, out):
        print(f"wrote {path}")
    if not args.quiet:
        print(result.summary(), end="")
    return EXIT_OK


def cmd_compare(args) -> int:
    config = _load_config(args)
    result = compare_engines(config, tuple(args.protocols.split(",")),
                             _check_replications(args.replications))
    out = Path(args.output)
    for path in write_result(result, out):
        print(f"wrote {path}")
    print(result.summary(), end="")
    return EXIT_OK


def cmd_reference_costs(args) -> int:
    text = reference_costs_csv()
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "reference_costs.csv").write_text(text, encoding="utf-8", newline="")
        print(f"wrote {out / 'reference_costs.csv'}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_scenarios(args) -> int:
    for name in bundled_scenarios():
        print(name)
    return EXIT_OK


def cmd_config(args) -> int:
    sys.stdout.write(_load_config(args).dump())
    return EXIT_OK


def _config_flags(p):
    p.add_argument("--config", metavar="PATH", help="YAML config (default: bundled defaults)")
    p.add_argument("--set", action="append", metavar="PATH=VALUE",
                   help="override one config value, e.g. dlt.n_miners=5")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="parallel replication processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nbtrade",
        description="Latency, energy and battery lifetime of DLT data trading over NB-IoT.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write CSV reports")
    p.add_argument("scenario", help="bundled scenario name or path to a scenario YAML")
    _config_flags(p)
    p.add_argument("--replications", type=int)
    p.add_argument("--engine", choices=("analytic", "sim", "simulation", "both"))
    p.add_argument("--output", metavar="DIR")
    p.add_argument("--sweep", metavar="PATH=v1,v2,...")
    p.add_argument("--protocols", metavar="GT,BoD,SoD")
    p.add_argument("--quiet", action="store_true", help="do not print the summary")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="analytic vs simulated values with 95%% CIs")
    _config_flags(p)
    p.add_argument("--replications", type=int)
    p.add_argument("--protocols", default="GT", metavar="GT,BoD,SoD")
    p.add_argument("--output", default="compare", metavar="DIR")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("reference-costs", help="smart-contract deployment cost table")
    p.add_argument("--output", metavar="DIR")
    p.set_defaults(func=cmd_reference_costs)

    p = sub.add_parser("scenarios", help="list bundled scenarios")
    p.set_defaults(func=cmd_scenarios)

    p = sub.add_parser("config", help="print the effective config as YAML")
    _config_flags(p)
    p.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
