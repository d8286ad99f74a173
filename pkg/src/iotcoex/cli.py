"""Command line entry point.

Exit codes: 0 success, 2 configuration or input error, 3 runtime or audit error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import output
from .config import ScenarioConfig, load_config
from .errors import ConfigError, ParseError, SimulationError, ValidationError
from .runner import compare_modes, run_experiment, summarize, sweep_density, sweep_tolerance, trial_topology
from .spectrum import SharingMode
from .topology import write_bs_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
DEFAULT_TOLERANCES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
DEFAULT_ISDS = (500.0, 1000.0, 2000.0)


def _common(p: argparse.ArgumentParser, out: bool = True) -> None:
    p.add_argument("--config", type=Path, help="scenario JSON; defaults apply when omitted")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--trials", type=int, help="number of trials (overrides the config)")
    if out:
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        p.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iotcoex", description="IoT/LTE coexistence under network sharing")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    _common(p)
    p.add_argument("--mode", choices=[m.value for m in SharingMode])

    p = sub.add_parser("sweep-tolerance", help="admitted devices versus tolerated degradation")
    _common(p)
    p.add_argument("--tolerances", type=float, nargs="+", default=list(DEFAULT_TOLERANCES))
    p.add_argument("--modes", nargs="+", choices=[m.value for m in SharingMode], default=["none", "pooling"])

    p = sub.add_parser("sweep-density", help="admitted devices versus inter-site distance")
    _common(p)
    p.add_argument("--isd", type=float, nargs="+", default=list(DEFAULT_ISDS), help="inter-site distances (m)")
    p.add_argument("--modes", nargs="+", choices=[m.value for m in SharingMode], default=["none", "pooling"])

    p = sub.add_parser("compare-modes", help="paired sharing modes versus no sharing")
    _common(p)
    p.add_argument("--modes", nargs="+", choices=[m.value for m in SharingMode])

    p = sub.add_parser("validate-config", help="check a config, or print the defaults")
    p.add_argument("--config", type=Path)
    p.add_argument("--print-defaults", action="store_true")

    p = sub.add_parser("gen-topology", help="write the base-station layout of one trial as CSV")
    _common(p, out=False)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("bs.csv"), help="output CSV path")
    return parser


def _load(args) -> ScenarioConfig:
    config = load_config(args.config) if args.config else ScenarioConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["master_seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "mode", None) is not None:
        changes["mode"] = SharingMode(args.mode)
    if not changes:
        return config
    try:
        return config.replace(**changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _outdir(args) -> Path:
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def cmd_run(args) -> int:
    config = _load(args)
    summary, results = run_experiment(config, args.workers)
    out = _outdir(args)
    output.write_table(out / "trials", output.TRIAL_COLUMNS, map(output.trial_row, results), args.format)
    output.write_json(out / "summary.json", output.summary_payload(config, [summary]))
    s = summary.admitted
    print(f"{summary.mode}: {s.n} trials, admitted mean {s.mean:.2f} (std {s.std:.2f}, ci95 ±{s.ci95:.2f})")
    return EXIT_OK


def _write_sweep(args, rows, name: str) -> int:
    out = _outdir(args)
    path = output.write_table(out / name, output.SWEEP_COLUMNS, map(output.sweep_row, rows), args.format)
    for r in rows:
        print(f"{r.param:>10g} {r.mode:<8} mean {r.mean:9.2f}  ratio {r.ratio:.3f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_sweep_tolerance(args) -> int:
    rows = sweep_tolerance(_load(args), args.tolerances, args.modes, args.workers)
    return _write_sweep(args, rows, "sweep_tolerance")


def cmd_sweep_density(args) -> int:
    rows = sweep_density(_load(args), args.isd, args.modes, args.workers)
    return _write_sweep(args, rows, "sweep_density")


def cmd_compare_modes(args) -> int:
    config = _load(args)
    cmp = compare_modes(config, args.modes, args.workers)
    out = _outdir(args)
    columns = list(cmp.counts) + [f"ratio_{m}" for m in list(cmp.counts)[1:]]
    output.write_table(out / "comparison", ("trial_index", "seed", *columns), output.comparison_rows(cmp), args.format)
    output.write_json(out / "summary.json", {
        **output.comparison_payload(config, cmp),
        "results": [summarize(v) for v in cmp.results.values()],
    })
    for m in list(cmp.counts)[1:]:
        print(f"{m}/none: mean ratio {cmp.mean_ratio[m]:.3f}, ratio of means {cmp.ratio_of_means[m]:.3f}, "
              f"min paired difference {min(cmp.differences[m])}")
    return EXIT_OK


def cmd_validate_config(args) -> int:
    if args.print_defaults:
        sys.stdout.write(ScenarioConfig().to_json())
        return EXIT_OK
    if not args.config:
        raise ConfigError("validate-config needs --config or --print-defaults")
    config = load_config(args.config)
    config.build_operators()
    print(f"{args.config}: ok")
    return EXIT_OK


def cmd_gen_topology(args) -> int:
    t = trial_topology(_load(args), args.trial)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_bs_csv(t, args.out)
    print(f"wrote {len(t)} base stations to {args.out}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep-tolerance": cmd_sweep_tolerance,
    "sweep-density": cmd_sweep_density,
    "compare-modes": cmd_compare_modes,
    "validate-config": cmd_validate_config,
    "gen-topology": cmd_gen_topology,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
