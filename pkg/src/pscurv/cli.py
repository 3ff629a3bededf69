"""Command-line entry point ``pscurv``.

Examples
--------
::

    pscurv run --scenario TRIVIAL_ODE --out runs/trivial
    pscurv run --all --jobs 2 --out runs
    pscurv csf --scenario CSF_CIRCLE
    pscurv stationary --f 0.5 1 2
    pscurv evolve --config my.ini --set solver.t_end=0.5
    pscurv report runs
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import config as cfgmod
from .config import ConfigError, Scenario
from .pipeline import STAGES, RunResult, run_scenario, stationary_constants, write_artifacts
from .report import MissingArtifacts, report

log = logging.getLogger("pscurv")

OUTPUT_ROOT_ENV = "PSCURV_OUTPUT_ROOT"

_STAGES = {
    "evolve": ("evolve",),
    "stationary": ("stationary",),
    "csf": ("evolve", "diagnose", "stationary"),
    "diagnose": ("evolve", "diagnose", "stationary"),
    "extend": ("evolve", "extend"),
    "run": STAGES,
}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", action="append", default=[], metavar="PATH",
                   help="INI config file (repeat for a batch)")
    p.add_argument("--scenario", type=str.upper, choices=[s.value for s in Scenario],
                   help="scenario preset (overrides [run] scenario)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config entry")
    p.add_argument("--out", type=Path, help=f"output directory (default ${OUTPUT_ROOT_ENV}/<scenario>)")
    p.add_argument("--seed", type=int, help="seed for randomized checks")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for batches")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pscurv", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("evolve", "integrate a scenario and write the trajectory"),
        ("stationary", "solve the stationary equation"),
        ("csf", "curve shortening flow scenarios"),
        ("diagnose", "evolve and run the inequality diagnostics"),
        ("extend", "evolve and build the extension report"),
        ("run", "full pipeline"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        if name == "run":
            p.add_argument("--all", action="store_true", help="run every preset scenario")
        if name == "stationary":
            p.add_argument("--f", type=float, nargs="+", metavar="F",
                           help="constant sources to check against 1/sqrt(2 f)")
    p = sub.add_parser("report", help="summarize run directories")
    p.add_argument("run_dir", type=Path)
    return parser


def _configs(args) -> list:
    """Resolve configs from files, presets and overrides; raises ConfigError."""
    if getattr(args, "all", False):
        base = [cfgmod.preset(s) for s in Scenario if s is not Scenario.CUSTOM]
    elif args.config:
        base = [cfgmod.load(p) for p in args.config]
    else:
        default = "CSF_ELLIPSE" if args.command == "csf" else "TRIVIAL_ODE"
        base = [cfgmod.preset(args.scenario or default)]
    out = []
    for cfg in base:
        items = list(args.overrides)
        if args.scenario and (args.config or getattr(args, "all", False)):
            items.append(f"run.scenario={args.scenario}")
        if args.seed is not None:
            items.append(f"run.seed={args.seed}")
        if items:
            cfg = cfg.with_overrides(items)
        if args.command == "csf" and cfg.scenario not in (Scenario.CSF_CIRCLE, Scenario.CSF_ELLIPSE):
            raise ConfigError("run", "scenario", "csf needs CSF_CIRCLE or CSF_ELLIPSE")
        out.append(cfg)
    return out


def _out_dir(args, name: str, many: bool) -> Path:
    if args.out is not None:
        return args.out / name if many else args.out
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "pscurv-runs")) / name


def _print(result: RunResult, out: Path):
    status = "PASS" if result.passed else "FAIL"
    print(f"{result.config.scenario.value}: {status} -> {out}")
    for c in result.checks:
        print(f"  {'ok ' if c.passed else 'BAD'} {c.name} = {c.value!r} ({c.op} {c.bound!r})")


def _execute(args, cfg, name: str, many: bool) -> tuple[RunResult, Path]:
    if args.command == "stationary" and args.f:
        result = stationary_constants(cfg, tuple(args.f))
    else:
        result = run_scenario(cfg, _STAGES[args.command])
    out = _out_dir(args, name, many)
    write_artifacts(result, out)
    return result, out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report":
        try:
            print(report(args.run_dir), end="")
        except MissingArtifacts as exc:
            print(f"error: missing artifacts: {exc}", file=sys.stderr)
            return 1
        return 0
    try:
        configs = _configs(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    names = [c.scenario.value.lower() for c in configs]
    if len(set(names)) < len(names):
        # same scenario twice in a batch: keep the directories apart
        names = [f"{k:02d}_{n}" for k, n in enumerate(names)]
    many = len(configs) > 1
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        outcomes = list(pool.map(lambda job: _execute(args, *job, many), zip(configs, names)))
    ok = True
    for result, out in outcomes:
        _print(result, out)
        ok = ok and result.passed
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
