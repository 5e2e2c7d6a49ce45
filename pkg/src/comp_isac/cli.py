"""Command line entry point.

Subcommands: ``validate-pod`` (closed form vs Monte Carlo detection
probability), ``sweep-budget`` and ``sweep-pod`` (sum-rate sweeps over
the power budget or the detection threshold), ``solve`` (one allocation
instance, printed as structured text) and ``plot`` (SVG from a CSV).

Exit codes: 0 success, 1 config error, 2 infeasible-everywhere sweep or
infeasible instance, 3 numerical failure. Every error path writes a
single machine-readable line to stderr:  error: <ErrorClass>: <reason>
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import allocator, harness
from .channel import sample_channels
from .errors import (
    AccuracyError,
    ConfigError,
    DomainError,
    InfeasibleError,
    RankDeficiencyError,
    SamplingExhaustedError,
    SolverError,
)

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as config errors (exit 1)."""

    def error(self, message):
        raise ConfigError("argv", message)


def _add_common(sub, seed=True, out=True):
    sub.add_argument("--config", metavar="<path>", default=None, help="YAML config file")
    if seed:
        sub.add_argument("--seed", metavar="<u64>", type=int, default=None,
                         help="override the scenario seed")
    if out:
        sub.add_argument("--out", metavar="<dir>", default=".",
                         help="output directory (default: current directory)")


def _build_parser():
    parser = _Parser(
        prog="comp-isac",
        description="Coordinated multi-point ISAC detection and power allocation experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="<command>")

    p = sub.add_parser("validate-pod", help="closed-form vs Monte Carlo detection probability")
    _add_common(p)
    p.add_argument("--trials", metavar="<n>", type=int, default=None,
                   help="Monte Carlo trials per grid point")

    for name, blurb in (
        ("sweep-budget", "sum rate vs power budget"),
        ("sweep-pod", "sum rate vs detection-probability threshold"),
    ):
        p = sub.add_parser(name, help=blurb)
        _add_common(p)
        p.add_argument("--schemes", metavar="<list>", default=None,
                       help="comma-separated subset of ppa,epa,rpa")

    p = sub.add_parser("solve", help="solve one allocation instance and print the result")
    _add_common(p, out=False)

    p = sub.add_parser("plot", help="render an SVG from a sweep CSV")
    p.add_argument("csv", metavar="<csv>", help="file produced by a sweep command")
    p.add_argument("--out", metavar="<dir>", default=".", help="output directory")
    return parser


def _scenario(args):
    cfg = harness.load_config(args.config)
    scenario = cfg.scenario
    if getattr(args, "seed", None) is not None:
        scenario = scenario.replace(seed=args.seed)
    return scenario, cfg.sweeps


def _spec_overrides(spec, args):
    changes = {}
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "schemes", None) is not None:
        changes["schemes"] = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    if not changes:
        return spec
    fields = {k: getattr(spec, k) for k in
              ("variable", "start", "stop", "step", "schemes", "trials",
               "snapshots", "rpa_seed", "workers")}
    fields.update(changes)
    return harness.SweepSpec(**fields)


def _write_rows(rows, out_dir, filename):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / filename
    harness.emit_csv(rows, path)
    print(path)
    return path


def _cmd_validate_pod(args):
    scenario, sweeps = _scenario(args)
    spec = _spec_overrides(sweeps["pod_validation"], args)
    rows = harness.run_pod_validation(scenario, spec)
    if not any(r.pod_mc is not None for r in rows):
        raise InfeasibleError("no sweep point produced an allocation to validate")
    _write_rows(rows, args.out, "pod_validation.csv")
    return 0


def _cmd_sweep(args, sweep_name, filename):
    scenario, sweeps = _scenario(args)
    spec = _spec_overrides(sweeps[sweep_name], args)
    rows = harness.run_rate_sweep(scenario, spec)
    if not any(r.feasible for r in rows):
        raise InfeasibleError("every point of the sweep is infeasible for every scheme")
    _write_rows(rows, args.out, filename)
    return 0


def _cmd_solve(args):
    scenario, _ = _scenario(args)
    realization = sample_channels(scenario)
    result = allocator.optimize_ppa(scenario, realization)

    def vec(v):
        return " ".join(format(float(x), ".9g") for x in np.atleast_1d(v))

    print("scheme: ppa")
    print(f"feasible: {'true' if result.feasible else 'false'}")
    print(f"P: {vec(result.P)}")
    print(f"per_user_rate: {vec(result.per_user_rate)}")
    print(f"sum_rate: {format(result.sum_rate, '.9g')}")
    print(f"per_target_pod: {vec(result.per_target_pod)}")
    print(f"kkt_residual: {format(result.kkt_residual, '.3g')}")
    print(f"outer_iterations: {result.outer_iterations}")
    return 0


def _cmd_plot(args):
    for path in harness.render_plots(args.csv, args.out):
        print(path)
    return 0


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "validate-pod":
            return _cmd_validate_pod(args)
        if args.command == "sweep-budget":
            return _cmd_sweep(args, "budget", "budget_sweep.csv")
        if args.command == "sweep-pod":
            return _cmd_sweep(args, "pod", "pod_sweep.csv")
        if args.command == "solve":
            return _cmd_solve(args)
        return _cmd_plot(args)
    except (ConfigError, DomainError) as exc:
        return _fail(exc, 1)
    except (InfeasibleError, SamplingExhaustedError) as exc:
        return _fail(exc, 2)
    except (SolverError, AccuracyError, RankDeficiencyError,
            np.linalg.LinAlgError, ArithmeticError) as exc:
        return _fail(exc, 3)


def _fail(exc, code):
    reason = " ".join(str(exc).split())
    print(f"error: {type(exc).__name__}: {reason}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
