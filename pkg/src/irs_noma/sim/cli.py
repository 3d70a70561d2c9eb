"""Command line entry point: ``python -m irs_noma {run,trace,channels}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .. import channel, model
from ..model import SystemConfig
from . import experiment, output

log = logging.getLogger("irs_noma")


def _system_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("-N", type=int, default=8, help="BS antennas")
    p.add_argument("-M", type=int, default=30, help="IRS elements")
    p.add_argument("-K", type=int, default=3, help="clusters")
    p.add_argument("--rate-center", type=float, default=4.0, help="bits/s/Hz")
    p.add_argument("--rate-edge", type=float, default=4.0, help="bits/s/Hz")
    p.add_argument("--noise-dbm", type=float, default=-80.0)
    p.add_argument("--case", default="II", help="I, II or III")
    p.add_argument("--levels", type=int, default=None, help="phase levels for case III")
    p.add_argument("--no-irs", action="store_true", help="drop the reflected path")
    p.add_argument("--gain-mode", choices=channel.GAIN_MODES, default=None)
    p.add_argument("--seed", type=int, default=0)


def _config(args) -> SystemConfig:
    return SystemConfig(N=args.N, M=args.M, K=args.K,
                        noise_power=model.dbm_to_watt(args.noise_dbm),
                        rate_center=args.rate_center, rate_edge=args.rate_edge,
                        reflection=model.ReflectionCase.parse(args.case, args.levels),
                        irs_enabled=not args.no_irs)


def _params(args) -> channel.ChannelParams:
    params = channel.ChannelParams()
    return params if args.gain_mode is None else replace(params, gain_mode=args.gain_mode)


def cmd_run(args) -> int:
    spec = experiment.load_spec(args.experiment)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.solver:
        changes["solvers"] = tuple(args.solver)
    if args.workers is not None:
        changes["workers"] = args.workers
    base = spec.base
    if args.case is not None:
        base = base.with_(reflection=model.ReflectionCase.parse(args.case, args.levels))
    if args.no_irs:
        base = base.with_(irs_enabled=False)
    spec = replace(spec, base=base, **changes)
    log.info("running %d trials x %d values x %d solvers", spec.trials, len(spec.values),
             len(spec.solvers))
    table = experiment.run_experiment(spec)
    out = args.out or Path(args.experiment).with_suffix(".csv")
    output.emit_csv(table, out)
    for r in table.rows:
        power = "empty" if r.empty else f"{model.watt_to_dbm(r.mean_power_W):9.3f} dBm"
        print(f"{spec.axis}={r.sweep_value:>6}  {r.solver:<11} {power}  "
              f"feasible {r.feasibility_rate:.2f}")
    print(f"wrote {out}")
    return 1 if table.any_empty else 0


def cmd_trace(args) -> int:
    config = _config(args)
    channels = channel.generate(config, args.seed, _params(args))
    spec = experiment.ExperimentSpec(base=config)
    sol, trace = experiment.run_solver(args.solver, config, channels, spec)
    for r in trace.rows:
        print(f"{r.iteration:4d}  {model.watt_to_dbm(r.total_power_W):10.4f} dBm  "
              f"residual {r.consensus_residual:.3e}  min slack {r.min_slack:+.3e}  {r.branch}")
    print(f"status: {trace.status}")
    if args.out:
        output.emit_trace(trace, args.out)
        print(f"wrote {args.out}")
    return 0 if sol is not None and trace.status != "failed" else 1


def cmd_channels(args) -> int:
    config = _config(args)
    out = Path(args.out or ".")
    if args.trials == 1 and out.suffix:
        targets = [(args.seed, out)]
    else:
        out.mkdir(parents=True, exist_ok=True)
        targets = [(experiment.trial_seed(args.seed, t), out / f"channels_{t:04d}.txt")
                   for t in range(args.trials)]
    for seed, path in targets:
        channel.write_channels(channel.generate(config, seed, _params(args)), path)
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irs_noma", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment file and write a CSV table")
    p.add_argument("experiment", help="INI experiment file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--solver", action="append", choices=experiment.SOLVERS)
    p.add_argument("--case", default=None)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--no-irs", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trace", help="solve one instance and print the iteration trace")
    _system_args(p)
    p.add_argument("--solver", choices=("admm", "zf"), default="admm")
    p.add_argument("--out", default=None, help="trace CSV path")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("channels", help="dump channel realizations as text")
    _system_args(p)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--out", default=None, help="file (single draw) or directory")
    p.set_defaults(func=cmd_channels)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
