"""Monte Carlo sweeps over one system parameter for a set of solvers."""

from __future__ import annotations

import configparser
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import admm, channel, model, zf
from ..model import ReflectionCase, SystemConfig

SOLVERS = ("admm", "zf", "admm-noirs", "zf-noirs")
AXES = ("M", "N", "rate_center", "case")
TABLE_COLUMNS = ("sweep_value", "solver", "mean_power_W", "std_power_W",
                 "feasibility_rate", "mean_iterations", "mean_wall_ms")


@dataclass(frozen=True)
class ExperimentSpec:
    base: SystemConfig = field(default_factory=SystemConfig)
    axis: str = "M"
    values: tuple = (30,)
    solvers: tuple = ("admm", "zf")
    trials: int = 100
    seed: int = 0
    channel_params: channel.ChannelParams = field(default_factory=channel.ChannelParams)
    admm_params: admm.AdmmParams = field(default_factory=admm.AdmmParams)
    zf_params: zf.ZfParams = field(default_factory=zf.ZfParams)
    workers: int = 1

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"sweep axis must be one of {AXES}, got {self.axis!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.trials < 1:
            raise ValueError("trial count must be at least 1")
        bad = [s for s in self.solvers if s not in SOLVERS]
        if bad or not self.solvers:
            raise ValueError(f"solvers must be a nonempty subset of {SOLVERS}, got {bad}")

    def config_at(self, value) -> SystemConfig:
        if self.axis == "case":
            return self.base.with_(reflection=parse_case(value))
        if self.axis == "rate_center":
            return self.base.with_(rate_center=float(value))
        return self.base.with_(**{self.axis: int(value)})


def parse_case(text) -> ReflectionCase:
    """``I``, ``II``, ``III`` or ``III:L`` (discrete phases with ``L`` levels)."""
    if isinstance(text, ReflectionCase):
        return text
    name, _, levels = str(text).partition(":")
    return ReflectionCase.parse(name, int(levels) if levels else None)


def case_token(case: ReflectionCase) -> str:
    return {"box": "I", "unit": "II"}.get(case.kind, f"III:{case.levels}")


def trial_seed(master: int, trial: int) -> int:
    """Channel seed for one trial; shared by every cell so comparisons are paired."""
    return int(np.random.SeedSequence([master, trial]).generate_state(1, np.uint64)[0])


@dataclass
class TrialOutcome:
    power: float        # nan unless feasible
    feasible: bool
    iterations: int
    wall_ms: float


def run_solver(solver: str, config: SystemConfig, channels, spec: ExperimentSpec):
    """Run one named solver; returns ``(solution or None, trace)``."""
    if solver.endswith("-noirs"):
        config = config.with_(irs_enabled=False)
    if solver.startswith("admm"):
        return admm.run(config, channels, spec.admm_params)
    return zf.run_zf(config, channels, spec.zf_params)


def run_trial(spec: ExperimentSpec, trial: int) -> dict:
    """All (sweep value, solver) cells for one channel seed."""
    seed = trial_seed(spec.seed, trial)
    out = {}
    for vi, value in enumerate(spec.values):
        config = spec.config_at(value)
        channels = channel.generate(config, seed, spec.channel_params)
        for solver in spec.solvers:
            sol, trace = run_solver(solver, config, channels, spec)
            cfg = config.with_(irs_enabled=False) if solver.endswith("-noirs") else config
            ok = (sol is not None and trace.status != "failed"
                  and model.audit(sol, cfg, channels).feasible)
            out[vi, solver] = TrialOutcome(sol.total_power if ok else math.nan, ok,
                                           trace.iterations, trace.wall_ms)
    return out


@dataclass
class ResultRow:
    sweep_value: str
    solver: str
    mean_power_W: float | None
    std_power_W: float | None
    feasibility_rate: float
    mean_iterations: float | None
    mean_wall_ms: float | None

    @property
    def empty(self) -> bool:
        return self.mean_power_W is None


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    powers: dict = field(default_factory=dict)   # (sweep_value, solver) -> per-trial array

    def row(self, sweep_value, solver) -> ResultRow:
        for r in self.rows:
            if r.sweep_value == str(sweep_value) and r.solver == solver:
                return r
        raise KeyError((sweep_value, solver))

    def series(self, solver) -> list:
        return [r.mean_power_W for r in self.rows if r.solver == solver]

    @property
    def any_empty(self) -> bool:
        return any(r.empty for r in self.rows)


def _value_label(spec: ExperimentSpec, value) -> str:
    return case_token(parse_case(value)) if spec.axis == "case" else f"{value:g}" \
        if isinstance(value, (int, float)) else str(value)


def aggregate(spec: ExperimentSpec, outcomes: list) -> ResultTable:
    """Deterministic reduction of per-trial outcomes (indexed by trial)."""
    table = ResultTable()
    for vi, value in enumerate(spec.values):
        label = _value_label(spec, value)
        for solver in spec.solvers:
            cells = [o[vi, solver] for o in outcomes]
            ok = [c for c in cells if c.feasible]
            p = np.array([c.power for c in cells])
            table.powers[label, solver] = p
            if ok:
                good = p[np.isfinite(p)]
                row = ResultRow(label, solver, float(good.mean()),
                                float(good.std(ddof=1)) if good.size > 1 else 0.0,
                                len(ok) / len(cells),
                                float(np.mean([c.iterations for c in ok])),
                                float(np.mean([c.wall_ms for c in ok])))
            else:
                row = ResultRow(label, solver, None, None, 0.0, None, None)
            table.rows.append(row)
    return table


def _trial_job(args):
    spec, trial = args
    return run_trial(spec, trial)


def run_experiment(spec: ExperimentSpec) -> ResultTable:
    jobs = [(spec, t) for t in range(spec.trials)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            outcomes = list(pool.map(_trial_job, jobs))
    else:
        outcomes = [_trial_job(j) for j in jobs]
    return aggregate(spec, outcomes)


# ---------------------------------------------------------------------------
# experiment files
# ---------------------------------------------------------------------------

def _split(text: str) -> list:
    return [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]


def load_spec(path) -> ExperimentSpec:
    """Read an INI experiment file.

    ::

        [experiment]
        trials = 100
        seed = 7
        solvers = admm, zf
        workers = 1

        [system]            ; every key optional
        N = 8
        M = 30
        K = 3
        rate_center = 4
        rate_edge = 4
        noise_dbm = -80
        case = II           ; I, II, III or III:L
        gain_mode = amplitude

        [sweep]
        axis = M            ; M, N, rate_center or case
        values = 20, 30, 40
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    path = Path(path)
    if not parser.read(path):
        raise FileNotFoundError(f"cannot read experiment file {path}")
    for section in ("experiment", "sweep"):
        if not parser.has_section(section):
            raise ValueError(f"{path}: missing [{section}] section")
    exp, sweep = parser["experiment"], parser["sweep"]
    sysd = parser["system"] if parser.has_section("system") else {}

    base = SystemConfig()
    changes = {}
    for key in ("N", "M", "K"):
        if key in sysd:
            changes[key] = int(sysd[key])
    for key in ("rate_center", "rate_edge"):
        if key in sysd:
            changes[key] = float(sysd[key])
    if "noise_dbm" in sysd:
        changes["noise_power"] = model.dbm_to_watt(float(sysd["noise_dbm"]))
    if "case" in sysd:
        changes["reflection"] = parse_case(sysd["case"])
    base = base.with_(**changes)
    params = channel.ChannelParams()
    if "gain_mode" in sysd:
        params = replace(params, gain_mode=sysd["gain_mode"].strip())

    axis = sweep.get("axis", "M").strip()
    raw = _split(sweep["values"])
    values = tuple(raw) if axis == "case" else tuple(
        int(v) if axis in ("M", "N") else float(v) for v in raw)
    return ExperimentSpec(base=base, axis=axis, values=values,
                          solvers=tuple(_split(exp.get("solvers", "admm, zf"))),
                          trials=exp.getint("trials", 100), seed=exp.getint("seed", 0),
                          channel_params=params, workers=exp.getint("workers", 1))
