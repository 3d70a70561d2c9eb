"""Monte Carlo experiment harness and command line interface."""

from .experiment import (AXES, SOLVERS, ExperimentSpec, ResultRow, ResultTable, load_spec,
                         run_experiment, trial_seed)
from .output import emit_csv, emit_trace, read_csv, read_trace

__all__ = ["AXES", "SOLVERS", "ExperimentSpec", "ResultRow", "ResultTable", "load_spec",
           "run_experiment", "trial_seed", "emit_csv", "emit_trace", "read_csv", "read_trace"]
