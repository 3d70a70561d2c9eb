"""Per-iteration solver traces shared by the ADMM and ZF solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TRACE_COLUMNS = ("iteration", "total_power_W", "consensus_residual", "min_slack",
                 "wall_ms", "branch")


@dataclass
class TraceRow:
    iteration: int
    total_power_W: float
    consensus_residual: float
    min_slack: float
    wall_ms: float
    branch: str = ""


@dataclass
class SolverTrace:
    solver: str
    rows: list = field(default_factory=list)
    status: str = "running"
    notes: list = field(default_factory=list)

    def add(self, *args, **kwargs) -> TraceRow:
        row = TraceRow(*args, **kwargs)
        self.rows.append(row)
        return row

    @property
    def iterations(self) -> int:
        return max((r.iteration for r in self.rows), default=0)

    @property
    def powers(self) -> np.ndarray:
        return np.array([r.total_power_W for r in self.rows])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r.consensus_residual for r in self.rows])

    @property
    def wall_ms(self) -> float:
        return float(sum(r.wall_ms for r in self.rows))

    @property
    def ok(self) -> bool:
        return self.status in ("converged", "max_iterations")
