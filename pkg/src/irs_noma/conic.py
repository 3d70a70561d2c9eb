"""Second-order cone programs over real variables.

A problem is

    minimize    || F x - q ||_2
    subject to  || A_i x + b_i ||_2 <= c_i^T x + d_i     for every cone i

with ``F = I`` unless given. It is lifted to the epigraph form
``min t  s.t. (t, F x - q) in SOC`` and handed to Clarabel (an interior
point conic solver). Complex data is realified at this boundary with the
stacking ``z -> [Re z; Im z]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import clarabel
import numpy as np
import scipy.sparse as sp


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"


class NotPSDError(ValueError):
    pass


# ---------------------------------------------------------------------------
# complex <-> real
# ---------------------------------------------------------------------------

def complex_to_real(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex).reshape(-1)
    return np.concatenate([z.real, z.imag])


def real_to_complex(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size % 2:
        raise ValueError("real vector must have even length")
    n = x.size // 2
    return x[:n] + 1j * x[n:]


def realify_matrix(A) -> np.ndarray:
    """Real matrix acting on ``[Re z; Im z]`` as ``A`` acts on ``z``."""
    A = np.asarray(A, dtype=complex)
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


def realify_functional(c) -> np.ndarray:
    """Vector ``a`` with ``a @ complex_to_real(z) == Re(c^H z)``."""
    c = np.asarray(c, dtype=complex).reshape(-1)
    return np.concatenate([c.real, c.imag])


def psd_sqrt(S, eps: float = 1e-9, compact: bool = True) -> np.ndarray:
    """Factor ``R`` with ``R^H R = S`` for Hermitian PSD ``S``.

    Eigenvalues in ``[-eps * scale, 0)`` are clamped to zero, where ``scale``
    is ``max(1, |lambda|_max)``; anything more negative raises
    :class:`NotPSDError`. With ``compact`` only rows for eigenvalues above
    roundoff level are returned, so ``R`` may have fewer rows than columns.
    """
    S = np.asarray(S, dtype=complex)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("S must be square")
    n = S.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    norm = np.abs(S).max()
    if np.abs(S - S.conj().T).max() > 1e-10 * max(1.0, norm):
        raise ValueError("S is not Hermitian")
    lam, V = np.linalg.eigh(0.5 * (S + S.conj().T))
    scale = max(1.0, float(np.abs(lam).max()))
    if lam.min() < -eps * scale:
        raise NotPSDError(f"eigenvalue {lam.min():.3e} below -{eps:g} * {scale:.3e}")
    lam = np.clip(lam, 0.0, None)
    if compact:
        keep = lam > 1e-14 * max(float(lam.max()), 1e-300)
        lam, V = lam[keep], V[:, keep]
    return np.sqrt(lam)[:, None] * V.conj().T


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------

@dataclass
class SocCone:
    """``||A x + b|| <= c^T x + d``; ``A`` may have zero rows (then ``c^T x + d >= 0``)."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, self.c.size)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.d = float(self.d)
        if self.b.size != self.A.shape[0]:
            raise ValueError("A and b row counts differ")

    @property
    def n(self) -> int:
        return self.c.size

    def slack(self, x) -> float:
        return float(self.c @ x + self.d - np.linalg.norm(self.A @ x + self.b))

    def relative_slack(self, x) -> float:
        """Slack divided by ``max(1, ||A x + b||)``."""
        lhs = float(np.linalg.norm(self.A @ x + self.b))
        return float(self.c @ x + self.d - lhs) / max(1.0, lhs)


@dataclass
class SocpProblem:
    n: int
    cones: list = field(default_factory=list)
    center: np.ndarray | None = None
    objective_map: np.ndarray | None = None

    def __post_init__(self):
        F = np.eye(self.n) if self.objective_map is None else np.asarray(self.objective_map, float)
        if F.ndim != 2 or F.shape[1] != self.n:
            raise ValueError("objective map must have n columns")
        self.objective_map = F
        q = np.zeros(F.shape[0]) if self.center is None else np.asarray(self.center, float)
        if q.shape != (F.shape[0],):
            raise ValueError("center length must match objective map rows")
        self.center = q
        for cone in self.cones:
            if cone.n != self.n:
                raise ValueError(f"cone over {cone.n} variables, problem has {self.n}")

    def objective(self, x) -> float:
        return float(np.linalg.norm(self.objective_map @ x - self.center))

    def slacks(self, x) -> np.ndarray:
        return np.array([cone.slack(x) for cone in self.cones])

    def relative_slacks(self, x) -> np.ndarray:
        return np.array([cone.relative_slack(x) for cone in self.cones])


@dataclass
class SocpSolution:
    x: np.ndarray
    status: Status
    primal_residual: float
    dual_residual: float
    gap: float
    objective: float
    iterations: int
    min_slack: float

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


_STATUS_MAP = {
    "Solved": Status.OPTIMAL,
    "AlmostSolved": Status.OPTIMAL,
    "PrimalInfeasible": Status.INFEASIBLE,
    "AlmostPrimalInfeasible": Status.INFEASIBLE,
    "MaxIterations": Status.MAX_ITERATIONS,
    "MaxTime": Status.MAX_ITERATIONS,
}


def _assemble(problem: SocpProblem):
    n = problem.n
    F, q = problem.objective_map, problem.center
    rows, rhs, cones = [], [], []
    # (t, F x - q) in SOC, as  s = b - A z  with z = [t, x]
    top = np.zeros((1, n + 1))
    top[0, 0] = -1.0
    blk = np.hstack([np.zeros((F.shape[0], 1)), -F])
    rows += [top, blk]
    rhs += [np.zeros(1), -q]
    cones.append(clarabel.SecondOrderConeT(1 + F.shape[0]))
    for cone in problem.cones:
        head = np.concatenate([[0.0], -cone.c])[None, :]
        if cone.A.shape[0] == 0:
            rows.append(head)
            rhs.append(np.array([cone.d]))
            cones.append(clarabel.NonnegativeConeT(1))
            continue
        body = np.hstack([np.zeros((cone.A.shape[0], 1)), -cone.A])
        rows += [head, body]
        rhs += [np.array([cone.d]), cone.b]
        cones.append(clarabel.SecondOrderConeT(1 + cone.A.shape[0]))
    A = sp.csc_matrix(np.vstack(rows))
    b = np.concatenate(rhs)
    return A, b, cones


def _clarabel(A, b, cones, n, inner_tol, max_iter):
    m = n + 1
    q = np.zeros(m)
    q[0] = 1.0
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = int(max_iter)
    settings.tol_feas = inner_tol
    settings.tol_gap_abs = inner_tol
    settings.tol_gap_rel = inner_tol
    settings.tol_ktratio = 1e-7
    return clarabel.DefaultSolver(sp.csc_matrix((m, m)), q, A, b, cones, settings).solve()


def solve(problem: SocpProblem, tol: float = 1e-8, max_iter: int = 200) -> SocpSolution:
    """Solve ``problem``; the returned status certifies the result.

    ``OPTIMAL`` is only reported when every cone slack at the returned point
    is at least ``-tol * max(1, ||A x + b||)``. The backend runs with
    tolerances two orders tighter than ``tol``; if its answer still misses
    the slack check it is re-solved once a further order tighter, and a
    second miss is reported as ``NUMERICAL_FAILURE``. The reported
    ``min_slack`` is the absolute one.
    """
    A, b, cones = _assemble(problem)
    for inner in (1e-2 * tol, 1e-3 * tol):
        try:
            out = _clarabel(A, b, cones, problem.n, inner, max_iter)
        except Exception:  # factorization breakdown surfaces as an exception
            x = np.zeros(problem.n)
            return SocpSolution(x, Status.NUMERICAL_FAILURE, np.inf, np.inf, np.inf,
                                np.inf, 0, -np.inf)
        status = _STATUS_MAP.get(str(out.status), Status.NUMERICAL_FAILURE)
        x = np.asarray(out.x, dtype=float)[1:]
        rel = problem.relative_slacks(x)
        if status is Status.OPTIMAL and rel.size and rel.min() < -tol:
            status = Status.NUMERICAL_FAILURE
            continue
        break
    slacks = problem.slacks(x)
    min_slack = float(slacks.min()) if slacks.size else np.inf
    gap = abs(float(out.obj_val) - float(out.obj_val_dual))
    return SocpSolution(x=x, status=status, primal_residual=float(out.r_prim),
                        dual_residual=float(out.r_dual), gap=gap,
                        objective=problem.objective(x), iterations=int(out.iterations),
                        min_slack=min_slack)


def rotated_cone(R_real: np.ndarray, a: np.ndarray, e: float) -> SocCone:
    """Cone form of ``||R x||^2 + 2 a^T x <= e``.

    Uses ``|| [R x; (1 - e)/2 + a^T x] || <= (1 + e)/2 - a^T x``.
    """
    n = a.size
    A = np.vstack([R_real.reshape(-1, n), a[None, :]])
    b = np.concatenate([np.zeros(A.shape[0] - 1), [(1.0 - e) / 2.0]])
    return SocCone(A, b, -a, (1.0 + e) / 2.0)


# ---------------------------------------------------------------------------
# plain-text standard form
# ---------------------------------------------------------------------------

def _row(v) -> str:
    return " ".join(f"{x:.17g}" for x in np.atleast_1d(v))


def write_problem(problem: SocpProblem, path) -> None:
    """Dump in a line-oriented text format.

    ::

        socp <n> <number of cones>
        objective <rows>
        <rows lines of F>   then one line with q
        cone <rows>
        <rows lines of A>   then b, c, d (one line each; b empty if rows == 0)
    """
    out = [f"socp {problem.n} {len(problem.cones)}",
           f"objective {problem.objective_map.shape[0]}"]
    out += [_row(r) for r in problem.objective_map]
    out.append(_row(problem.center))
    for cone in problem.cones:
        out.append(f"cone {cone.A.shape[0]}")
        out += [_row(r) for r in cone.A]
        out += [_row(cone.b), _row(cone.c), _row(cone.d)]
    Path(path).write_text("\n".join(out) + "\n")


def read_problem(path) -> SocpProblem:
    lines = Path(path).read_text().split("\n")
    pos = 0

    def take():
        nonlocal pos
        pos += 1
        return lines[pos - 1]

    def vec(s):
        return np.array([float(t) for t in s.split()])

    _, n, ncones = take().split()
    n, ncones = int(n), int(ncones)
    rows = int(take().split()[1])
    F = np.array([vec(take()) for _ in range(rows)]).reshape(rows, n)
    q = vec(take())
    cones = []
    for _ in range(ncones):
        r = int(take().split()[1])
        A = np.array([vec(take()) for _ in range(r)]).reshape(r, n)
        b, c, d = vec(take()), vec(take()), float(take())
        cones.append(SocCone(A, b, c, d))
    return SocpProblem(n, cones, q, F)
