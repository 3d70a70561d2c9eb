"""Independent reference computations shared by unit and acceptance tests."""

import numpy as np

from irs_noma import conic


def random_socp(rng, n=None, cones=3):
    """Random proximal SOCP with a strictly feasible point near the origin."""
    n = int(rng.integers(1, 5)) if n is None else n
    x0 = 0.5 * rng.standard_normal(n)
    out = []
    for _ in range(cones):
        rows = int(rng.integers(1, 4))
        A = rng.standard_normal((rows, n))
        b = rng.standard_normal(rows)
        c = 0.3 * rng.standard_normal(n)
        d = np.linalg.norm(A @ x0 + b) - c @ x0 + rng.uniform(0.1, 1.0)
        out.append(conic.SocCone(A, b, c, d))
    q = 1.5 * rng.standard_normal(n)
    return conic.SocpProblem(n, out, center=q), x0


def _feasible(problem, X):
    ok = np.ones(len(X), dtype=bool)
    for cone in problem.cones:
        lhs = np.linalg.norm(X @ cone.A.T + cone.b, axis=1) if cone.A.shape[0] else 0.0
        ok &= X @ cone.c + cone.d >= lhs
    return ok


def _mesh(axes):
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)


def grid_search(problem, x_feasible, final_step=1e-3, keep=5):
    """Best objective over nested uniform grids (coarse box, then zoomed windows).

    Every evaluated point is feasible by direct check, so the result is an
    upper bound on the true optimum that tightens with ``final_step``.
    """
    n = problem.n
    q = problem.center
    radius = float(np.linalg.norm(x_feasible - q)) + 1e-9
    per_dim = {1: 4001, 2: 401, 3: 81, 4: 31}[n]
    axes = [np.linspace(qi - radius, qi + radius, per_dim) for qi in q]
    X = _mesh(axes)
    step = 2 * radius / (per_dim - 1)
    X = np.vstack([X[_feasible(problem, X)], x_feasible[None, :]])
    while True:
        f = np.linalg.norm(X - q, axis=1)
        order = np.argsort(f)[:keep]
        best = X[order]
        if step <= final_step:
            return float(f[order[0]]), best[0]
        step_new = step / 4
        offs = np.arange(-8, 9) * step_new
        window = _mesh([offs] * n)
        cand = (best[:, None, :] + window[None, :, :]).reshape(-1, n)
        cand = cand[_feasible(problem, cand)]
        X = np.vstack([best, cand])
        step = step_new


def edge_power_oracle(b_e, b_c, grid=20000):
    """Least ``||w||^2`` with ``|b_e^H w| >= 1`` and ``|b_c^H w| >= 1``.

    Candidates: each single-constraint minimizer when it also meets the other
    constraint, and the both-tight family ``w = B G^-1 [1, e^{j t}]``.
    """
    ee, cc = np.vdot(b_e, b_e).real, np.vdot(b_c, b_c).real
    ec = np.vdot(b_e, b_c)
    best = np.inf
    if abs(ec) >= ee:
        best = min(best, 1 / ee)
    if abs(ec) >= cc:
        best = min(best, 1 / cc)
    G = np.array([[ee, ec], [np.conj(ec), cc]])
    if np.linalg.cond(G) < 1e12:
        Gi = np.linalg.inv(G)
        t = np.linspace(0, 2 * np.pi, grid, endpoint=False)
        c = np.stack([np.ones_like(t), np.exp(1j * t)])
        vals = np.einsum("it,ij,jt->t", c.conj(), Gi, c).real
        best = min(best, vals.min())
    return best


def edge_power_sampling(b_e, b_c, samples, rng):
    """Best power over random directions scaled to just meet both constraints."""
    n = b_e.size
    W = (rng.standard_normal((samples, n)) + 1j * rng.standard_normal((samples, n)))
    gain = np.minimum(np.abs(W @ b_e.conj()), np.abs(W @ b_c.conj()))
    return float(np.min(np.sum(np.abs(W) ** 2, axis=1) / gain ** 2))
