"""SOCP-ADMM joint design of transmit beams and IRS reflection coefficients.

The rate constraints are rewritten with one auxiliary scalar ``u`` each
(the quadratic-fraction identity ``|a|^2 / beta = max_u 2 Re(u* a) - |u|^2
beta``), the reflection vector is split into a constraint-feasible copy
``phi`` and a set-feasible copy ``varphi``, and the blocks are updated in
the order phi, w, u, varphi, lambda. The phi and w updates are SOCPs.

Constraint index ``j`` within cluster ``k``:

* ``j = 0``: central user decodes its own symbol after SIC.
* ``j = 1``: edge user decodes its own symbol.
* ``j = 2``: central user decodes the edge symbol (SIC stage).

Solvers work on a normalized copy of the instance (noise power 1) and map
results back to physical units at the end.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import conic, model, zf
from .model import CENTER, EDGE, BeamformingSolution, ReflectionCase, SystemConfig
from .trace import SolverTrace

# user index, signal beam, whether the own central beam interferes
TERMS = ((CENTER, CENTER, False), (EDGE, EDGE, True), (CENTER, EDGE, True))


class SubproblemInfeasible(RuntimeError):
    def __init__(self, stage: str, iteration: int, status):
        super().__init__(f"{stage}-subproblem failed at iteration {iteration}: {status}")
        self.stage = stage
        self.iteration = iteration
        self.status = status


@dataclass
class AdmmParams:
    xi: float = 1.0
    epsilon: float = 1e-3
    max_outer_iterations: int = 100
    init: str = "ones"             # "ones" or "aligned"
    adapt_penalty: bool = False
    solver_tol: float = 1e-8
    solver_max_iter: int = 200
    audit_tol: float = 1e-4
    soft_penalty: float = 1e3
    polish_iterations: int = 10


@dataclass
class AdmmState:
    phi: np.ndarray
    w: np.ndarray          # (K, 2, N)
    u: np.ndarray          # (K, 3)
    varphi: np.ndarray
    lam: np.ndarray
    iteration: int = 0
    xi: float = 1.0

    @property
    def w_stacked(self) -> np.ndarray:
        return self.w.reshape(-1)


@dataclass
class PhiCoeffs:
    """``2 Re(mu^T phi) + phi^T Upsilon phi^* <= e`` per ``(k, j)``."""

    mu: np.ndarray        # (K, 3, M)
    Upsilon: np.ndarray   # (K, 3, M, M)
    e: np.ndarray         # (K, 3)

    def values(self, phi) -> np.ndarray:
        quad = np.einsum("m,kjmn,n->kj", phi, self.Upsilon, np.conj(phi)).real
        return 2 * np.einsum("kjm,m->kj", self.mu, phi).real + quad - self.e


@dataclass
class WCoeffs:
    """``w^H Psi w + 2 Re(rho^H w) <= e_hat`` per ``(k, j)``, ``w`` stacked."""

    Psi: np.ndarray       # (K, 3, D, D)
    rho: np.ndarray       # (K, 3, D)
    e_hat: np.ndarray     # (K, 3)

    def values(self, w_stacked) -> np.ndarray:
        x = np.asarray(w_stacked).reshape(-1)
        quad = np.einsum("d,kjde,e->kj", x.conj(), self.Psi, x).real
        return quad + 2 * np.einsum("kjd,d->kj", self.rho.conj(), x).real - self.e_hat


# ---------------------------------------------------------------------------
# rate constraints in auxiliary-variable form
# ---------------------------------------------------------------------------

def fraction_surrogate(A, B, Y) -> float:
    """``tr(Y^H A + A^H Y - Y^H B Y)``, a concave lower bound on ``tr(A^H B^-1 A)``."""
    A, B, Y = (np.atleast_2d(np.asarray(x, dtype=complex)) for x in (A, B, Y))
    return float(np.trace(Y.conj().T @ A + A.conj().T @ Y - Y.conj().T @ B @ Y).real)


def fraction_maximizer(A, B) -> np.ndarray:
    """``B^-1 A``, the maximizer of :func:`fraction_surrogate` for ``B`` positive definite."""
    A, B = (np.atleast_2d(np.asarray(x, dtype=complex)) for x in (A, B))
    return np.linalg.solve(B, A)


def thresholds(config: SystemConfig) -> np.ndarray:
    """SINR targets per ``(k, j)``: ``2**r - 1`` for the rate each constraint protects."""
    tc, te = config.tau_center, config.tau_edge
    return np.stack([tc, te, te], axis=1)


def _interferers(k: int, j: int, K: int):
    beams = [(kk, l) for kk in range(K) if kk != k for l in (CENTER, EDGE)]
    if TERMS[j][2]:
        beams.append((k, CENTER))
    return beams


def beta(w, hhat, k: int, j: int, noise_power: float) -> float:
    user = TERMS[j][0]
    return noise_power + sum(abs(np.vdot(hhat[k, user], w[b])) ** 2
                             for b in _interferers(k, j, w.shape[0]))


def evaluate_lhs(k: int, j: int, phi, w, u, channels, config: SystemConfig) -> float:
    """``2 Re(u* hhat^H w_sig) - |u|^2 beta`` for constraint ``(k, j)``."""
    hhat = model.effective_channels(phi, channels, config.irs_enabled)
    user, sig, _ = TERMS[j]
    a = np.vdot(hhat[k, user], w[k, sig])
    uk = u[k, j]
    return float(2 * (np.conj(uk) * a).real - abs(uk) ** 2 * beta(w, hhat, k, j, config.noise_power))


def surrogate_slacks(phi, w, u, channels, config: SystemConfig) -> np.ndarray:
    """``LHS - tau`` for all ``(k, j)``; nonnegative when the surrogates hold."""
    tau = thresholds(config)
    return np.array([[evaluate_lhs(k, j, phi, w, u, channels, config) - tau[k, j]
                      for j in range(3)] for k in range(config.K)])


def update_u(phi, w, channels, config: SystemConfig) -> np.ndarray:
    """Closed-form maximizers ``u = hhat^H w_sig / beta``."""
    hhat = model.effective_channels(phi, channels, config.irs_enabled)
    u = np.empty((config.K, 3), dtype=complex)
    for k in range(config.K):
        for j, (user, sig, _) in enumerate(TERMS):
            a = np.vdot(hhat[k, user], w[k, sig])
            u[k, j] = fraction_maximizer(a, beta(w, hhat, k, j, config.noise_power))[0, 0]
    return u


# ---------------------------------------------------------------------------
# phi update
# ---------------------------------------------------------------------------

def build_phi_coeffs(w, u, channels, config: SystemConfig) -> PhiCoeffs:
    """Coefficients of the constraints as functions of ``phi`` at fixed ``(w, u)``."""
    K, M = config.K, config.M
    tau = thresholds(config)
    mu = np.zeros((K, 3, M), dtype=complex)
    Ups = np.zeros((K, 3, M, M), dtype=complex)
    e = np.zeros((K, 3))
    for k in range(K):
        for j, (user, sig, _) in enumerate(TERMS):
            GH = np.conj(channels.g[k, user])[:, None] * channels.H
            h = channels.h[k, user]
            Sigma = np.zeros((config.N, config.N), dtype=complex)
            for b in _interferers(k, j, K):
                Sigma += np.outer(w[b], w[b].conj())
            u2 = abs(u[k, j]) ** 2
            Ups[k, j] = u2 * GH @ Sigma @ GH.conj().T
            mu[k, j] = u2 * GH @ (Sigma @ h) - np.conj(u[k, j]) * GH @ w[k, sig]
            psi = float(np.vdot(h, Sigma @ h).real)
            t = 2 * (np.conj(u[k, j]) * np.vdot(h, w[k, sig])).real
            e[k, j] = t - tau[k, j] - u2 * (config.noise_power + psi)
    return PhiCoeffs(mu, Ups, e)


def phi_problem(target, coeffs: PhiCoeffs) -> conic.SocpProblem:
    """Proximal SOCP: closest point to ``target`` meeting every constraint."""
    M = target.size
    cones = []
    for k in range(coeffs.e.shape[0]):
        for j in range(3):
            R = conic.psd_sqrt(coeffs.Upsilon[k, j])
            # phi^T Ups phi^* = ||R phi^*||^2 = ||conj(R) phi||^2
            R_real = conic.realify_matrix(np.conj(R)) if R.size else np.zeros((0, 2 * M))
            a = conic.realify_functional(np.conj(coeffs.mu[k, j]))
            cones.append(conic.rotated_cone(R_real, a, coeffs.e[k, j]))
    return conic.SocpProblem(2 * M, cones, center=conic.complex_to_real(target))


NEAR_FEASIBLE = 1e-6


def _near_feasible(violation, e) -> bool:
    return float(np.max(violation)) <= NEAR_FEASIBLE * max(1.0, float(np.abs(e).max()))


def update_phi(state: AdmmState, coeffs: PhiCoeffs, tol: float = 1e-8,
               max_iter: int = 200) -> np.ndarray:
    """Proximal step toward ``varphi - lambda`` over the constraint set.

    When the target itself satisfies every constraint it is the exact
    minimizer and is returned without calling the conic solver.
    """
    target = state.varphi - state.lam
    viol = coeffs.values(target)
    if viol.max() <= tol * max(1.0, float(np.abs(coeffs.e).max())):
        return target.copy()
    sol = conic.solve(phi_problem(target, coeffs), tol, max_iter)
    if sol.ok:
        return conic.real_to_complex(sol.x)
    # Near a fixed point every constraint is tight and the feasible set can
    # shrink to a sliver around the current phi, which the interior point
    # method may fail to certify. The current phi stays feasible (the u-step
    # only raises the left-hand sides), so it is a valid fallback.
    if sol.status is not conic.Status.INFEASIBLE and _near_feasible(
            coeffs.values(state.phi), coeffs.e):
        return state.phi.copy()
    raise SubproblemInfeasible("phi", state.iteration, sol.status)


# ---------------------------------------------------------------------------
# w update
# ---------------------------------------------------------------------------

def _block(K: int, N: int, beam) -> slice:
    idx = 2 * beam[0] + beam[1]
    return slice(idx * N, (idx + 1) * N)


def build_w_coeffs(phi, u, channels, config: SystemConfig) -> WCoeffs:
    """Coefficients of the constraints as functions of stacked ``w`` at fixed ``(phi, u)``."""
    K, N = config.K, config.N
    D = 2 * K * N
    tau = thresholds(config)
    hhat = model.effective_channels(phi, channels, config.irs_enabled)
    Psi = np.zeros((K, 3, D, D), dtype=complex)
    rho = np.zeros((K, 3, D), dtype=complex)
    e_hat = np.zeros((K, 3))
    for k in range(K):
        for j, (user, sig, _) in enumerate(TERMS):
            hk = hhat[k, user]
            V = np.outer(hk, hk.conj())
            u2 = abs(u[k, j]) ** 2
            for b in _interferers(k, j, K):
                s = _block(K, N, b)
                Psi[k, j, s, s] = u2 * V
            rho[k, j, _block(K, N, (k, sig))] = -u[k, j] * hk
            e_hat[k, j] = -tau[k, j] - u2 * config.noise_power
    return WCoeffs(Psi, rho, e_hat)


def _w_cones(coeffs: WCoeffs, n_extra: int = 0):
    K = coeffs.e_hat.shape[0]
    D = coeffs.rho.shape[-1]
    n = 2 * D + n_extra
    cones = []
    for k in range(K):
        for j in range(3):
            R = conic.psd_sqrt(coeffs.Psi[k, j])
            R_real = conic.realify_matrix(R) if R.size else np.zeros((0, 2 * D))
            a = conic.realify_functional(coeffs.rho[k, j])
            if n_extra:
                R_real = np.hstack([R_real, np.zeros((R_real.shape[0], n_extra))])
                a = np.concatenate([a, np.zeros(n_extra)])
                a[2 * D + 3 * k + j] = -0.5
            cones.append(conic.rotated_cone(R_real, a, coeffs.e_hat[k, j]))
    return cones, n


def w_problem(coeffs: WCoeffs) -> conic.SocpProblem:
    cones, n = _w_cones(coeffs)
    return conic.SocpProblem(n, cones)


def update_w(state: AdmmState, coeffs: WCoeffs, tol: float = 1e-8,
             max_iter: int = 200) -> np.ndarray:
    """Minimum-norm stacked beams meeting every constraint; returns shape ``(K, 2, N)``.

    A point the conic solver could not certify is still accepted when its
    surrogate violation is below ``NEAR_FEASIBLE`` relative to the threshold
    scale; the final rate audit decides whether the run succeeded.
    """
    sol = conic.solve(w_problem(coeffs), tol, max_iter)
    w = conic.real_to_complex(sol.x).reshape(state.w.shape)
    if sol.ok or (sol.status is conic.Status.NUMERICAL_FAILURE
                  and _near_feasible(coeffs.values(w.reshape(-1)), coeffs.e_hat)):
        return w
    raise SubproblemInfeasible("w", state.iteration, sol.status)


def update_w_softened(state: AdmmState, coeffs: WCoeffs, penalty: float = 1e3,
                      tol: float = 1e-8, max_iter: int = 200) -> np.ndarray:
    """w-step with one nonnegative slack per constraint, penalized in the objective."""
    n_slack = coeffs.e_hat.size
    cones, n = _w_cones(coeffs, n_slack)
    for i in range(n_slack):
        c = np.zeros(n)
        c[n - n_slack + i] = 1.0
        cones.append(conic.SocCone(np.zeros((0, n)), np.zeros(0), c, 0.0))
    F = np.eye(n)
    F[n - n_slack:, n - n_slack:] *= penalty
    sol = conic.solve(conic.SocpProblem(n, cones, objective_map=F), tol, max_iter)
    if not sol.ok:
        raise SubproblemInfeasible("w-softened", state.iteration, sol.status)
    return conic.real_to_complex(sol.x[: n - n_slack]).reshape(state.w.shape)


# ---------------------------------------------------------------------------
# consensus copy and dual
# ---------------------------------------------------------------------------

def project_reflection(z, case: ReflectionCase) -> np.ndarray:
    """Euclidean projection onto the reflection set, elementwise.

    A zero entry has no phase; it maps to 1 for the unit-modulus cases.
    """
    z = np.asarray(z, dtype=complex)
    mag = np.abs(z)
    if case.kind == "box":
        return np.where(mag > 1.0, z / np.where(mag > 0, mag, 1.0), z)
    if case.kind == "unit":
        return np.where(mag > 0, z / np.where(mag > 0, mag, 1.0), 1.0 + 0j)
    return zf.quantize_phi(z, case.levels)


def update_lambda(lam, phi, varphi) -> np.ndarray:
    return lam + (phi - varphi)


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def matched_filter_beams(hhat, config: SystemConfig) -> np.ndarray:
    """Per-user matched filters scaled to meet their interference-free SNR target."""
    tau = np.stack([config.tau_center, config.tau_edge], axis=1)
    nrm2 = np.sum(np.abs(hhat) ** 2, axis=-1)
    safe = np.where(nrm2 > 0, nrm2, 1.0)
    return np.sqrt(tau * config.noise_power)[..., None] * hhat / safe[..., None]


def aligned_reflection(channels, config: SystemConfig) -> np.ndarray:
    """Reflection vector maximizing the useful received power of matched-filter beams."""
    h0 = model.effective_channels(np.zeros(config.M), channels, True)
    w = matched_filter_beams(h0, config)
    phi, _ = zf.reflection_step(channels, w, np.ones(config.M, dtype=complex), ReflectionCase.unit())
    return phi


def initial_state(config: SystemConfig, channels, params: AdmmParams) -> tuple[AdmmState, list]:
    """Consistent starting point; ``config``/``channels`` are the normalized instance.

    ``u`` is seeded from matched-filter beams, ``w`` is the minimum-norm
    solution of the w-step for that ``u`` (softened if infeasible) and ``u``
    is then refreshed, so the first phi-step sees a matching ``(w, u)`` pair.
    """
    notes = []
    if not config.irs_enabled:
        phi = np.zeros(config.M, dtype=complex)
    elif params.init == "ones":
        phi = project_reflection(np.ones(config.M, dtype=complex), config.reflection)
    elif params.init == "aligned":
        phi = project_reflection(aligned_reflection(channels, config), config.reflection)
    else:
        raise ValueError(f"unknown init strategy {params.init!r}")
    hhat = model.effective_channels(phi, channels, config.irs_enabled)
    w_mf = matched_filter_beams(hhat, config)
    state = AdmmState(phi=phi, w=w_mf, u=update_u(phi, w_mf, channels, config),
                      varphi=phi.copy(), lam=np.zeros(config.M, complex), xi=params.xi)
    coeffs = build_w_coeffs(phi, state.u, channels, config)
    try:
        state.w = update_w(state, coeffs, params.solver_tol, params.solver_max_iter)
    except SubproblemInfeasible:
        state.w = update_w_softened(state, coeffs, params.soft_penalty, params.solver_tol,
                                    params.solver_max_iter)
        notes.append("init: softened w-step")
    state.u = update_u(phi, state.w, channels, config)
    return state, notes


def _min_rate_slack(phi, w, channels, config) -> float:
    hhat = model.effective_channels(phi, channels, config.irs_enabled)
    rc, re = model.achieved_rates(w, hhat, config.noise_power)
    return float(min((rc - config.rates_center).min(), (re - config.rates_edge).min()))


def _polish(state: AdmmState, phi, channels, config, params) -> np.ndarray:
    """Re-fit the beams to a fixed reflection vector by a few w/u rounds."""
    w = state.w
    for _ in range(params.polish_iterations):
        if _min_rate_slack(phi, w, channels, config) >= -0.1 * params.audit_tol:
            break
        u = update_u(phi, w, channels, config)
        coeffs = build_w_coeffs(phi, u, channels, config)
        tmp = replace(state, w=w)
        try:
            w = update_w(tmp, coeffs, params.solver_tol, params.solver_max_iter)
        except SubproblemInfeasible:
            w = update_w_softened(tmp, coeffs, params.soft_penalty, params.solver_tol,
                                  params.solver_max_iter)
    return w


def run(config: SystemConfig, channels, params: AdmmParams | None = None):
    """SOCP-ADMM; returns ``(BeamformingSolution, SolverTrace)`` in physical units.

    Stops when ``max(||phi - varphi||, |P_new - P_old| / P_old) < epsilon``.
    The returned reflection vector is the set-feasible copy ``varphi``.
    """
    params = AdmmParams() if params is None else params
    channels.check(config)
    cfg, ch, scale = model.normalize(config, channels)
    irs = cfg.irs_enabled
    trace = SolverTrace("admm")
    t0 = time.perf_counter()
    try:
        state, notes = initial_state(cfg, ch, params)
    except SubproblemInfeasible as exc:
        trace.status = "failed"
        trace.notes.append(str(exc))
        return None, trace
    trace.notes += notes
    power = model.total_power(state.w)
    trace.add(0, power * scale ** 2, 0.0, _min_rate_slack(state.phi, state.w, ch, cfg),
              1e3 * (time.perf_counter() - t0))
    strikes = 0
    status = "max_iterations"
    for v in range(1, params.max_outer_iterations + 1):
        t0 = time.perf_counter()
        state.iteration = v
        trouble = False
        if irs:
            pc = build_phi_coeffs(state.w, state.u, ch, cfg)
            try:
                phi = update_phi(state, pc, params.solver_tol, params.solver_max_iter)
            except SubproblemInfeasible as exc:
                trace.notes.append(str(exc))
                phi = state.varphi - state.lam
                trouble = True
        else:
            phi = state.phi
        wc = build_w_coeffs(phi, state.u, ch, cfg)
        if not trouble:
            try:
                w = update_w(state, wc, params.solver_tol, params.solver_max_iter)
            except SubproblemInfeasible as exc:
                trace.notes.append(str(exc))
                trouble = True
        if trouble:
            strikes += 1
            if strikes >= 2:
                status = "failed"
                break
            try:
                w = update_w_softened(state, wc, params.soft_penalty, params.solver_tol,
                                      params.solver_max_iter)
            except SubproblemInfeasible as exc:
                trace.notes.append(str(exc))
                status = "failed"
                break
        else:
            strikes = 0
        u = update_u(phi, w, ch, cfg)
        if irs:
            varphi = project_reflection(phi + state.lam, cfg.reflection)
            lam = update_lambda(state.lam, phi, varphi)
            primal = float(np.linalg.norm(phi - varphi))
            if params.adapt_penalty:
                dual = state.xi * float(np.linalg.norm(varphi - state.varphi))
                if primal > 10 * dual:
                    state.xi *= 2.0
                    lam = lam / 2.0
                elif dual > 10 * primal:
                    state.xi /= 2.0
                    lam = lam * 2.0
        else:
            varphi, lam, primal = state.varphi, state.lam, 0.0
        state.phi, state.w, state.u, state.varphi, state.lam = phi, w, u, varphi, lam
        new_power = model.total_power(w)
        # relative change measured in watts with a 1 W floor
        rel = abs(new_power - power) * scale ** 2 / max(power * scale ** 2, 1.0)
        power = new_power
        trace.add(v, power * scale ** 2, primal, _min_rate_slack(phi, w, ch, cfg),
                  1e3 * (time.perf_counter() - t0))
        if max(primal, rel) < params.epsilon:
            status = "converged"
            break
    if status == "failed":
        trace.status = status
        return None, trace
    phi_final = state.varphi if irs else np.zeros(cfg.M, dtype=complex)
    w_final = _polish(state, phi_final, ch, cfg, params)
    sol = BeamformingSolution.evaluate(w_final * scale, phi_final, config, channels)
    if not model.audit(sol, config, channels, params.audit_tol).feasible:
        status = "not_converged"
    trace.status = status
    return sol, trace
