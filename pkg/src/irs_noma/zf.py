"""Low-complexity zero-forcing design.

Inter-cluster interference is nulled by restricting each cluster's
beamformers to the null space of the other clusters' effective channels.
Inside a cluster the central beam is a scaled matched filter and the edge
beam has a closed form with a one-dimensional phase search. The reflection
vector maximizes the total useful received power by a unimodular
fixed-point iteration.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import model
from .model import CENTER, EDGE, BeamformingSolution, SystemConfig
from .trace import SolverTrace

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

# (user, beam) pairs of the three useful-signal terms per cluster
SIGNAL_TERMS = ((CENTER, CENTER), (EDGE, EDGE), (CENTER, EDGE))


class DimensionError(ValueError):
    pass


class ZfInfeasible(RuntimeError):
    def __init__(self, message: str, cluster: int | None = None):
        super().__init__(message if cluster is None else f"cluster {cluster}: {message}")
        self.cluster = cluster


@dataclass
class ZfParams:
    epsilon: float = 1e-3
    max_outer_iterations: int = 50
    theta_grid: int = 1024
    theta_tol: float = 1e-6
    fp_max_iter: int = 1000
    fp_tol: float = 1e-9
    audit_tol: float = 1e-4


# ---------------------------------------------------------------------------
# beamformers
# ---------------------------------------------------------------------------

def null_space(hhat: np.ndarray, k: int) -> np.ndarray:
    """Orthonormal basis of the null space of the other clusters' channels.

    ``hhat`` has shape ``(K, 2, N)``. The returned ``U`` (N x d) satisfies
    ``U^H hhat[j, i] = 0`` for every ``j != k``.
    """
    K, _, N = hhat.shape
    if N < 2 * K - 1:
        raise DimensionError(f"zero-forcing needs N >= 2K - 1, got N={N}, K={K}")
    if K == 1:
        return np.eye(N, dtype=complex)
    others = [hhat[j, i] for j in range(K) if j != k for i in (EDGE, CENTER)]
    Hbar = np.stack(others, axis=1)
    U, s, _ = np.linalg.svd(Hbar, full_matrices=True)
    tol = max(Hbar.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    return U[:, rank:]


def solve_w_center(hbar_c, tau_c: float, sigma2: float) -> np.ndarray:
    """Minimum-norm beam meeting ``|hbar^H w|^2 >= tau * sigma2`` (tight)."""
    hbar_c = np.asarray(hbar_c, dtype=complex)
    if tau_c == 0:
        return np.zeros_like(hbar_c)
    nrm2 = float(np.vdot(hbar_c, hbar_c).real)
    if not nrm2 > 0:
        raise ZfInfeasible("central user unreachable after nulling")
    return math.sqrt(tau_c * sigma2) * hbar_c / nrm2


def classify_difference(b_e, b_c, rel_tol: float = 1e-10) -> str:
    """Sign pattern of ``b_e b_e^H - b_c b_c^H``: ``"PSD"``, ``"NSD"`` or ``"IND"``.

    The nonzero eigenvalues are those of ``diag(1, -1) @ Gram(b_e, b_c)``.
    """
    ee = float(np.vdot(b_e, b_e).real)
    cc = float(np.vdot(b_c, b_c).real)
    ec = np.vdot(b_e, b_c)
    det = max(ee * cc - abs(ec) ** 2, 0.0)
    tr = ee - cc
    root = math.sqrt(tr * tr + 4.0 * det)
    lam_hi, lam_lo = 0.5 * (tr + root), 0.5 * (tr - root)
    thr = rel_tol * (ee + cc)
    if lam_lo >= -thr:
        return "PSD"
    if lam_hi <= thr:
        return "NSD"
    return "IND"


def _combined_direction(theta: float, b_e, b_c, ee, cc, ec):
    # b_e + f(theta) b_c with f's denominator cleared; equalizes |b_e^H v| and |b_c^H v|
    z = complex(math.cos(theta), math.sin(theta))
    return (z * cc - ec) * b_e + (ee - z * np.conj(ec)) * b_c


def _edge_power(theta, b_e, b_c, ee, cc, ec) -> float:
    v = _combined_direction(theta, b_e, b_c, ee, cc, ec)
    gain = abs(np.vdot(b_e, v)) ** 2
    return float(np.vdot(v, v).real) / gain if gain > 0 else math.inf


def _golden_min(f, a: float, b: float, tol: float) -> float:
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def solve_w_edge(hbar_e, hbar_c, wbar_c, tau_e: float, sigma2: float,
                 theta_grid: int = 1024, theta_tol: float = 1e-6):
    """Minimum-norm edge beam decodable by both users of the cluster.

    Returns ``(wbar_e, branch)``. ``branch`` is ``"PSD"``/``"NSD"`` for the
    semidefinite differences, ``"ZERO"`` for a zero rate target, and for the
    indefinite case one of

    * ``"IND-E"`` / ``"IND-C"``: the minimizer of one constraint alone meets
      the other, so it is optimal;
    * ``"IND-2"``: both constraints bind; the relative phase between the two
      received amplitudes is searched on a uniform grid and refined by
      golden-section search.
    """
    hbar_e = np.asarray(hbar_e, dtype=complex)
    hbar_c = np.asarray(hbar_c, dtype=complex)
    if tau_e == 0:
        return np.zeros_like(hbar_e), "ZERO"
    b_e = hbar_e / math.sqrt(tau_e * (sigma2 + abs(np.vdot(hbar_e, wbar_c)) ** 2))
    b_c = hbar_c / math.sqrt(tau_e * (sigma2 + abs(np.vdot(hbar_c, wbar_c)) ** 2))
    ee = float(np.vdot(b_e, b_e).real)
    cc = float(np.vdot(b_c, b_c).real)
    if not (ee > 0 and cc > 0):
        raise ZfInfeasible("edge symbol unreachable after nulling")
    branch = classify_difference(b_e, b_c)
    if branch == "PSD":
        w = b_c / cc
    elif branch == "NSD":
        w = b_e / ee
    elif abs(np.vdot(b_c, b_e)) >= ee:
        # minimizer of the edge-user constraint alone already serves the center user
        w, branch = b_e / ee, "IND-E"
    elif abs(np.vdot(b_e, b_c)) >= cc:
        w, branch = b_c / cc, "IND-C"
    else:
        branch = "IND-2"
        ec = np.vdot(b_e, b_c)
        thetas = 2 * np.pi * np.arange(theta_grid) / theta_grid
        powers = [_edge_power(t, b_e, b_c, ee, cc, ec) for t in thetas]
        best = int(np.argmin(powers))
        step = 2 * np.pi / theta_grid
        theta = _golden_min(lambda t: _edge_power(t, b_e, b_c, ee, cc, ec),
                            thetas[best] - step, thetas[best] + step, theta_tol)
        if _edge_power(theta, b_e, b_c, ee, cc, ec) > powers[best]:
            theta = thetas[best]
        v = _combined_direction(theta, b_e, b_c, ee, cc, ec)
        w = v / abs(np.vdot(b_e, v))
    # rescale so both constraints hold exactly and the binding one is tight
    gain = min(abs(np.vdot(b_e, w)), abs(np.vdot(b_c, w)))
    return w / gain, branch


def zf_beamformers(hhat: np.ndarray, config: SystemConfig, theta_grid: int = 1024,
                   theta_tol: float = 1e-6):
    """ZF beams for every cluster at fixed effective channels.

    Returns ``(w, wbar, bases, branches)``; ``w`` has shape ``(K, 2, N)``.
    """
    K = config.K
    tau_c, tau_e = config.tau_center, config.tau_edge
    sigma2 = config.noise_power
    w = np.zeros((K, 2, config.N), dtype=complex)
    wbar, bases, branches = [], [], []
    for k in range(K):
        U = null_space(hhat, k)
        hb_c = U.conj().T @ hhat[k, CENTER]
        hb_e = U.conj().T @ hhat[k, EDGE]
        try:
            wc = solve_w_center(hb_c, tau_c[k], sigma2)
            we, branch = solve_w_edge(hb_e, hb_c, wc, tau_e[k], sigma2, theta_grid, theta_tol)
        except ZfInfeasible as exc:
            raise ZfInfeasible(str(exc), cluster=k) from None
        w[k, CENTER] = U @ wc
        w[k, EDGE] = U @ we
        wbar.append((wc, we))
        bases.append(U)
        branches.append(branch)
    return w, wbar, bases, branches


# ---------------------------------------------------------------------------
# reflection vector
# ---------------------------------------------------------------------------

def reflection_objective(channels, w: np.ndarray):
    """Quadratic form of the summed useful received power.

    Returns ``(Omega, varpi, varsigma)`` where ``varpi`` has shape
    ``(K, 3, M)`` and ``varsigma`` shape ``(K, 3)``, such that for
    ``phit = [conj(phi); 1]``::

        phit^H Omega phit = sum |phi^T varpi_kj + varsigma_kj|^2 - sum |varsigma_kj|^2
    """
    K, M = channels.K, channels.M
    varpi = np.empty((K, 3, M), dtype=complex)
    varsigma = np.empty((K, 3), dtype=complex)
    for k in range(K):
        for j, (user, beam) in enumerate(SIGNAL_TERMS):
            varpi[k, j] = np.conj(channels.g[k, user]) * (channels.H @ w[k, beam])
            varsigma[k, j] = np.vdot(channels.h[k, user], w[k, beam])
    a = varpi.reshape(-1, M)
    s = varsigma.reshape(-1)
    Omega = np.zeros((M + 1, M + 1), dtype=complex)
    Omega[:M, :M] = a.T @ a.conj()
    Omega[:M, M] = a.T @ s.conj()
    Omega[M, :M] = Omega[:M, M].conj()
    return Omega, varpi, varsigma


@dataclass
class FixedPointResult:
    phi_tilde: np.ndarray
    objective: list = field(default_factory=list)
    iterations: int = 0
    shift: float = 0.0


def _quad(Omega, x) -> float:
    return float(np.vdot(x, Omega @ x).real)


def _unimodular_ascent(Omega, x, max_iter, tol, scale):
    hist = [_quad(Omega, x)]
    it = 0
    for it in range(1, max_iter + 1):
        y = Omega @ x
        mag = np.abs(y)
        new = np.where(mag > 0, y / np.where(mag > 0, mag, 1.0), x)
        val = _quad(Omega, new)
        if val < hist[-1] - 1e-12 * scale:
            return x, hist, it, False
        change = float(np.max(np.abs(new - x)))
        x = new
        hist.append(val)
        if change < tol:
            break
    return x, hist, it, True


def fixed_point_phi(Omega, phi0, max_iter: int = 1000, tol: float = 1e-9) -> FixedPointResult:
    """Unimodular fixed-point ascent on ``x^H Omega x``.

    Each step maps ``x -> (Omega x) / |Omega x|`` elementwise; entries with
    ``Omega x = 0`` are kept. If the objective ever drops, ``Omega`` is
    shifted by ``-lambda_min * I`` (which only adds a constant on unimodular
    vectors) and the iteration restarts from ``phi0``. The result is divided
    by its last entry.
    """
    Omega = np.asarray(Omega, dtype=complex)
    x0 = np.asarray(phi0, dtype=complex)
    x0 = x0 / np.where(np.abs(x0) > 0, np.abs(x0), 1.0)
    x0 = np.where(np.abs(x0) > 0, x0, 1.0)
    scale = max(1.0, float(np.abs(Omega).sum()))
    x, hist, it, ok = _unimodular_ascent(Omega, x0, max_iter, tol, scale)
    shift = 0.0
    if not ok:
        lam_min = float(np.linalg.eigvalsh(Omega)[0])
        shift = max(0.0, -lam_min) * (1.0 + 1e-9) + 1e-12 * scale
        shifted = Omega + shift * np.eye(Omega.shape[0])
        x, _, it, _ = _unimodular_ascent(shifted, x0, max_iter, tol, scale)
        hist = None
    if x[-1] == 0:  # cannot happen for unimodular iterates
        raise ZfInfeasible("fixed point produced a zero normalizing entry")
    x = x / x[-1]
    x[-1] = 1.0
    if hist is None:
        hist = [_quad(Omega, x0), _quad(Omega, x)]
    return FixedPointResult(x, hist, it, shift)


def quantize_phi(phi, levels: int) -> np.ndarray:
    """Nearest point on the ``levels``-phase grid; ties round away from zero."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    step = 2 * np.pi / levels
    idx = np.angle(phi) / step
    idx = np.sign(idx) * np.floor(np.abs(idx) + 0.5)
    return np.exp(1j * step * idx)


def reflection_step(channels, w, phi, case, max_iter=1000, tol=1e-9):
    """Fixed-point reflection update followed by the case-specific rounding."""
    Omega, _, _ = reflection_objective(channels, w)
    phit0 = np.concatenate([np.conj(phi), [1.0]])
    res = fixed_point_phi(Omega, phit0, max_iter, tol)
    phi_new = np.conj(res.phi_tilde[:-1])
    if case.kind == "discrete":
        phi_new = quantize_phi(phi_new, case.levels)
    return phi_new, res


# ---------------------------------------------------------------------------
# alternating algorithm
# ---------------------------------------------------------------------------

def run_zf(config: SystemConfig, channels, params: ZfParams | None = None):
    """Alternate ZF beams and the reflection update until the power settles.

    Returns ``(BeamformingSolution, SolverTrace)`` in physical units. The best
    (lowest power) iterate is returned; each iterate's beams are recomputed
    for its own reflection vector, so every returned pair is consistent.
    """
    params = ZfParams() if params is None else params
    channels.check(config)
    cfg, ch, scale = model.normalize(config, channels)
    trace = SolverTrace("zf")
    irs = config.irs_enabled
    phi = np.ones(config.M, dtype=complex) if irs else np.zeros(config.M, dtype=complex)
    best = None
    prev = None
    try:
        for v in range(params.max_outer_iterations):
            t0 = time.perf_counter()
            hhat = model.effective_channels(phi, ch, irs)
            w, _, _, branches = zf_beamformers(hhat, cfg, params.theta_grid, params.theta_tol)
            p = model.total_power(w)
            rc, re = model.achieved_rates(w, hhat, 1.0)
            slack = float(min((rc - cfg.rates_center).min(), (re - cfg.rates_edge).min()))
            if best is None or p < best[0]:
                best = (p, phi.copy(), w.copy())
            done = not irs or (prev is not None and abs(p - prev) <= params.epsilon * max(prev, 1e-300))
            if not done:
                phi, _ = reflection_step(ch, w, phi, config.reflection,
                                         params.fp_max_iter, params.fp_tol)
            trace.add(v, p * scale ** 2, 0.0, slack, 1e3 * (time.perf_counter() - t0),
                      ";".join(branches))
            if done:
                trace.status = "converged"
                break
            prev = p
        else:
            trace.status = "max_iterations"
    except (ZfInfeasible, DimensionError) as exc:
        trace.status = "failed"
        trace.notes.append(str(exc))
        if best is None:
            return None, trace
    _, phi_b, w_b = best
    sol = BeamformingSolution.evaluate(w_b * scale, phi_b, config, channels)
    if not model.audit(sol, config, channels, params.audit_tol).feasible:
        trace.status = "not_converged"
    return sol, trace
