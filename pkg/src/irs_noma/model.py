"""System model: configuration, effective channels, NOMA SINRs, rates and audits.

Array conventions used throughout the package:

* ``w`` has shape ``(K, 2, N)``; index 0 on the second axis is the central
  user, index 1 the cell-edge user. ``w.reshape(-1)`` is the stacked vector
  ``[w_1c, w_1e, ..., w_Kc, w_Ke]``.
* ``phi`` has shape ``(M,)``.
* Effective channels ``hhat`` have shape ``(K, 2, N)`` and satisfy
  ``received = vdot(hhat[k, i], w[j, l])``, i.e. ``hhat^H w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

CENTER, EDGE = 0, 1


@dataclass(frozen=True)
class ReflectionCase:
    """Feasible set for the reflection vector.

    ``kind`` is ``"box"`` (|phi_m| <= 1), ``"unit"`` (|phi_m| = 1) or
    ``"discrete"`` (unit modulus, phase on an ``levels``-point grid).
    """

    kind: str = "unit"
    levels: int | None = None

    def __post_init__(self):
        if self.kind not in ("box", "unit", "discrete"):
            raise ValueError(f"unknown reflection case {self.kind!r}")
        if self.kind == "discrete":
            if self.levels is None or self.levels < 2:
                raise ValueError("discrete phase case needs levels >= 2")
        elif self.levels is not None:
            raise ValueError("levels only applies to the discrete case")

    @classmethod
    def box(cls) -> "ReflectionCase":
        return cls("box")

    @classmethod
    def unit(cls) -> "ReflectionCase":
        return cls("unit")

    @classmethod
    def discrete(cls, levels: int) -> "ReflectionCase":
        return cls("discrete", int(levels))

    @classmethod
    def parse(cls, text: str, levels: int | None = None) -> "ReflectionCase":
        """Parse ``I``/``II``/``III`` (or ``box``/``unit``/``discrete``)."""
        key = text.strip().lower()
        if key in ("i", "1", "box"):
            return cls.box()
        if key in ("ii", "2", "unit"):
            return cls.unit()
        if key in ("iii", "3", "discrete"):
            return cls.discrete(2 if levels is None else levels)
        raise ValueError(f"unknown reflection case {text!r}")

    @property
    def label(self) -> str:
        if self.kind == "box":
            return "I"
        if self.kind == "unit":
            return "II"
        return f"III(L={self.levels})"


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions, noise and rate targets of one downlink instance.

    Rate targets may be given as a scalar (shared by all clusters) or as a
    length-K sequence; ``tau_center``/``tau_edge`` return per-cluster SINR
    thresholds ``2**r - 1``.
    """

    N: int = 8
    M: int = 30
    K: int = 3
    noise_power: float = 1e-11  # -80 dBm
    rate_center: float | tuple = 4.0
    rate_edge: float | tuple = 4.0
    reflection: ReflectionCase = field(default_factory=ReflectionCase)
    irs_enabled: bool = True

    def __post_init__(self):
        if self.N < 1 or self.M < 1 or self.K < 1:
            raise ValueError("N, M and K must be positive")
        if not self.noise_power > 0:
            raise ValueError("noise power must be positive")
        for name in ("rate_center", "rate_edge"):
            r = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if r.size not in (1, self.K):
                raise ValueError(f"{name} must be scalar or length K")
            if np.any(r < 0) or not np.all(np.isfinite(r)):
                raise ValueError(f"{name} must be finite and nonnegative")
            if r.size > 1:
                object.__setattr__(self, name, tuple(float(x) for x in r))

    def _rates(self, value) -> np.ndarray:
        return np.broadcast_to(np.asarray(value, dtype=float), (self.K,)).copy()

    @property
    def rates_center(self) -> np.ndarray:
        return self._rates(self.rate_center)

    @property
    def rates_edge(self) -> np.ndarray:
        return self._rates(self.rate_edge)

    @property
    def tau_center(self) -> np.ndarray:
        return np.exp2(self.rates_center) - 1.0

    @property
    def tau_edge(self) -> np.ndarray:
        return np.exp2(self.rates_edge) - 1.0

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0 if watt > 0 else -math.inf


# ---------------------------------------------------------------------------
# channels seen by the users
# ---------------------------------------------------------------------------

def effective_channel(phi, H, g_ki, h_ki, irs_enabled: bool = True) -> np.ndarray:
    """Composite channel ``hhat`` with ``hhat^H = g^H diag(phi) H + h^H``."""
    H = np.asarray(H)
    g_ki = np.asarray(g_ki)
    h_ki = np.asarray(h_ki)
    if not irs_enabled:
        return h_ki.astype(complex)
    phi = np.asarray(phi)
    M, N = H.shape
    if phi.shape != (M,) or g_ki.shape != (M,) or h_ki.shape != (N,):
        raise ValueError(
            f"dimension mismatch: H {H.shape}, phi {phi.shape}, "
            f"g {g_ki.shape}, h {h_ki.shape}")
    return H.conj().T @ (np.conj(phi) * g_ki) + h_ki


def effective_channels(phi, channels, irs_enabled: bool = True) -> np.ndarray:
    """All effective channels at once, shape ``(K, 2, N)``."""
    if not irs_enabled:
        return channels.h.astype(complex)
    phi = np.asarray(phi)
    if phi.shape != (channels.M,):
        raise ValueError(f"phi has shape {phi.shape}, expected ({channels.M},)")
    return np.einsum("mn,kim->kin", channels.H.conj(), np.conj(phi) * channels.g) + channels.h


def cross_gains(hhat: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``A[k, i, j, l] = hhat_{k,i}^H w_{j,l}``."""
    return np.einsum("kin,jln->kijl", hhat.conj(), w)


def _zeta_all(A: np.ndarray) -> np.ndarray:
    P = np.abs(A) ** 2
    K = A.shape[0]
    total = P.sum(axis=(2, 3))
    own = P[np.arange(K), :, np.arange(K), :].sum(axis=-1)
    return total - own


def interference_zeta(w, hhat, k: int, i: int) -> float:
    """Inter-cluster interference power at user ``(k, i)``."""
    K = w.shape[0]
    return float(sum(abs(np.vdot(hhat[k, i], w[j, l])) ** 2
                     for j in range(K) if j != k for l in (CENTER, EDGE)))


def sinr_edge(w, hhat, k: int, noise_power: float) -> float:
    """SINR of the edge user decoding its own symbol."""
    sig = abs(np.vdot(hhat[k, EDGE], w[k, EDGE])) ** 2
    intra = abs(np.vdot(hhat[k, EDGE], w[k, CENTER])) ** 2
    return sig / (noise_power + intra + interference_zeta(w, hhat, k, EDGE))


def sinr_center_decoding_edge(w, hhat, k: int, noise_power: float) -> float:
    """SINR of the central user decoding the edge user's symbol (SIC stage)."""
    sig = abs(np.vdot(hhat[k, CENTER], w[k, EDGE])) ** 2
    intra = abs(np.vdot(hhat[k, CENTER], w[k, CENTER])) ** 2
    return sig / (noise_power + intra + interference_zeta(w, hhat, k, CENTER))


def sinr_center(w, hhat, k: int, noise_power: float) -> float:
    """SINR of the central user after perfect SIC."""
    sig = abs(np.vdot(hhat[k, CENTER], w[k, CENTER])) ** 2
    return sig / (noise_power + interference_zeta(w, hhat, k, CENTER))


def sinrs(w, hhat, noise_power: float):
    """Vectorized ``(gamma_c, gamma_e, gamma_ce)``, each of shape ``(K,)``."""
    A = cross_gains(hhat, w)
    P = np.abs(A) ** 2
    zeta = _zeta_all(A)
    ks = np.arange(w.shape[0])
    g_c = P[ks, CENTER, ks, CENTER] / (noise_power + zeta[:, CENTER])
    g_e = P[ks, EDGE, ks, EDGE] / (noise_power + P[ks, EDGE, ks, CENTER] + zeta[:, EDGE])
    g_ce = P[ks, CENTER, ks, EDGE] / (noise_power + P[ks, CENTER, ks, CENTER] + zeta[:, CENTER])
    return g_c, g_e, g_ce


def achieved_rates(w, hhat, noise_power: float):
    """Per-cluster ``(rate_center, rate_edge)`` in bits/s/Hz.

    The edge rate is limited by both the edge user and the SIC stage at the
    central user.
    """
    g_c, g_e, g_ce = sinrs(w, hhat, noise_power)
    return np.log2(1.0 + g_c), np.log2(1.0 + np.minimum(g_e, g_ce))


def total_power(w) -> float:
    return float(np.sum(np.abs(w) ** 2))


# ---------------------------------------------------------------------------
# solutions and audits
# ---------------------------------------------------------------------------

@dataclass
class BeamformingSolution:
    w: np.ndarray
    phi: np.ndarray
    total_power: float
    rates_center: np.ndarray
    rates_edge: np.ndarray

    @classmethod
    def evaluate(cls, w, phi, config: SystemConfig, channels) -> "BeamformingSolution":
        w = np.asarray(w, dtype=complex).reshape(config.K, 2, config.N)
        phi = np.asarray(phi, dtype=complex)
        hhat = effective_channels(phi, channels, config.irs_enabled)
        rc, re = achieved_rates(w, hhat, config.noise_power)
        return cls(w=w, phi=phi, total_power=total_power(w), rates_center=rc, rates_edge=re)

    @property
    def power_dbm(self) -> float:
        return watt_to_dbm(self.total_power)


def modulus_slack(phi, case: ReflectionCase) -> np.ndarray:
    """Per-element membership slack of ``phi`` in the feasible set (>= 0 inside)."""
    phi = np.asarray(phi)
    mod = np.abs(phi)
    if case.kind == "box":
        return 1.0 - mod
    dev = np.abs(mod - 1.0)
    if case.kind == "unit":
        return -dev
    step = 2 * np.pi / case.levels
    nearest = np.exp(1j * step * np.round(np.angle(phi) / step))
    return -np.maximum(dev, np.abs(phi - nearest))


@dataclass
class FeasibilityReport:
    center_slack: np.ndarray
    edge_slack: np.ndarray
    modulus_slack: np.ndarray
    tol: float

    @property
    def min_rate_slack(self) -> float:
        return float(min(self.center_slack.min(), self.edge_slack.min()))

    @property
    def min_modulus_slack(self) -> float:
        return float(self.modulus_slack.min()) if self.modulus_slack.size else 0.0

    @property
    def feasible(self) -> bool:
        return self.min_rate_slack >= -self.tol and self.min_modulus_slack >= -self.tol

    def as_row(self) -> dict:
        return {
            "feasible": int(self.feasible),
            "min_rate_slack": self.min_rate_slack,
            "min_modulus_slack": self.min_modulus_slack,
        }


def audit(solution: BeamformingSolution, config: SystemConfig, channels,
          tol: float = 1e-4) -> FeasibilityReport:
    """Check rate constraints (bits/s/Hz) and reflection-set membership (modulus)."""
    hhat = effective_channels(solution.phi, channels, config.irs_enabled)
    rc, re = achieved_rates(solution.w, hhat, config.noise_power)
    if config.irs_enabled:
        mod = modulus_slack(solution.phi, config.reflection)
    else:
        mod = np.zeros(0)
    return FeasibilityReport(rc - config.rates_center, re - config.rates_edge, mod, tol)


# ---------------------------------------------------------------------------
# numerical scaling
# ---------------------------------------------------------------------------

def normalize(config: SystemConfig, channels):
    """Rescale an instance so the noise power is 1 and channels are O(1).

    Returns ``(config_n, channels_n, w_scale)``; beamformers of the scaled
    problem map back to watts-consistent ones as ``w = w_scale * w_n``.
    SINRs are invariant under this change of units.
    """
    norms = np.linalg.norm(channels.h, axis=-1)
    c = float(np.sqrt(np.mean(norms ** 2)))
    if not c > 0:
        hhat = effective_channels(np.ones(channels.M), channels, True)
        c = float(np.sqrt(np.mean(np.linalg.norm(hhat, axis=-1) ** 2)))
    if not c > 0:
        c = 1.0
    sigma = math.sqrt(config.noise_power)
    scaled = channels.scaled(1.0 / c)
    return config.with_(noise_power=1.0), scaled, sigma / c
