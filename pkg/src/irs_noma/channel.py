"""Random channel realizations: path loss times correlated Rayleigh fading.

Every link draws from its own ``numpy`` PCG64 stream keyed by
``SeedSequence(seed, spawn_key=(link, k, ...))``:

==========  ====================  ======================================
link id     spawn key             array
==========  ====================  ======================================
0           ``(0,)``              small-scale ``H``, shape (M, N)
1           ``(1, k, 0)``         base draw for ``g_{k,c}``
1           ``(1, k, 1)``         innovation for ``g_{k,e}``
2           ``(2, k, 0)``         base draw for ``h_{k,c}``
2           ``(2, k, 1)``         innovation for ``h_{k,e}``
==========  ====================  ======================================

Adding clusters never perturbs the draws of existing ones, and since arrays
are filled in C order, growing ``M`` only appends IRS rows/entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GAIN_MODES = ("amplitude", "power")


@dataclass(frozen=True)
class PathLossSpec:
    reference_gain: float  # C0, linear, at 1 m
    distance: float        # meters
    exponent: float

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError(f"distance must be positive, got {self.distance}")
        if not self.exponent > 0:
            raise ValueError(f"exponent must be positive, got {self.exponent}")
        if not self.reference_gain > 0:
            raise ValueError(f"reference gain must be positive, got {self.reference_gain}")


def pathloss_gain(spec: PathLossSpec) -> float:
    """``C0 * d**(-alpha)``."""
    if not spec.distance > 0:
        raise ValueError("distance must be positive")
    return spec.reference_gain * spec.distance ** (-spec.exponent)


@dataclass(frozen=True)
class CorrelationSpec:
    rho_direct: float = 0.9   # between h_{k,c} and h_{k,e}
    rho_reflect: float = 0.9  # between g_{k,c} and g_{k,e}

    def __post_init__(self):
        for rho in (self.rho_direct, self.rho_reflect):
            if not 0.0 <= rho <= 1.0:
                raise ValueError(f"correlation must lie in [0, 1], got {rho}")


@dataclass(frozen=True)
class ChannelParams:
    """Large-scale geometry. Defaults are the K=3 simulation setup.

    ``gain_mode`` says how ``C0 d^-alpha`` multiplies the unit-variance
    fading: ``"amplitude"`` applies it as is (received power scales with its
    square), ``"power"`` applies its square root (received power scales with
    it).
    """

    reference_gain_db: float = -30.0
    d_bs_irs: float = 30.0
    d_irs_center: float = 50.0
    d_irs_edge: float = 70.0
    d_bs_center: float = 50.0
    d_bs_edge: float = 80.0
    exp_bs_irs: float = 2.5
    exp_irs_user: float = 2.5
    exp_bs_user: float = 3.5
    correlation: CorrelationSpec = field(default_factory=CorrelationSpec)
    gain_mode: str = "amplitude"

    def __post_init__(self):
        if self.gain_mode not in GAIN_MODES:
            raise ValueError(f"gain_mode must be one of {GAIN_MODES}")

    @property
    def reference_gain(self) -> float:
        return 10.0 ** (self.reference_gain_db / 10.0)

    def _spec(self, d, alpha) -> PathLossSpec:
        return PathLossSpec(self.reference_gain, d, alpha)

    def amplitude(self, spec: PathLossSpec) -> float:
        gain = pathloss_gain(spec)
        return gain if self.gain_mode == "amplitude" else math.sqrt(gain)

    @property
    def bs_irs(self) -> PathLossSpec:
        return self._spec(self.d_bs_irs, self.exp_bs_irs)

    def irs_user(self, i: int) -> PathLossSpec:
        return self._spec((self.d_irs_center, self.d_irs_edge)[i], self.exp_irs_user)

    def bs_user(self, i: int) -> PathLossSpec:
        return self._spec((self.d_bs_center, self.d_bs_edge)[i], self.exp_bs_user)


@dataclass
class ChannelRealization:
    """One draw of all links.

    ``H``: (M, N) BS to IRS; ``g``: (K, 2, M) IRS to users; ``h``: (K, 2, N)
    BS to users. The second axis of ``g``/``h`` is (center, edge).
    """

    H: np.ndarray
    g: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=complex)
        self.g = np.asarray(self.g, dtype=complex)
        self.h = np.asarray(self.h, dtype=complex)
        M, N = self.H.shape
        K = self.g.shape[0]
        if self.g.shape != (K, 2, M) or self.h.shape != (K, 2, N):
            raise ValueError(
                f"inconsistent shapes H {self.H.shape}, g {self.g.shape}, h {self.h.shape}")
        if not (np.all(np.isfinite(self.H)) and np.all(np.isfinite(self.g))
                and np.all(np.isfinite(self.h))):
            raise ValueError("channel entries must be finite")

    @property
    def M(self) -> int:
        return self.H.shape[0]

    @property
    def N(self) -> int:
        return self.H.shape[1]

    @property
    def K(self) -> int:
        return self.g.shape[0]

    def scaled(self, c: float) -> "ChannelRealization":
        """Scale the user-side links ``g`` and ``h`` (hence every ``hhat``) by ``c``."""
        return ChannelRealization(self.H.copy(), self.g * c, self.h * c)

    def check(self, config) -> None:
        if (self.N, self.M, self.K) != (config.N, config.M, config.K):
            raise ValueError(
                f"channels are (N={self.N}, M={self.M}, K={self.K}), config is "
                f"(N={config.N}, M={config.M}, K={config.K})")


def complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    """CN(0, 1) samples."""
    size = (size,) if np.isscalar(size) else tuple(size)
    z = rng.standard_normal(size + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2.0)


def correlated_gaussian_pair(length: int, rho: float, rng: np.random.Generator,
                             rng_innovation: np.random.Generator | None = None):
    """Two CN(0, I) vectors with elementwise correlation coefficient ``rho``.

    ``b = rho * a + sqrt(1 - rho**2) * e``. The innovation ``e`` comes from
    ``rng_innovation`` when given, else from ``rng`` after ``a``.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    a = complex_normal(rng, length)
    e = complex_normal(rng if rng_innovation is None else rng_innovation, length)
    b = rho * a + math.sqrt(1.0 - rho * rho) * e
    return a, b


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def generate(config, seed: int, params: ChannelParams | None = None) -> ChannelRealization:
    """Draw a realization for ``config``; a pure function of ``(config, seed, params)``."""
    params = ChannelParams() if params is None else params
    N, M, K = config.N, config.M, config.K
    if min(N, M, K) < 1:
        raise ValueError("dimensions must be positive")
    corr = params.correlation

    H = params.amplitude(params.bs_irs) * complex_normal(_stream(seed, 0), (M, N))
    g = np.empty((K, 2, M), dtype=complex)
    h = np.empty((K, 2, N), dtype=complex)
    for k in range(K):
        gc, ge = correlated_gaussian_pair(M, corr.rho_reflect, _stream(seed, 1, k, 0),
                                          _stream(seed, 1, k, 1))
        hc, he = correlated_gaussian_pair(N, corr.rho_direct, _stream(seed, 2, k, 0),
                                          _stream(seed, 2, k, 1))
        g[k, 0] = params.amplitude(params.irs_user(0)) * gc
        g[k, 1] = params.amplitude(params.irs_user(1)) * ge
        h[k, 0] = params.amplitude(params.bs_user(0)) * hc
        h[k, 1] = params.amplitude(params.bs_user(1)) * he
    return ChannelRealization(H, g, h)


# ---------------------------------------------------------------------------
# text fixtures
# ---------------------------------------------------------------------------

def _fmt(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


def write_channels(ch: ChannelRealization, path) -> None:
    """Columnar text dump.

    Layout: a header ``# channels N=.. M=.. K=..``, then blocks introduced by
    ``[H]``, ``[g k i]`` or ``[h k i]`` (``k`` 1-based, ``i`` in ``c``/``e``).
    Each block line is one matrix row, cells comma-separated as ``re+imj``.
    """
    lines = [f"# channels N={ch.N} M={ch.M} K={ch.K}", "[H]"]
    lines += [",".join(_fmt(z) for z in row) for row in ch.H]
    for name, arr in (("g", ch.g), ("h", ch.h)):
        for k in range(ch.K):
            for i, tag in enumerate("ce"):
                lines.append(f"[{name} {k + 1} {tag}]")
                lines.append(",".join(_fmt(z) for z in arr[k, i]))
    path = Path(path)
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write channels to {path}: {exc}") from exc


def read_channels(path) -> ChannelRealization:
    text = Path(path).read_text().splitlines()
    header = text[0].split()
    dims = dict(tok.split("=") for tok in header[2:])
    N, M, K = int(dims["N"]), int(dims["M"]), int(dims["K"])
    blocks: dict[str, list[list[complex]]] = {}
    current = None
    for line in text[1:]:
        line = line.strip()
        if not line:
            continue
        if line.startswith("["):
            current = line[1:-1]
            blocks[current] = []
        else:
            blocks[current].append([complex(c) for c in line.split(",")])
    H = np.array(blocks["H"], dtype=complex).reshape(M, N)
    g = np.empty((K, 2, M), dtype=complex)
    h = np.empty((K, 2, N), dtype=complex)
    for k in range(K):
        for i, tag in enumerate("ce"):
            g[k, i] = blocks[f"g {k + 1} {tag}"][0]
            h[k, i] = blocks[f"h {k + 1} {tag}"][0]
    return ChannelRealization(H, g, h)
