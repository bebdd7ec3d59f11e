"""Real-valued channel models: AWGN, fast Rayleigh, high-speed-railway Rician.

SNR convention: transmitted symbols have unit average power, and the noise
added to each real symbol has variance ``10**(-snr_db/10)``. Fading models
scale each symbol by an independent amplitude ``|h|`` with ``E[|h|^2] = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics.tensor import check_finite

KINDS = ("awgn", "rayleigh", "rician")

# suburban high-speed railway two-slope K-factor model (dB, metres)
ZETA1, ZETA2 = -0.027, 8.48
ZETA3, ZETA4 = -0.0023, 4.024
BREAKPOINT_M = 200.0
K_MEAN_DB = 2.83


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def noise_variance(snr_db: float) -> float:
    if snr_db == math.inf:
        return 0.0
    return 10.0 ** (-snr_db / 10.0)


def rician_k_factor_db(d: float | None = None) -> float:
    """K factor in dB: ζ1·d + ζ2 up to the breakpoint, ζ3·d + ζ4 beyond it."""
    if d is None:
        return K_MEAN_DB
    if d <= 0:
        raise ValueError("distance must be positive")
    if d <= BREAKPOINT_M:
        return ZETA1 * d + ZETA2
    return ZETA3 * d + ZETA4


def rician_k_factor_branches_db(d: float) -> tuple[float, float]:
    """Both slopes evaluated at ``d`` (the model is discontinuous at the breakpoint)."""
    return ZETA1 * d + ZETA2, ZETA3 * d + ZETA4


def rician_k_factor(d: float | None = None) -> float:
    return db_to_linear(rician_k_factor_db(d))


def draw_rician_amplitude(k: float, rng: np.random.Generator, size=None):
    """|h| with h = sqrt(K/(K+1)) + sqrt(1/(2(K+1))) (psi1 + j psi2), psi ~ N(0, 1).

    The 1/2 in the diffuse term keeps E[|h|^2] = 1 for every K.
    """
    if k < 0:
        raise ValueError("K must be non-negative")
    los = math.sqrt(k / (k + 1.0))
    sigma = math.sqrt(1.0 / (2.0 * (k + 1.0)))
    re = los + sigma * rng.standard_normal(size)
    im = sigma * rng.standard_normal(size)
    return np.hypot(re, im)


def draw_rayleigh_amplitude(rng: np.random.Generator, size=None):
    return draw_rician_amplitude(0.0, rng, size)


@dataclass(frozen=True)
class ChannelModel:
    kind: str = "awgn"
    snr_db: float = 8.0
    distance_m: float | None = None
    k_db: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}; expected one of {KINDS}")

    @property
    def noise_var(self) -> float:
        return noise_variance(self.snr_db)

    @property
    def k_linear(self) -> float:
        if self.k_db is not None:
            return db_to_linear(self.k_db)
        return rician_k_factor(self.distance_m)

    def with_snr(self, snr_db: float) -> "ChannelModel":
        return ChannelModel(self.kind, snr_db, self.distance_m, self.k_db)

    def label(self) -> str:
        return self.kind

    def fading(self, shape, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "awgn":
            return np.ones(shape)
        if self.kind == "rayleigh":
            return draw_rayleigh_amplitude(rng, shape)
        return draw_rician_amplitude(self.k_linear, rng, shape)

    def noise(self, shape, rng: np.random.Generator, snr_db=None) -> np.ndarray:
        var = self.noise_var if snr_db is None else noise_variance_array(snr_db)
        return np.sqrt(var) * rng.standard_normal(shape)

    def transmit(self, s: np.ndarray, rng: np.random.Generator, snr_db=None):
        """Return ``(r, |h|)``. ``snr_db`` may be a per-row array overriding the model SNR."""
        s = np.asarray(s, dtype=np.float64)
        check_finite(s, "channel input")
        amp = self.fading(s.shape, rng)
        n = self.noise(s.shape, rng, snr_db)
        return amp * s + n, amp

    def apply(self, s: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.transmit(s, rng)[0]


def noise_variance_array(snr_db) -> np.ndarray:
    """Per-row noise variance with shape (B, 1), broadcasting over symbols."""
    snr = np.asarray(snr_db, dtype=np.float64).reshape(-1, 1)
    return np.where(np.isinf(snr), 0.0, 10.0 ** (-snr / 10.0))


def apply(ch: ChannelModel, s: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return ch.apply(s, rng)
