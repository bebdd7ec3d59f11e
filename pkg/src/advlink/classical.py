"""BPSK, hard-decision Hamming(7,4) and their closed-form block error rates.

Codewords are systematic, ``[d1 d2 d3 d4 p1 p2 p3]`` with
``p1 = d1^d2^d3``, ``p2 = d1^d2^d4``, ``p3 = d1^d3^d4``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

from .channel import ChannelModel, db_to_linear

PARITY = np.array([
    [1, 1, 1],
    [1, 1, 0],
    [1, 0, 1],
    [0, 1, 1],
], dtype=np.int64)
GENERATOR = np.hstack([np.eye(4, dtype=np.int64), PARITY])
PARITY_CHECK = np.hstack([PARITY.T, np.eye(3, dtype=np.int64)])

# syndrome (as integer s0*4 + s1*2 + s2) -> flipped position, -1 for none
_SYNDROME_TO_POS = np.full(8, -1, dtype=np.int64)
for _pos in range(7):
    _col = PARITY_CHECK[:, _pos]
    _SYNDROME_TO_POS[_col[0] * 4 + _col[1] * 2 + _col[2]] = _pos

SCHEMES = ("uncoded_bpsk_k4", "hamming74_bpsk")
SCHEME_ALIASES = {"uncoded": "uncoded_bpsk_k4", "hamming": "hamming74_bpsk"}


def q_function(x):
    return 0.5 * erfc(np.asarray(x, dtype=np.float64) / math.sqrt(2.0))


def bpsk_modulate(bits) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def bpsk_demodulate(symbols) -> np.ndarray:
    # exactly zero decides for bit 0
    return (np.asarray(symbols) < 0).astype(np.int64)


def hamming_encode(data) -> np.ndarray:
    data = np.asarray(data, dtype=np.int64)
    return (data @ GENERATOR) % 2


def hamming_syndrome(code) -> np.ndarray:
    code = np.asarray(code, dtype=np.int64)
    return (code @ PARITY_CHECK.T) % 2


def hamming_decode(code) -> np.ndarray:
    """Correct at most one flipped bit per word via syndrome lookup."""
    code = np.array(code, dtype=np.int64)
    syn = hamming_syndrome(code)
    pos = _SYNDROME_TO_POS[syn[..., 0] * 4 + syn[..., 1] * 2 + syn[..., 2]]
    flat = code.reshape(-1, 7)
    flat_pos = pos.reshape(-1)
    rows = np.nonzero(flat_pos >= 0)[0]
    flat[rows, flat_pos[rows]] ^= 1
    return flat.reshape(code.shape)[..., :4]


def index_to_bits(idx, k: int = 4) -> np.ndarray:
    """Message index -> k bits, most significant first."""
    idx = np.asarray(idx, dtype=np.int64)
    shifts = np.arange(k - 1, -1, -1)
    return (idx[..., None] >> shifts) & 1


def bits_to_index(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    k = bits.shape[-1]
    return bits @ (1 << np.arange(k - 1, -1, -1))


def bit_error_probability(snr_db: float) -> float:
    """Hard-decision BPSK bit error probability on the unit-power AWGN axis.

    With unit-energy symbols and noise variance sigma^2 per symbol,
    N0 = 2 sigma^2, so p = Q(sqrt(2 Es/N0)) = Q(1/sigma).
    """
    if snr_db == math.inf:
        return 0.0
    es_n0 = db_to_linear(snr_db) / 2.0
    return float(q_function(math.sqrt(2.0 * es_n0)))


def analytic_bler(scheme: str, snr_db: float, channel: str = "awgn") -> float:
    if channel != "awgn":
        raise ValueError("closed-form BLER is only available for AWGN; use Monte Carlo")
    scheme = SCHEME_ALIASES.get(scheme, scheme)
    p = bit_error_probability(snr_db)
    if scheme == "uncoded_bpsk_k4":
        return 1.0 - (1.0 - p) ** 4
    if scheme == "hamming74_bpsk":
        return 1.0 - (1.0 - p) ** 7 - 7.0 * p * (1.0 - p) ** 6
    raise ValueError(f"unknown scheme {scheme!r}")


def simulate_bler(scheme: str, channel: ChannelModel, n_blocks: int,
                  rng: np.random.Generator, chunk: int = 200_000) -> tuple[int, int]:
    """Monte Carlo block errors for a classical scheme; returns (errors, blocks)."""
    scheme = SCHEME_ALIASES.get(scheme, scheme)
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    errors = 0
    remaining = n_blocks
    while remaining > 0:
        n = min(chunk, remaining)
        data = rng.integers(0, 2, size=(n, 4))
        tx = data if scheme == "uncoded_bpsk_k4" else hamming_encode(data)
        r = channel.apply(bpsk_modulate(tx), rng)
        hard = bpsk_demodulate(r)
        est = hard if scheme == "uncoded_bpsk_k4" else hamming_decode(hard)
        errors += int(np.any(est != data, axis=1).sum())
        remaining -= n
    return errors, n_blocks
