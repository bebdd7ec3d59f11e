"""Perturbation power accounting (PNR = 10 log10(P_perturbation / P_noise))."""

from __future__ import annotations

import math

import numpy as np


def mean_power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x)))


def pnr_db(perturbation: np.ndarray, noise_var: float) -> float:
    return 10.0 * math.log10(mean_power(perturbation) / noise_var)


def scale_to_pnr(p: np.ndarray, noise_var: float, pnr_db: float) -> np.ndarray:
    """Rescale ``p`` so its mean-square power is ``noise_var * 10**(pnr_db/10)``.

    ``pnr_db = -inf`` returns an all-zero perturbation.
    """
    if noise_var <= 0:
        raise ValueError("noise power must be positive to define a PNR")
    p = np.asarray(p, dtype=np.float64)
    measured = mean_power(p)
    if measured == 0.0:
        raise ValueError("cannot scale a zero-power perturbation")
    if pnr_db == -math.inf:
        return np.zeros_like(p)
    target = noise_var * 10.0 ** (pnr_db / 10.0)
    return p * math.sqrt(target / measured)
