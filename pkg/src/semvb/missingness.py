"""Logistic missing-not-at-random mechanism.

The probability that site i's response is missing is
logistic(x*_i^T psi_x + y_i psi_y); psi_y = 0 recovers missing-at-random
and psi = (psi_0,) alone recovers missing-completely-at-random.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .models import MissingnessParams

__all__ = ["missing_prob", "simulate_missing"]

# beyond this the linear predictor's tail is handled in exp space directly
_CUTOVER = 35.0


def _stable_probs(eta: np.ndarray) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    lo = eta <= -_CUTOVER
    hi = eta >= _CUTOVER
    mid = ~(lo | hi)
    out[lo] = np.exp(eta[lo])               # 1 + e^eta is 1 to working precision
    out[hi] = 1.0 - np.exp(-eta[hi])
    out[mid] = 1.0 / (1.0 + np.exp(-eta[mid]))
    # keep strictly inside (0, 1) even when exp underflows
    return np.clip(out, 1e-300, 1.0 - 1e-16)


def missing_prob(y_i: float, xstar_i: np.ndarray,
                 psi: MissingnessParams) -> float:
    """P(m_i = 1 | y_i, x*_i, psi), strictly inside (0, 1)."""
    xstar_i = np.asarray(xstar_i, dtype=float)
    if xstar_i.shape != psi.psi_x.shape:
        raise DimensionError("xstar_i length does not match psi_x")
    eta = float(xstar_i @ psi.psi_x + psi.psi_y * y_i)
    return float(_stable_probs(np.array([eta]))[0])


def simulate_missing(y: np.ndarray, Xstar: np.ndarray,
                     psi: MissingnessParams,
                     rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli missingness indicators (True = missing)."""
    y = np.asarray(y, dtype=float)
    Xstar = np.asarray(Xstar, dtype=float)
    if Xstar.shape != (y.shape[0], psi.psi_x.shape[0]):
        raise DimensionError("y, Xstar, psi dimensions disagree")
    probs = _stable_probs(Xstar @ psi.psi_x + psi.psi_y * y)
    return rng.random(y.shape[0]) < probs
