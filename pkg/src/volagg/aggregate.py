"""Dynamic aggregation of the time- and state-domain estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DensityZeroWithPositiveOmega, DimensionMismatch
from .timedomain import time_variance_coeff

TIME_ONLY = "time_only"
STATE_ONLY = "state_only"
BLENDED = "blended"


@dataclass(frozen=True)
class WeightInputs:
    """Ingredients of the variance-minimizing weight.

    b_ratio is the effective-sample ratio N h / n between the state- and
    time-domain windows; density_at_x is the factor density at the current
    level.
    """

    tau: float
    nu0: float
    b_ratio: float
    density_at_x: float

    def __post_init__(self):
        for name in ("tau", "nu0", "b_ratio", "density_at_x"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
        if self.tau < 0 or self.b_ratio < 0 or self.density_at_x < 0:
            raise ValueError("tau, b_ratio and density_at_x must be non-negative")
        if not self.nu0 > 0:
            raise ValueError("nu0 must be positive")


@dataclass(frozen=True)
class AggregatedEstimate:
    sigma: np.ndarray
    omega: float
    provenance: str


def optimal_weight(w: WeightInputs) -> float:
    """omega = b c(tau) p / (2 nu0 + b c(tau) p) with c(tau) = tau (1+e^tau)/(e^tau-1).

    Same as b tau (1+e^tau) p / (2 nu0 (e^tau-1) + b tau (1+e^tau) p), written
    so that tau -> 0 stays finite.
    """
    num = w.b_ratio * time_variance_coeff(w.tau) * w.density_at_x
    if num <= 0.0:
        return 0.0
    if math.isinf(num):
        return 1.0
    return min(1.0, max(0.0, num / (2.0 * w.nu0 + num)))


def psi_coefficient(omega: float, w: WeightInputs) -> float:
    """Asymptotic variance factor 2 omega^2 nu0 / p + b (1-omega)^2 c(tau)."""
    if not 0.0 <= omega <= 1.0:
        raise ValueError("omega must lie in [0, 1]")
    time_part = w.b_ratio * (1.0 - omega) ** 2 * time_variance_coeff(w.tau)
    if omega == 0.0:
        return time_part
    if w.density_at_x == 0.0:
        raise DensityZeroWithPositiveOmega("psi is undefined for omega > 0 where the density is zero")
    return 2.0 * omega**2 * w.nu0 / w.density_at_x + time_part


def effective_b(n_state: int, h: float, n: int) -> float:
    if n_state <= 0 or n <= 0 or h < 0:
        raise ValueError("window sizes must be positive and h non-negative")
    return n_state * h / n


def aggregate(sigma_s: Optional[np.ndarray], sigma_t: np.ndarray, omega: float) -> AggregatedEstimate:
    """omega * sigma_s + (1 - omega) * sigma_t.

    ``sigma_s=None`` stands for an unavailable state-domain estimate (a
    degenerate design); the time-domain estimate is returned with omega 0.
    """
    sigma_t = np.asarray(sigma_t, dtype=float)
    if sigma_s is None:
        return AggregatedEstimate(sigma_t.copy(), 0.0, TIME_ONLY)
    if not 0.0 <= omega <= 1.0:
        raise ValueError("omega must lie in [0, 1]")
    sigma_s = np.asarray(sigma_s, dtype=float)
    if sigma_s.shape != sigma_t.shape:
        raise DimensionMismatch(f"{sigma_s.shape} vs {sigma_t.shape}")
    if omega == 0.0:
        return AggregatedEstimate(sigma_t.copy(), 0.0, TIME_ONLY)
    if omega == 1.0:
        return AggregatedEstimate(sigma_s.copy(), 1.0, STATE_ONLY)
    return AggregatedEstimate(omega * sigma_s + (1.0 - omega) * sigma_t, float(omega), BLENDED)
