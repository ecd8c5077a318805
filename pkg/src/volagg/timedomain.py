"""Time-domain volatility matrix estimators built from recent returns."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientHistory


@dataclass(frozen=True)
class TimeDomainConfig:
    n: int = 104
    lam: float = 0.94

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("window n must be >= 1")
        if not 0 < self.lam <= 1:
            raise ValueError("lambda must lie in (0, 1]")

    @property
    def tau(self) -> float:
        return tau(self)


def _rows(y) -> np.ndarray:
    return np.asarray(getattr(y, "rows", y), dtype=float)


def _history(rows: np.ndarray, t: int, n: int) -> np.ndarray:
    if t < n or t > rows.shape[0]:
        raise InsufficientHistory(f"need {n} rows before index {t}, have {min(t, rows.shape[0])}")
    # most recent first: Y_{t-1}, ..., Y_{t-n}
    return rows[t - n:t][::-1]


def smoothing_weights(n: int, lam: float) -> np.ndarray:
    """Normalized weights (1-lam)/(1-lam^n) * lam^(i-1), i = 1..n (most recent first)."""
    if lam == 1.0:
        return np.full(n, 1.0 / n)
    w = lam ** np.arange(n)
    return w / w.sum()


def moving_average(y, t: int, n: int) -> np.ndarray:
    """(1/n) * sum_{i=1..n} Y_{t-i} Y_{t-i}^T."""
    past = _history(_rows(y), t, n)
    return past.T @ past / n


def exp_smooth(y, t: int, cfg: TimeDomainConfig) -> np.ndarray:
    """Exponential smoothing over a finite window of ``cfg.n`` rows.

    Weights lam^(i-1) are renormalized to sum to one, so ``lam == 1`` is the
    moving average.
    """
    past = _history(_rows(y), t, cfg.n)
    w = smoothing_weights(cfg.n, cfg.lam)
    out = (past * w[:, None]).T @ past
    return (out + out.T) / 2


def riskmetrics(y, t: int, lam: float = 0.94) -> np.ndarray:
    """Untruncated RiskMetrics smoothing over every row before ``t``.

    The weights (1-lam) lam^(i-1) are left unnormalized, as in the
    infinite-sum definition.
    """
    rows = _rows(y)
    if t < 1 or t > rows.shape[0]:
        raise InsufficientHistory(f"no rows before index {t}")
    past = rows[:t][::-1]
    w = (1 - lam) * lam ** np.arange(t)
    return (past * w[:, None]).T @ past


def rolling_exp_smooth(y, start: int, stop: int, cfg: TimeDomainConfig) -> np.ndarray:
    """exp_smooth at every t in [start, stop), stacked as (stop-start, d, d)."""
    rows = _rows(y)
    if start < cfg.n:
        raise InsufficientHistory(f"need {cfg.n} rows before index {start}")
    return np.stack([exp_smooth(rows, t, cfg) for t in range(start, stop)])


def tau(cfg: TimeDomainConfig) -> float:
    return cfg.n * (1.0 - cfg.lam)


def time_variance_coeff(tau: float) -> float:
    """tau (1 + e^tau) / (e^tau - 1); equals 2 in the moving-average limit tau -> 0."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if tau < 1e-6:
        # series: 2 + tau^2/6 + O(tau^4)
        return 2.0 + tau * tau / 6.0
    # tau * coth(tau/2), stable for large tau
    return tau / math.tanh(tau / 2.0)
