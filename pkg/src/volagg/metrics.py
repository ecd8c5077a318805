"""Loss measures for volatility matrix estimates and the time/state
independence diagnostic."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

from .errors import DimensionMismatch, InsufficientReplications, Misalignment, TruthNotPD, WindowOutOfRange
from .symmat import psd_floor

PSD_EPS = 1e-8
Z_975 = 1.959963984540054


def _pair(truth, est):
    truth = np.asarray(truth, dtype=float)
    est = np.asarray(est, dtype=float)
    if truth.shape != est.shape:
        raise DimensionMismatch(f"{truth.shape} vs {est.shape}")
    return truth, est


def entropy_loss(truth, est, eps: float = PSD_EPS) -> float:
    """tr(S^-1 E) - log det(S^-1 E) - d.

    Estimates whose smallest eigenvalue is below ``eps`` are floored first.
    """
    truth, est = _pair(truth, est)
    try:
        low = np.linalg.cholesky(truth)
    except np.linalg.LinAlgError:
        raise TruthNotPD("true covariance is not positive definite") from None
    if np.linalg.eigvalsh(est)[0] < eps:
        est = psd_floor(est, eps)
    # whitened estimate L^-1 E L^-T has the same spectrum as S^-1 E
    tmp = np.linalg.solve(low, est)
    white = np.linalg.solve(low, tmp.T)
    white = (white + white.T) / 2
    vals = np.linalg.eigvalsh(white)
    return float(np.sum(vals - np.log(vals) - 1.0))


def quadratic_loss(truth, est) -> float:
    """tr((E - S)^2), the squared Frobenius distance."""
    truth, est = _pair(truth, est)
    diff = est - truth
    return float(np.sum(diff * diff))


def _check_aligned(y, estimates):
    y = np.asarray(y, dtype=float)
    estimates = np.asarray(estimates, dtype=float)
    if y.ndim != 2 or estimates.ndim != 3 or len(estimates) == 0:
        raise Misalignment("expected (m, d) returns and (m, d, d) estimates")
    if estimates.shape[1:] != (y.shape[1], y.shape[1]):
        raise DimensionMismatch(f"returns of dim {y.shape[1]} vs estimates {estimates.shape[1:]}")
    return y, estimates


def prediction_error(y, estimates) -> float:
    """(1/m) sum_i tr((Y_i Y_i^T - E_i)^2) over m aligned steps."""
    y, estimates = _check_aligned(y, estimates)
    if len(y) != len(estimates):
        raise Misalignment(f"{len(y)} returns vs {len(estimates)} estimates")
    diff = y[:, :, None] * y[:, None, :] - estimates
    return float(np.mean(np.sum(diff * diff, axis=(1, 2))))


def adaptive_prediction_error(y, estimates, k: int, index=None) -> float:
    """(1/m) sum_i tr((avg_{j=i-k..i+k} Y_j Y_j^T - E_i)^2).

    ``y`` holds every available return; ``index[i]`` is the row of ``y``
    matching ``estimates[i]``. Without ``index`` the estimates are aligned
    with the first rows of ``y`` offset by ``k`` (so y has m + 2k rows).
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    y, estimates = _check_aligned(y, estimates)
    m = len(estimates)
    idx = np.arange(k, k + m) if index is None else np.asarray(index, dtype=int)
    if len(idx) != m:
        raise Misalignment(f"{len(idx)} indices vs {m} estimates")
    if idx.min() - k < 0 or idx.max() + k >= len(y):
        raise WindowOutOfRange(f"window of half-width {k} leaves the {len(y)} available returns")
    outer = y[:, :, None] * y[:, None, :]
    if k == 0:
        local = outer[idx]
    else:
        csum = np.concatenate([np.zeros((1,) + outer.shape[1:]), np.cumsum(outer, axis=0)])
        local = (csum[idx + k + 1] - csum[idx - k]) / (2 * k + 1)
    diff = local - estimates
    return float(np.mean(np.sum(diff * diff, axis=(1, 2))))


@dataclass(frozen=True)
class CorrelationSeries:
    r: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    band: float
    accept: np.ndarray
    n_reps: int


def fisher_interval(r, n_reps: int, z: float = Z_975) -> tuple:
    r = np.asarray(r, dtype=float)
    half = z / math.sqrt(n_reps - 3)
    # |r| = 1 maps to +-inf and back to a degenerate interval at r
    with np.errstate(divide="ignore"):
        zr = np.arctanh(np.clip(r, -1.0, 1.0))
    return np.tanh(zr - half), np.tanh(zr + half)


def zero_correlation_band(n_reps: int, z: float = Z_975) -> float:
    """Half-width z / sqrt(R - 3) of the approximate 5% acceptance region for r = 0."""
    return z / math.sqrt(n_reps - 3)


def independence_diagnostic(portfolio, t_estimates, s_estimates, truth=None) -> CorrelationSeries:
    """Per-step Pearson correlation, across replications, of a^T E_T a and a^T E_S a.

    ``t_estimates`` and ``s_estimates`` have shape (reps, steps, d, d).
    Passing ``truth`` of the same shape correlates the estimation errors
    E - S instead, which removes the common dependence on the current state.
    """
    a = np.asarray(portfolio, dtype=float)
    t_est = np.asarray(t_estimates, dtype=float)
    s_est = np.asarray(s_estimates, dtype=float)
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        t_est = t_est - truth
        s_est = s_est - truth
    if t_est.shape != s_est.shape or t_est.ndim != 4:
        raise DimensionMismatch("estimates must both be (reps, steps, d, d)")
    n_reps = t_est.shape[0]
    if n_reps < 4:
        raise InsufficientReplications(f"need at least 4 replications, got {n_reps}")
    pt = np.einsum("i,rsij,j->rs", a, t_est, a)
    ps = np.einsum("i,rsij,j->rs", a, s_est, a)
    r = np.array([_pearson(pt[:, j], ps[:, j]) for j in range(pt.shape[1])])
    lo, hi = fisher_interval(r, n_reps)
    band = zero_correlation_band(n_reps)
    return CorrelationSeries(r=r, lower=lo, upper=hi, band=band, accept=np.abs(r) <= band, n_reps=n_reps)


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    den = math.sqrt(float(xc @ xc) * float(yc @ yc))
    return float(xc @ yc / den) if den > 0 else float("nan")


def summarize(values) -> dict:
    """Mean, sd and box-plot quantiles of a sample."""
    v = np.asarray(values, dtype=float)
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
    return {
        "mean": float(v.mean()),
        "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0,
        "min": float(q[0]),
        "q1": float(q[1]),
        "median": float(q[2]),
        "q3": float(q[3]),
        "max": float(q[4]),
    }


def sign_test(x, y) -> dict:
    """Two-sided paired sign test of x < y; ties are dropped."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    wins = int(np.sum(d < 0))
    losses = int(np.sum(d > 0))
    n = wins + losses
    p = float(binomtest(wins, n, 0.5).pvalue) if n else 1.0
    return {"wins": wins, "losses": losses, "p_value": p}
