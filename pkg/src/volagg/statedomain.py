"""State-domain estimation: local-linear kernel smoothing of Y_k Y_k^T on the
factor level, GCV bandwidth choice and kernel density estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import AllCandidatesDegenerate, DegenerateDesign, InsufficientHistory
from .symmat import vech_stack


@dataclass(frozen=True)
class Kernel:
    """A symmetric probability density used for localization."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    mu2: float
    nu0: float
    support: float  # half-width of the support, inf for unbounded

    def __call__(self, u):
        return self.func(np.asarray(u, dtype=float))


def _epanechnikov(u: np.ndarray) -> np.ndarray:
    return np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)


def _gaussian(u: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


EPANECHNIKOV = Kernel("epanechnikov", _epanechnikov, mu2=0.2, nu0=0.6, support=1.0)
GAUSSIAN = Kernel("gaussian", _gaussian, mu2=1.0, nu0=1.0 / (2.0 * math.sqrt(math.pi)), support=math.inf)
KERNELS = {k.name: k for k in (EPANECHNIKOV, GAUSSIAN)}


def get_kernel(kernel: Union[str, Kernel]) -> Kernel:
    if isinstance(kernel, Kernel):
        return kernel
    try:
        return KERNELS[kernel.lower()]
    except KeyError:
        raise ValueError(f"unknown kernel {kernel!r}; choose from {sorted(KERNELS)}") from None


def kernel_moments(kernel: Union[str, Kernel]) -> dict:
    k = get_kernel(kernel)
    return {"mu2": k.mu2, "nu0": k.nu0}


@dataclass(frozen=True)
class StateDomainConfig:
    """Settings for the local-linear estimator.

    ``bandwidth=None`` means the bandwidth is chosen by GCV.
    """

    kernel: Kernel = EPANECHNIKOV
    bandwidth: Optional[float] = None
    window: int = 1050
    min_denominator: float = 1e-12
    min_support: int = 5

    def __post_init__(self):
        object.__setattr__(self, "kernel", get_kernel(self.kernel))
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.window < 10:
            raise ValueError("state-domain window must be at least 10")


def _kh(kernel: Kernel, u: np.ndarray, h: float) -> np.ndarray:
    return kernel(u / h) / h


def weight_sums(factor, x: float, h: float, kernel: Union[str, Kernel] = EPANECHNIKOV) -> tuple:
    """W_l(x) = sum_k (f_k - x)^l K_h(f_k - x) for l = 0..3."""
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    k = get_kernel(kernel)
    d = np.asarray(factor, dtype=float) - x
    kh = _kh(k, d, h)
    return tuple(float(np.sum(kh * d**ell)) for ell in range(4))


def equivalent_weights(
    factor,
    x: float,
    h: float,
    kernel: Union[str, Kernel] = EPANECHNIKOV,
    min_denominator: float = 1e-12,
    min_support: int = 5,
) -> np.ndarray:
    """Equivalent-kernel weights w_k(x) of the local-linear smoother.

    The weights sum to one and have zero first moment about ``x``. Raises
    DegenerateDesign when fewer than ``min_support`` points carry kernel
    mass or when W0 W2 - W1^2 <= min_denominator * (W0 h)^2.
    """
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    k = get_kernel(kernel)
    d = np.asarray(factor, dtype=float) - x
    kh = _kh(k, d, h)
    support = int(np.count_nonzero(kh > 0))
    if support < min_support:
        raise DegenerateDesign(f"only {support} points with kernel mass near x={x:.6g} (h={h:.3g})")
    w0, w1, w2 = kh.sum(), (kh * d).sum(), (kh * d * d).sum()
    den = w0 * w2 - w1 * w1
    if not den > min_denominator * (w0 * h) ** 2:
        raise DegenerateDesign(f"singular local design at x={x:.6g} (h={h:.3g})")
    return kh * (w2 - d * w1) / den


def local_linear_fit(factor, targets, x: float, h: float, kernel=EPANECHNIKOV, **guards) -> np.ndarray:
    """Local-linear intercept at ``x`` for each column of ``targets``."""
    w = equivalent_weights(factor, x, h, kernel, **guards)
    return w @ np.asarray(targets, dtype=float)


def _window(y, t: Optional[int], window: int) -> tuple:
    rows = np.asarray(y.rows, dtype=float)
    factor = np.asarray(y.factor, dtype=float)
    if t is None:
        t = rows.shape[0]
    if t < window or t > rows.shape[0]:
        raise InsufficientHistory(f"need {window} pairs before index {t}, have {min(t, rows.shape[0])}")
    return factor[t - window:t], rows[t - window:t]


def local_linear_sigma(y, x: float, cfg: StateDomainConfig, t: Optional[int] = None,
                       bandwidth: Optional[float] = None) -> np.ndarray:
    """Local-linear estimate of Sigma(x) from the ``cfg.window`` pairs
    (f_k, Y_k) with k < t.

    The result is symmetric but not necessarily positive semi-definite.
    """
    h = bandwidth if bandwidth is not None else cfg.bandwidth
    if h is None:
        raise ValueError("no bandwidth given; select one with gcv_bandwidth first")
    f, rows = _window(y, t, cfg.window)
    w = equivalent_weights(f, x, h, cfg.kernel, cfg.min_denominator, cfg.min_support)
    out = (rows * w[:, None]).T @ rows
    return (out + out.T) / 2


def default_candidates(factor, n_points: int = 20, lo: float = 0.1, hi: float = 3.0) -> np.ndarray:
    """Log-spaced bandwidths spanning [lo, hi] x sd(factor) x N^(-1/5)."""
    f = np.asarray(factor, dtype=float)
    scale = np.std(f, ddof=1) * len(f) ** (-0.2)
    if not scale > 0:
        raise ValueError("factor has zero spread; cannot build a bandwidth grid")
    return scale * np.geomspace(lo, hi, n_points)


def smoother_matrix(factor, h: float, kernel=EPANECHNIKOV, min_denominator: float = 1e-12,
                    min_support: int = 5) -> np.ndarray:
    """Hat matrix H with H[i, k] = w_k(f_i); raises DegenerateDesign if any row is."""
    k = get_kernel(kernel)
    f = np.asarray(factor, dtype=float)
    d = f[None, :] - f[:, None]
    kh = _kh(k, d, h)
    support = np.count_nonzero(kh > 0, axis=1)
    w0 = kh.sum(axis=1)
    w1 = (kh * d).sum(axis=1)
    w2 = (kh * d * d).sum(axis=1)
    den = w0 * w2 - w1 * w1
    bad = (support < min_support) | ~(den > min_denominator * (w0 * h) ** 2)
    if np.any(bad):
        raise DegenerateDesign(f"{int(bad.sum())} degenerate local fits at h={h:.3g}")
    return kh * (w2[:, None] - d * w1[:, None]) / den[:, None]


def gcv_score(factor, targets, h: float, kernel=EPANECHNIKOV, **guards) -> float:
    """RSS(h) / (1 - tr(H_h)/N)^2, with RSS summed over all target columns."""
    hat = smoother_matrix(factor, h, kernel, **guards)
    z = np.asarray(targets, dtype=float)
    resid = z - hat @ z
    n = len(z)
    return float(np.sum(resid**2) / (1.0 - np.trace(hat) / n) ** 2)


def gcv_bandwidth(y, candidates: Optional[Sequence[float]] = None, cfg: Optional[StateDomainConfig] = None,
                  t: Optional[int] = None) -> float:
    """Pick one bandwidth shared by every vech entry by minimizing GCV.

    The window is the ``cfg.window`` pairs before ``t`` (the last window if
    ``t`` is None). Candidates that give a degenerate fit anywhere in the
    window are skipped.
    """
    cfg = cfg or StateDomainConfig()
    f, rows = _window(y, t, cfg.window)
    if candidates is None:
        candidates = default_candidates(f)
    candidates = np.asarray(candidates, dtype=float)
    if candidates.size < 2 or np.any(candidates <= 0):
        raise ValueError("need at least two positive candidate bandwidths")
    z = vech_stack(rows[:, :, None] * rows[:, None, :])
    best_h, best = None, math.inf
    for h in candidates:
        try:
            score = gcv_score(f, z, h, cfg.kernel, min_denominator=cfg.min_denominator,
                              min_support=cfg.min_support)
        except DegenerateDesign:
            continue
        if np.isfinite(score) and score < best:
            best_h, best = float(h), score
    if best_h is None:
        raise AllCandidatesDegenerate("every candidate bandwidth gives a degenerate design")
    return best_h


def silverman_bandwidth(factor) -> float:
    f = np.asarray(factor, dtype=float)
    sd = np.std(f, ddof=1) if len(f) > 1 else 0.0
    return 1.06 * sd * len(f) ** (-0.2)


def kernel_density(factor, x, bw: Optional[float] = None, kernel=GAUSSIAN):
    """Kernel density estimate (1/(N b)) sum_k K((f_k - x)/b).

    ``bw=None`` uses Silverman's rule 1.06 sd N^(-1/5). ``x`` may be a
    scalar or an array.
    """
    k = get_kernel(kernel)
    f = np.asarray(factor, dtype=float)
    if f.size == 0:
        raise ValueError("factor sample is empty")
    b = silverman_bandwidth(f) if bw is None else bw
    if not b > 0:
        raise ValueError("density bandwidth must be positive")
    xs = np.asarray(x, dtype=float)
    dens = k((f[None, :] - xs.reshape(-1, 1)) / b).sum(axis=1) / (f.size * b)
    return float(dens[0]) if xs.ndim == 0 else dens.reshape(xs.shape)
