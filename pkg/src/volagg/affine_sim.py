"""One-factor essentially affine term-structure simulator.

The state follows a square-root (CIR) diffusion
    ds = (a + b s) dt + sqrt(s) dW,  a > 0, b < 0,
the short rate is r = d0 + d1 s, and zero-coupon yields are affine in s:
    y(s, tau) = (-A(tau) + B(tau) s) / tau,
with A, B solving
    A' = -a B - d0,   B' = b B - B^2 / 2 + d1,   A(0) = B(0) = 0.
All but the shortest yield carry i.i.d. correlated Gaussian measurement
noise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .data import PanelSeries
from .errors import MaturityOutOfRange, NoisePSDViolation, NonPositiveState, NotPositiveDefinite, StepTooLarge
from .symmat import chol, tril_indices

RICCATI_STEP = 1e-3
HALVING_TOL = 1e-8


def _corr_from_rhos(rhos, k: int) -> np.ndarray:
    r = np.eye(k)
    iu = np.triu_indices(k, 1)
    if len(rhos) != len(iu[0]):
        raise ValueError(f"need {len(iu[0])} correlations for {k} noisy yields, got {len(rhos)}")
    r[iu] = rhos
    r[(iu[1], iu[0])] = rhos
    return r


@dataclass(frozen=True)
class AffineParams:
    """Model constants. Defaults are the one-factor estimates used in the
    reference simulation design (weekly sampling).

    ``noise_corr`` lists the upper-triangle correlations of the noisy
    yields row by row: (rho12, rho13, rho14, rho23, rho24, rho34).
    """

    a1q: float = 0.5
    b11q: float = -0.0137
    d0: float = 0.0110
    d1: float = 0.0074
    maturities: tuple = (1.0 / 12.0, 2.0, 4.0, 6.0, 8.0)
    noise_sd: tuple = (0.0119, 0.0144, 0.0155, 0.0159)
    noise_corr: tuple = (0.9727, 0.9511, 0.9371, 0.9950, 0.9877, 0.9978)
    delta: float = 1.0 / 52.0

    def __post_init__(self):
        if not self.b11q < 0:
            raise ValueError("b11q must be negative (mean reversion)")
        if not self.a1q > 0:
            raise ValueError("a1q must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if len(self.noise_sd) != len(self.maturities) - 1:
            raise ValueError("need one noise sd per maturity after the first")
        if any(s < 0 for s in self.noise_sd):
            raise ValueError("noise standard deviations must be non-negative")
        object.__setattr__(self, "maturities", tuple(float(m) for m in self.maturities))
        object.__setattr__(self, "noise_sd", tuple(float(s) for s in self.noise_sd))
        object.__setattr__(self, "noise_corr", tuple(float(r) for r in self.noise_corr))
        try:
            chol(self.noise_corr_matrix)
        except NotPositiveDefinite as exc:
            raise NoisePSDViolation(f"noise correlation matrix is not positive definite: {exc}") from None

    @property
    def noise_corr_matrix(self) -> np.ndarray:
        return _corr_from_rhos(self.noise_corr, len(self.noise_sd))

    @property
    def noise_cov(self) -> np.ndarray:
        """Covariance of the measurement errors on the noisy yields."""
        sd = np.asarray(self.noise_sd)
        # outer product first so the result is exactly symmetric
        return np.outer(sd, sd) * self.noise_corr_matrix

    @property
    def noise_cov_padded(self) -> np.ndarray:
        """Noise covariance for all yields; the first yield is exact."""
        k = len(self.maturities)
        out = np.zeros((k, k))
        out[1:, 1:] = self.noise_cov
        return out

    @property
    def chi2_scale(self) -> float:
        """c = 2b / (exp(b delta) - 1)."""
        b = self.b11q
        return 2.0 * b / math.expm1(b * self.delta)

    @property
    def chi2_df(self) -> float:
        return 4.0 * self.a1q

    @property
    def gamma_shape(self) -> float:
        return 2.0 * self.a1q

    @property
    def gamma_rate(self) -> float:
        return -2.0 * self.b11q

    def column_names(self) -> tuple:
        names = []
        for m in self.maturities:
            months = m * 12.0
            if m < 1.0 and abs(months - round(months)) < 1e-9:
                names.append(f"{int(round(months))}m")
            else:
                names.append(f"{m:g}y")
        return tuple(names)


def _riccati_rhs(params: AffineParams, b_val):
    return -params.a1q * b_val - params.d0, params.b11q * b_val - 0.5 * b_val * b_val + params.d1


def _rk4(params: AffineParams, tau_max: float, step: float) -> tuple:
    n_steps = max(1, int(math.ceil(tau_max / step - 1e-9)))
    h = tau_max / n_steps
    grid = np.linspace(0.0, tau_max, n_steps + 1)
    a_vals = np.zeros(n_steps + 1)
    b_vals = np.zeros(n_steps + 1)
    a, b = 0.0, 0.0
    # the right-hand side does not depend on A, so the stages only track B
    for i in range(n_steps):
        ka1, kb1 = _riccati_rhs(params, b)
        ka2, kb2 = _riccati_rhs(params, b + 0.5 * h * kb1)
        ka3, kb3 = _riccati_rhs(params, b + 0.5 * h * kb2)
        ka4, kb4 = _riccati_rhs(params, b + h * kb3)
        a += h * (ka1 + 2 * ka2 + 2 * ka3 + ka4) / 6.0
        b += h * (kb1 + 2 * kb2 + 2 * kb3 + kb4) / 6.0
        a_vals[i + 1] = a
        b_vals[i + 1] = b
    return grid, a_vals, b_vals


@dataclass(frozen=True)
class AffineSolution:
    """A(tau), B(tau) on a uniform grid starting at 0, with Hermite interpolation
    between nodes (slopes taken from the ODE)."""

    grid: np.ndarray
    A: np.ndarray
    B: np.ndarray
    params: AffineParams = field(repr=False)

    def __post_init__(self):
        da, db = _riccati_rhs(self.params, self.B)
        object.__setattr__(self, "_a_spline", CubicHermiteSpline(self.grid, self.A, da))
        object.__setattr__(self, "_b_spline", CubicHermiteSpline(self.grid, self.B, db))

    @property
    def tau_max(self) -> float:
        return float(self.grid[-1])

    def coefficients(self, tau) -> tuple:
        """(A(tau), B(tau)) for scalar or array maturities."""
        t = np.asarray(tau, dtype=float)
        if np.any(t < 0) or np.any(t > self.tau_max * (1 + 1e-12)):
            raise MaturityOutOfRange(f"maturity outside [0, {self.tau_max}]")
        a, b = self._a_spline(t), self._b_spline(t)
        if t.ndim == 0:
            return float(a), float(b)
        return a, b

    def loadings(self, maturities=None) -> np.ndarray:
        """beta_i = B(tau_i) / tau_i, the sensitivity of each yield to the state."""
        m = np.asarray(self.params.maturities if maturities is None else maturities, dtype=float)
        return self.coefficients(m)[1] / m

    def intercepts(self, maturities=None) -> np.ndarray:
        m = np.asarray(self.params.maturities if maturities is None else maturities, dtype=float)
        return -self.coefficients(m)[0] / m


def solve_riccati(params: AffineParams, tau_max: Optional[float] = None, step: float = RICCATI_STEP,
                  check: bool = True) -> AffineSolution:
    """Integrate the bond-pricing ODEs with classical fourth-order Runge-Kutta.

    With ``check`` on, the solve is repeated at half the step and
    StepTooLarge is raised if B(tau_max) moves by more than 1e-8.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    tau_max = max(params.maturities) if tau_max is None else tau_max
    if tau_max < max(params.maturities):
        raise MaturityOutOfRange("tau_max must cover every maturity")
    grid, a_vals, b_vals = _rk4(params, tau_max, step)
    if check:
        _, _, b_half = _rk4(params, tau_max, step / 2.0)
        if abs(b_half[-1] - b_vals[-1]) > HALVING_TOL:
            raise StepTooLarge(f"halving step {step} changes B({tau_max}) by {abs(b_half[-1] - b_vals[-1]):.2e}")
    return AffineSolution(grid, a_vals, b_vals, params)


def yield_curve(sol: AffineSolution, s, tau):
    """(-A(tau) + B(tau) s) / tau."""
    t = np.asarray(tau, dtype=float)
    if np.any(t <= 0):
        raise MaturityOutOfRange("maturity must be positive")
    a, b = sol.coefficients(t)
    return (-a + b * np.asarray(s, dtype=float)) / t


def cir_transition_sample(x, params: AffineParams, rng: np.random.Generator, delta: Optional[float] = None):
    """Draw s_{t+delta} given s_t = x from the exact transition law.

    2 c s_{t+delta} is noncentral chi-squared with 4a degrees of freedom
    and noncentrality 2 c x exp(b delta); sampled as a Poisson mixture of
    central chi-squared (gamma) draws.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(~(x_arr > 0)):
        raise NonPositiveState("CIR state must be positive")
    delta = params.delta if delta is None else delta
    b = params.b11q
    c = 2.0 * b / math.expm1(b * delta)
    nc = 2.0 * c * x_arr * math.exp(b * delta)
    j = rng.poisson(nc / 2.0)
    chi2 = 2.0 * rng.gamma(params.chi2_df / 2.0 + j)
    out = chi2 / (2.0 * c)
    return float(out) if x_arr.ndim == 0 else out


def cir_invariant_sample(params: AffineParams, rng: np.random.Generator, size=None):
    """Gamma(shape 2a, rate -2b) draw from the stationary law."""
    return rng.gamma(params.gamma_shape, 1.0 / params.gamma_rate, size=size)


def cir_conditional_moments(x, params: AffineParams, delta: Optional[float] = None) -> tuple:
    """Exact mean and variance of s_{t+delta} given s_t = x."""
    delta = params.delta if delta is None else delta
    a, b = params.a1q, params.b11q
    e = math.exp(b * delta)
    x = np.asarray(x, dtype=float)
    mean = x * e + a * (-math.expm1(b * delta)) / (-b)
    var = x * (e - e * e) / (-b) + a * math.expm1(b * delta) ** 2 / (2.0 * b * b)
    return mean, var


def truth_covariance(sol: AffineSolution, params: AffineParams, s, exact: bool = True) -> np.ndarray:
    """Conditional covariance of the normalized yield changes given s_t = s.

    [beta beta^T V(s) + 2 Sigma_eps] / delta, where V(s) is the exact CIR
    conditional variance over one step (or s * delta when ``exact`` is
    False) and Sigma_eps the measurement-noise covariance padded with a
    zero row/column for the exact short yield. ``s`` may be an array, giving
    a (len(s), d, d) stack.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(~(s_arr > 0)):
        raise NonPositiveState("state must be positive")
    beta = sol.loadings()
    if exact:
        v = cir_conditional_moments(s_arr, params)[1]
    else:
        v = s_arr * params.delta
    outer = np.outer(beta, beta)
    noise = 2.0 * params.noise_cov_padded
    out = (np.multiply.outer(v, outer) + noise) / params.delta
    return out


@dataclass(frozen=True)
class SimulatedMarket:
    state_path: np.ndarray
    ideal_yields: np.ndarray
    observed_yields: np.ndarray
    truth: np.ndarray
    params: AffineParams = field(repr=False)

    def to_panel(self) -> PanelSeries:
        """Observed yields as a panel with the short yield as factor."""
        return PanelSeries(
            values=self.observed_yields,
            delta=self.params.delta,
            factor_col=0,
            columns=self.params.column_names(),
        )


def simulate_market(params: AffineParams, n_steps: int, rng: np.random.Generator,
                    solution: Optional[AffineSolution] = None) -> SimulatedMarket:
    """Simulate ``n_steps`` weekly observations of the yield panel.

    The initial state is drawn from the gamma invariant law, later states
    by exact transitions. Noise is added to every yield but the first.
    ``truth[i]`` is the conditional covariance of Y_i given s_i.
    """
    if n_steps < 2:
        raise ValueError("need at least 2 steps")
    sol = solution if solution is not None else solve_riccati(params)
    s = np.empty(n_steps)
    s[0] = cir_invariant_sample(params, rng)
    for i in range(1, n_steps):
        s[i] = cir_transition_sample(s[i - 1], params, rng)
    ideal = sol.intercepts()[None, :] + s[:, None] * sol.loadings()[None, :]
    k = len(params.noise_sd)
    z = rng.standard_normal((n_steps, k))
    scale = chol(params.noise_corr_matrix) * np.asarray(params.noise_sd)[:, None]
    observed = ideal.copy()
    observed[:, 1:] += z @ scale.T
    truth = truth_covariance(sol, params, s)
    for arr in (s, ideal, observed, truth):
        arr.setflags(write=False)
    return SimulatedMarket(s, ideal, observed, truth, params)


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent generator for replication ``rep`` of a study seeded by ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


def vech_headers(d: int) -> list:
    rows, cols = tril_indices(d)
    return [f"s_{i + 1}_{j + 1}" for i, j in zip(rows, cols)]


def write_truth_csv(truth: np.ndarray, path: Union[str, Path]) -> None:
    """One row per time step with the vech entries of the truth matrix."""
    d = truth.shape[-1]
    rows, cols = tril_indices(d)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + vech_headers(d))
        for t, m in enumerate(truth):
            w.writerow([t] + [repr(float(x)) for x in m[rows, cols]])
