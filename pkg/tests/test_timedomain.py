import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from volagg.errors import InsufficientHistory
from volagg.timedomain import (
    TimeDomainConfig,
    exp_smooth,
    moving_average,
    riskmetrics,
    smoothing_weights,
    tau,
    time_variance_coeff,
)


@pytest.fixture
def returns():
    return np.random.default_rng(0).standard_normal((300, 4))


def test_moving_average_small_example():
    y = np.array([[1.0], [2.0], [3.0]])
    # window n=2 ending before t=3: (2^2 + 3^2) / 2... rows t-2, t-1 are 2 and 3
    assert moving_average(y, 3, 2)[0, 0] == pytest.approx(6.5)


def test_smoothing_weights_closed_form():
    w = smoothing_weights(104, 0.94)
    i = np.arange(1, 105)
    assert_allclose(w, (1 - 0.94) / (1 - 0.94**104) * 0.94 ** (i - 1), rtol=1e-12)
    assert w[0] > w[-1]


@given(st.integers(1, 400), st.floats(0.5, 1.0))
def test_weights_sum_to_one(n, lam):
    assert math.fsum(smoothing_weights(n, lam)) == pytest.approx(1.0, abs=1e-12)


def test_lambda_one_is_moving_average(returns):
    for t in (104, 200, 300):
        assert_allclose(exp_smooth(returns, t, TimeDomainConfig(104, 1.0)), moving_average(returns, t, 104), atol=1e-12)


def test_continuity_near_lambda_one(returns):
    near = exp_smooth(returns, 200, TimeDomainConfig(104, 1 - 1e-9))
    assert_allclose(near, moving_average(returns, 200, 104), atol=1e-6)


def test_truncation_remainder():
    assert 0.94**104 == pytest.approx(0.00160434134, rel=1e-8)


def test_tau_examples():
    assert tau(TimeDomainConfig(104, 0.94)) == pytest.approx(6.24, abs=1e-12)
    assert TimeDomainConfig(104, 1.0).tau == 0.0


def test_time_variance_coeff_values():
    assert time_variance_coeff(0.0) == 2.0
    assert time_variance_coeff(6.24) == pytest.approx(6.26438173779119583, rel=1e-12)
    # coefficient approaches tau for large tau
    assert time_variance_coeff(200.0) == pytest.approx(200.0, rel=1e-12)


def test_time_variance_coeff_continuous_and_increasing():
    grid = np.concatenate([[0.0, 1e-9, 1e-7, 1e-6, 1e-5], np.linspace(1e-3, 20, 500)])
    vals = np.array([time_variance_coeff(t) for t in grid])
    assert np.all(np.diff(vals) >= 0)
    assert time_variance_coeff(1e-6 * (1 - 1e-12)) == pytest.approx(time_variance_coeff(1e-6), rel=1e-12)


def test_estimates_are_symmetric_psd(returns):
    est = exp_smooth(returns, 150, TimeDomainConfig())
    assert_array_equal(est, est.T)
    assert np.linalg.eigvalsh(est)[0] >= -1e-12


def test_no_lookahead(returns):
    cfg = TimeDomainConfig(50, 0.9)
    base = exp_smooth(returns, 120, cfg)
    changed = returns.copy()
    changed[120:] += 100.0
    assert_array_equal(exp_smooth(changed, 120, cfg), base)


def test_insufficient_history(returns):
    with pytest.raises(InsufficientHistory):
        exp_smooth(returns, 50, TimeDomainConfig(104, 0.94))


def test_riskmetrics_matches_direct_sum(returns):
    t = 40
    direct = sum((1 - 0.94) * 0.94 ** (i - 1) * np.outer(returns[t - i], returns[t - i]) for i in range(1, t + 1))
    assert_allclose(riskmetrics(returns, t, 0.94), direct, atol=1e-12)
