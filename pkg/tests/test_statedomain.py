import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from volagg.data import NormalizedReturns
from volagg.errors import AllCandidatesDegenerate, DegenerateDesign
from volagg.statedomain import (
    EPANECHNIKOV,
    GAUSSIAN,
    StateDomainConfig,
    default_candidates,
    equivalent_weights,
    gcv_bandwidth,
    gcv_score,
    kernel_density,
    kernel_moments,
    local_linear_fit,
    local_linear_sigma,
    silverman_bandwidth,
    weight_sums,
)


def make_returns(factor, rows):
    return NormalizedReturns(delta=1.0, rows=np.asarray(rows, float), factor=np.asarray(factor, float),
                             columns=tuple(f"c{i}" for i in range(np.shape(rows)[1])))


@pytest.mark.parametrize("kernel", [EPANECHNIKOV, GAUSSIAN])
def test_kernel_moments_by_quadrature(kernel):
    lim = kernel.support if math.isfinite(kernel.support) else np.inf
    mass = integrate.quad(lambda u: kernel(u), -lim, lim)[0]
    first = integrate.quad(lambda u: u * kernel(u), -lim, lim)[0]
    mu2 = integrate.quad(lambda u: u * u * kernel(u), -lim, lim)[0]
    nu0 = integrate.quad(lambda u: kernel(u) ** 2, -lim, lim)[0]
    assert mass == pytest.approx(1.0, abs=1e-10)
    assert first == pytest.approx(0.0, abs=1e-12)
    assert kernel_moments(kernel) == pytest.approx({"mu2": mu2, "nu0": nu0}, abs=1e-10)


def test_kernel_moment_values():
    assert kernel_moments("epanechnikov") == {"mu2": 0.2, "nu0": 0.6}
    assert kernel_moments("gaussian")["nu0"] == pytest.approx(0.28209479177387814, rel=1e-15)


def test_weight_sums_brute_force():
    rng = np.random.default_rng(0)
    f = rng.normal(size=60)
    x, h = 0.2, 0.7
    brute = [0.0] * 4
    for fk in f:
        u = (fk - x) / h
        kh = 0.75 * (1 - u * u) / h if abs(u) < 1 else 0.0
        for ell in range(4):
            brute[ell] += (fk - x) ** ell * kh
    assert_allclose(weight_sums(f, x, h), brute, rtol=1e-12, atol=1e-14)


def test_weight_sums_symmetric_design():
    f = np.array([-0.5, -0.25, 0.0, 0.25, 0.5])
    w0, w1, w2, w3 = weight_sums(f, 0.0, 1.0)
    assert w1 == pytest.approx(0.0, abs=1e-15)
    assert w3 == pytest.approx(0.0, abs=1e-15)
    assert w0 > 0 and w2 > 0


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.floats(0.3, 2.0))
def test_equivalent_weight_identities(seed, h):
    f = np.random.default_rng(seed).normal(size=200)
    x = 0.1
    try:
        w = equivalent_weights(f, x, h)
    except DegenerateDesign:
        return
    assert w.sum() == pytest.approx(1.0, abs=1e-10)
    assert (w * (f - x)).sum() == pytest.approx(0.0, abs=1e-10)


def test_weights_match_normal_equations():
    rng = np.random.default_rng(1)
    f = rng.uniform(-2, 2, size=80)
    z = rng.normal(size=80)
    x, h = 0.3, 0.9
    kh = EPANECHNIKOV((f - x) / h) / h
    design = np.column_stack([np.ones_like(f), f - x])
    coef = np.linalg.solve(design.T @ (kh[:, None] * design), design.T @ (kh * z))
    assert equivalent_weights(f, x, h) @ z == pytest.approx(coef[0], abs=1e-12)


def test_two_point_design():
    f = np.array([-0.5, 0.5])
    w = equivalent_weights(f, 0.0, 1.0, min_support=2)
    assert_allclose(w, [0.5, 0.5], atol=1e-15)
    assert local_linear_fit(f, np.array([1.0, 3.0]), 0.0, 1.0, min_support=2) == pytest.approx(2.0)


def test_degenerate_designs():
    f = np.full(50, 1.0)
    with pytest.raises(DegenerateDesign):
        equivalent_weights(f, 1.0, 0.5)
    with pytest.raises(DegenerateDesign):
        equivalent_weights(np.linspace(0, 1, 20), 10.0, 0.5)
    with pytest.raises(DegenerateDesign):
        equivalent_weights(np.array([-0.5, 0.5]), 0.0, 1.0)


def test_affine_target_reproduced_exactly():
    rng = np.random.default_rng(2)
    f = rng.normal(size=300)
    a = np.array([[0.5, 0.1], [0.1, 0.4]])
    b = np.array([[0.2, -0.05], [-0.05, 0.3]])
    z = np.stack([a + b * fk for fk in f])
    for x in (-0.5, 0.0, 0.7):
        fit = local_linear_fit(f, z.reshape(len(f), -1), x, 0.8).reshape(2, 2)
        assert_allclose(fit, a + b * x, atol=1e-10)


def test_sigma_entrywise_matches_weighted_least_squares():
    rng = np.random.default_rng(3)
    n, d = 400, 3
    f = rng.normal(size=n)
    rows = rng.normal(size=(n, d)) * np.sqrt(1 + 0.3 * f[:, None] ** 2)
    y = make_returns(f, rows)
    cfg = StateDomainConfig(bandwidth=0.6, window=n)
    x = 0.25
    est = local_linear_sigma(y, x, cfg)
    kh = EPANECHNIKOV((f - x) / 0.6) / 0.6
    design = np.column_stack([np.ones(n), f - x])
    for i in range(d):
        for j in range(d):
            z = rows[:, i] * rows[:, j]
            coef = np.linalg.solve(design.T @ (kh[:, None] * design), design.T @ (kh * z))
            assert est[i, j] == pytest.approx(coef[0], abs=1e-12)


def test_estimate_can_be_indefinite():
    # negative equivalent weights at the boundary can push an eigenvalue below zero
    f = np.array([0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    rows = np.zeros((11, 2))
    rows[:, 0] = 0.01
    rows[:, 1] = 0.01
    rows[-1] = [5.0, -5.0]
    y = make_returns(f, rows)
    est = local_linear_sigma(y, 0.0, StateDomainConfig(bandwidth=1.5, window=11))
    assert np.linalg.eigvalsh(est)[0] < 0


def test_window_excludes_current_and_future():
    rng = np.random.default_rng(4)
    f = rng.normal(size=100)
    rows = rng.normal(size=(100, 2))
    cfg = StateDomainConfig(bandwidth=1.0, window=50)
    base = local_linear_sigma(make_returns(f, rows), 0.0, cfg, t=60)
    rows2, f2 = rows.copy(), f.copy()
    rows2[60:] *= 10
    f2[60:] = 0.0
    assert_allclose(local_linear_sigma(make_returns(f2, rows2), 0.0, cfg, t=60), base, rtol=0, atol=0)


def test_gcv_prefers_widest_bandwidth_for_linear_target():
    # an exactly linear target leaves only roundoff residuals, so a little
    # noise is added; with no curvature bias, wider windows only cut variance
    rng = np.random.default_rng(5)
    f = rng.uniform(0, 1, size=200)
    z = 1.0 + f + 0.01 * rng.standard_normal(200)
    cands = [0.2, 0.4, 0.8, 1.6]
    scores = [gcv_score(f, z[:, None], h) for h in cands]
    assert np.all(np.diff(scores) < 0)
    # Y Y^T for a one-column panel equals z when rows = sqrt(z)
    y = make_returns(f, np.sqrt(z)[:, None])
    assert gcv_bandwidth(y, cands, StateDomainConfig(window=200)) == 1.6


def test_gcv_reproducible_and_on_grid():
    rng = np.random.default_rng(6)
    # equispaced design: even the smallest candidate keeps >= 5 points at the edges
    f = np.linspace(-1, 1, 1000)
    rows = rng.normal(size=(1000, 2))
    y = make_returns(f, rows)
    cfg = StateDomainConfig(window=1000)
    cands = default_candidates(f)
    for h in cands:
        assert np.isfinite(gcv_score(f, rows**2, h))
    h1 = gcv_bandwidth(y, cands, cfg)
    assert h1 == gcv_bandwidth(y, cands, cfg)
    assert h1 in cands


def test_gcv_single_viable_candidate_and_none():
    rng = np.random.default_rng(7)
    f = rng.uniform(0, 1, size=100)
    y = make_returns(f, rng.normal(size=(100, 2)))
    cfg = StateDomainConfig(window=100)
    assert gcv_bandwidth(y, [1e-6, 0.5], cfg) == 0.5
    with pytest.raises(AllCandidatesDegenerate):
        gcv_bandwidth(y, [1e-7, 1e-6], cfg)


def test_default_candidates_span():
    f = np.random.default_rng(8).normal(size=1000)
    c = default_candidates(f)
    scale = np.std(f, ddof=1) * 1000 ** (-0.2)
    assert len(c) == 20
    assert c[0] == pytest.approx(0.1 * scale) and c[-1] == pytest.approx(3 * scale)


def test_density_single_point():
    assert kernel_density([0.0], 0.0, bw=1.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert kernel_density([0.0], 50.0, bw=1.0) == 0.0


def test_density_standard_normal_sample():
    # at N=1e5 the Silverman smoothing bias is ~0.002 and the sampling sd ~0.003
    f = np.random.default_rng(9).standard_normal(100_000)
    assert kernel_density(f, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=0.01)


def test_density_integrates_to_one():
    f = np.random.default_rng(10).standard_normal(500)
    grid = np.linspace(-8, 8, 4001)
    assert integrate.trapezoid(kernel_density(f, grid), grid) == pytest.approx(1.0, abs=1e-3)


def test_silverman_rule():
    f = np.random.default_rng(11).normal(size=256)
    assert silverman_bandwidth(f) == pytest.approx(1.06 * np.std(f, ddof=1) * 256 ** (-0.2))
