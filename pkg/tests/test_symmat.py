import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from volagg.errors import AsymmetryError, DimensionMismatch, NonSquareError, NotPositiveDefinite
from volagg.symmat import (
    SymMatrix,
    chol,
    duplication_matrix,
    duplication_projector,
    kron,
    lambda_matrix,
    psd_floor,
    unvech,
    vec,
    vech,
)


def random_symmetric(rng, d):
    a = rng.standard_normal((d, d))
    return a + a.T


def test_vech_small_cases():
    assert_array_equal(vech(np.array([[1.0, 2.0], [2.0, 3.0]])), [1.0, 2.0, 3.0])
    assert_array_equal(vech(np.eye(2)), [1.0, 0.0, 1.0])


def test_vech_order_is_column_stacked_lower_triangle():
    a = np.array([[11.0, 21, 31], [21, 22, 32], [31, 32, 33]])
    assert_array_equal(vech(a), [11, 21, 31, 22, 32, 33])


def test_vech_rejects_bad_input():
    with pytest.raises(NonSquareError):
        vech(np.ones((2, 3)))
    with pytest.raises(AsymmetryError):
        vech(np.array([[1.0, 2.0], [2.1, 1.0]]))


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_vech_roundtrip(d, seed):
    a = random_symmetric(np.random.default_rng(seed), d)
    assert_array_equal(unvech(vech(a)), a)


def test_projector_d1():
    assert_array_equal(duplication_projector(1), [[1.0]])


def test_projector_d2_on_example():
    a = np.array([[1.0, 2.0], [2.0, 3.0]])
    assert_allclose(duplication_projector(2) @ vec(a), [1.0, 2.0, 3.0], atol=1e-15)


def test_projector_d3_structure():
    # brute force D by enumeration: vec position (i, j) maps to the vech slot of (max, min)
    d = 3
    slots = {}
    for j in range(d):
        for i in range(j, d):
            slots[(i, j)] = len(slots)
    dup = np.zeros((d * d, len(slots)))
    for i in range(d):
        for j in range(d):
            dup[i + j * d, slots[(max(i, j), min(i, j))]] = 1.0
    assert_array_equal(duplication_matrix(d), dup)
    assert_array_equal(dup.sum(axis=1), np.ones(d * d))
    p = duplication_projector(d)
    assert_allclose(p, np.linalg.inv(dup.T @ dup) @ dup.T, atol=1e-15)
    for (i, j), k in slots.items():
        expected = 1.0 if i == j else 0.5
        assert np.count_nonzero(p[k]) == (1 if i == j else 2)
        assert set(np.round(p[k][p[k] != 0], 15)) == {expected}


@pytest.mark.parametrize("d", range(1, 7))
def test_projector_identity_on_basis_and_random(d):
    p = duplication_projector(d)
    assert p.shape == (d * (d + 1) // 2, d * d)
    rows, cols = np.tril_indices(d)
    for i, j in zip(rows, cols):
        e = np.zeros((d, d))
        e[i, j] = e[j, i] = 1.0
        assert_allclose(p @ vec(e), vech(e), atol=1e-14)
    rng = np.random.default_rng(d)
    for _ in range(10):
        a = random_symmetric(rng, d)
        assert_allclose(p @ vec(a), vech(a), atol=1e-14)


def test_kron_examples():
    assert_array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))
    b = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert_array_equal(kron(np.array([[2.0]]), b), 2 * b)
    assert_array_equal(kron(b, np.eye(3)), np.kron(b, np.eye(3)))


def test_kron_mixed_product():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b, c, d = (rng.standard_normal((2, 2)) for _ in range(4))
        assert_allclose(kron(a, b) @ kron(c, d), kron(a @ c, b @ d), atol=1e-12)


def test_kron_shapes():
    assert kron(np.ones((2, 3)), np.ones((4, 5))).shape == (8, 15)


def test_chol_examples():
    assert_array_equal(chol(np.eye(3)), np.eye(3))
    assert_allclose(chol(np.array([[4.0, 2.0], [2.0, 5.0]])), [[2.0, 0.0], [1.0, 2.0]])
    with pytest.raises(NotPositiveDefinite):
        chol(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_chol_reconstructs():
    rng = np.random.default_rng(1)
    g = rng.standard_normal((5, 5))
    a = g @ g.T + 0.1 * np.eye(5)
    low = chol(a)
    assert_allclose(low @ low.T, a, atol=1e-12)
    assert np.all(np.diag(low) > 0)
    assert_allclose(np.triu(low, 1), 0.0)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_chol_exists_iff_positive_eigenvalues(seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((5, 5))
    a = g @ g.T - rng.uniform(0, 2) * np.eye(5)
    smallest = np.linalg.eigvalsh(a)[0]
    if smallest > 1e-9:
        chol(a)
    elif smallest < -1e-9:
        with pytest.raises(NotPositiveDefinite):
            chol(a)


def test_psd_floor_examples():
    assert_array_equal(psd_floor(np.eye(2), 1e-8), np.eye(2))
    assert_allclose(psd_floor(np.diag([1.0, -0.5]), 1e-8), np.diag([1.0, 1e-8]), atol=1e-15)


def test_psd_floor_random_indefinite():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a = random_symmetric(rng, 5)
        out = psd_floor(a, 1e-6)
        # reconstruction roundoff scales with the spectral radius
        assert np.linalg.eigvalsh(out)[0] >= 1e-6 - 1e-13 * np.abs(a).max() * 5
        assert_array_equal(out, out.T)


def test_lambda_matrix_identity_case():
    # for Sigma = I the vech covariance is diag(1 on diagonal slots, 1/2 off-diagonal)
    lam = lambda_matrix(np.eye(3))
    assert_allclose(lam, np.diag([1, 0.5, 0.5, 1, 0.5, 1]), atol=1e-15)


def test_lambda_matrix_matches_wishart_covariance():
    # Cov(vech(yy^T)) = 2 Lambda for y ~ N(0, S): check the closed form entrywise
    s = np.array([[2.0, 0.3, 0.1], [0.3, 1.0, 0.2], [0.1, 0.2, 0.5]])
    lam = lambda_matrix(s)
    rows, cols = np.tril_indices(3)
    pairs = [(j, i) for i, j in zip(*np.triu_indices(3))]
    for a, (i, j) in enumerate(pairs):
        for b, (k, l) in enumerate(pairs):
            cov = s[i, k] * s[j, l] + s[i, l] * s[j, k]
            assert lam[a, b] == pytest.approx(cov / 2, abs=1e-14)


def test_symmatrix_roundtrip_and_validation():
    a = np.array([[1.0, 2.0], [2.0, 3.0]])
    sm = SymMatrix.from_dense(a)
    assert sm.dim == 2
    assert_array_equal(sm.data, [1.0, 2.0, 3.0])
    assert_array_equal(sm.dense(), a)
    with pytest.raises(DimensionMismatch):
        SymMatrix(3, np.zeros(4))
