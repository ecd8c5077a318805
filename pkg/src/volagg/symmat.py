"""Symmetric matrix helpers: vech/vec, duplication matrices, Kronecker
products and positive-definiteness utilities.

Half-vectorization stacks the lower triangle column by column, so for a
3x3 matrix the order is (0,0), (1,0), (2,0), (1,1), (2,1), (2,2).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AsymmetryError, DimensionMismatch, NonSquareError, NotPositiveDefinite

SYMMETRY_RTOL = 1e-12


def vech_size(d: int) -> int:
    return d * (d + 1) // 2


def dim_from_vech_size(m: int) -> int:
    d = int(round((np.sqrt(8 * m + 1) - 1) / 2))
    if vech_size(d) != m:
        raise DimensionMismatch(f"{m} is not a triangular number")
    return d


@lru_cache(maxsize=None)
def _tril_indices(d: int) -> tuple[np.ndarray, np.ndarray]:
    # column-major traversal of the lower triangle
    cols, rows = np.triu_indices(d)
    return rows, cols


def tril_indices(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the lower triangle in vech order."""
    rows, cols = _tril_indices(d)
    return rows.copy(), cols.copy()


def check_symmetric(a: np.ndarray, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSquareError(f"expected a square matrix, got shape {a.shape}")
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > rtol * scale:
        raise AsymmetryError("matrix is not symmetric within tolerance")
    return a


def vech(a: np.ndarray) -> np.ndarray:
    """Half-vectorize a symmetric matrix.

    >>> vech(np.array([[1.0, 2.0], [2.0, 3.0]]))
    array([1., 2., 3.])
    """
    a = check_symmetric(a)
    rows, cols = _tril_indices(a.shape[0])
    return a[rows, cols].copy()


def unvech(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    d = dim_from_vech_size(v.shape[-1])
    rows, cols = _tril_indices(d)
    out = np.zeros(v.shape[:-1] + (d, d))
    out[..., rows, cols] = v
    out[..., cols, rows] = v
    return out


def vech_stack(mats: np.ndarray) -> np.ndarray:
    """vech applied along the leading axis of a (k, d, d) stack, no symmetry check."""
    mats = np.asarray(mats, dtype=float)
    rows, cols = _tril_indices(mats.shape[-1])
    return mats[..., rows, cols]


def vec(a: np.ndarray) -> np.ndarray:
    """Stack the columns of ``a`` into one vector."""
    return np.asarray(a, dtype=float).reshape(-1, order="F")


def duplication_matrix(d: int) -> np.ndarray:
    """The 0/1 matrix D with D @ vech(A) == vec(A) for symmetric A."""
    rows, cols = _tril_indices(d)
    dup = np.zeros((d * d, vech_size(d)))
    for k, (i, j) in enumerate(zip(rows, cols)):
        dup[i + j * d, k] = 1.0
        dup[j + i * d, k] = 1.0
    return dup


def duplication_projector(d: int) -> np.ndarray:
    """P_D = (D^T D)^{-1} D^T, shape (d(d+1)/2, d^2)."""
    dup = duplication_matrix(d)
    dtd = dup.T @ dup  # diagonal: 1 for diagonal entries, 2 for off-diagonal
    return dup.T / np.diag(dtd)[:, None]


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    ra, ca = a.shape
    rb, cb = b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(ra * rb, ca * cb)


def chol(a: np.ndarray, pivot_rtol: float = 1e-12) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises NotPositiveDefinite when a pivot falls below
    ``pivot_rtol * max(diag(a))``.
    """
    a = check_symmetric(a)
    d = a.shape[0]
    floor = pivot_rtol * max(float(np.max(np.diag(a), initial=0.0)), 0.0)
    low = np.zeros_like(a)
    for j in range(d):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if not pivot > floor or pivot <= 0.0:
            raise NotPositiveDefinite(f"pivot {j} is {pivot:.3e}")
        low[j, j] = np.sqrt(pivot)
        low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


def psd_floor(a: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Clamp the eigenvalues of a symmetric matrix to at least ``eps``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    a = check_symmetric(a)
    vals, vecs = np.linalg.eigh(a)
    if vals[0] >= eps:
        return a.copy()
    vals = np.maximum(vals, eps)
    out = (vecs * vals) @ vecs.T
    return (out + out.T) / 2


def lambda_matrix(sigma: np.ndarray) -> np.ndarray:
    """P_D (Sigma kron Sigma) P_D^T: covariance shape of vech of either estimator."""
    p = duplication_projector(sigma.shape[0])
    return p @ kron(sigma, sigma) @ p.T


@dataclass(frozen=True)
class SymMatrix:
    """A symmetric matrix held as its vech vector."""

    dim: int
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape != (vech_size(self.dim),):
            raise DimensionMismatch(
                f"vech of a {self.dim}x{self.dim} matrix has {vech_size(self.dim)} entries, got {data.shape}"
            )
        object.__setattr__(self, "data", data)

    @classmethod
    def from_dense(cls, a: np.ndarray) -> "SymMatrix":
        a = check_symmetric(a)
        return cls(a.shape[0], vech(a))

    def dense(self) -> np.ndarray:
        return unvech(self.data)
