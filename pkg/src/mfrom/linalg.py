"""Dense real-matrix kernels: SVD, column-pivoted QR, least squares, pseudoinverse.

All routines work in float64 and never mutate their arguments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

class ConvergenceError(RuntimeError):
    """Raised when an iterative kernel exhausts its iteration cap."""


def as_matrix(a, name: str = "a") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array, raising ``ValueError`` otherwise."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def default_rcond(shape) -> float:
    return 1e-12 * max(shape)


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``a = left_vectors @ diag(singular_values) @ right_vectors_t``."""

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors_t: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors_t


def svd(a) -> SvdResult:
    """Thin singular value decomposition.

    Backed by LAPACK ``gesdd`` with a fallback to ``gesvd``; both are
    deterministic for a given input. Singular values come out nonincreasing.

    Raises
    ------
    ConvergenceError
        If neither driver converges.
    """
    a = as_matrix(a)
    try:
        u, s, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        try:
            u, s, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(
                "SVD did not converge: gesdd and gesvd both hit their iteration caps"
            ) from exc
    return SvdResult(u, s, vt)


def pivoted_qr(a):
    """Householder QR with column pivoting, ``a[:, pivots] = q @ r``.

    Returns
    -------
    q : (m, k) orthonormal columns, k = min(m, n)
    r : (k, n) upper triangular, ``|r[i, i]|`` nonincreasing
    pivots : (n,) column permutation
    """
    a = as_matrix(a)
    q, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True)
    return q, r, piv.astype(np.intp)


def lstsq(a, b, rcond: float | None = None) -> np.ndarray:
    """Minimum-norm least-squares solution of ``a @ x ~= b``.

    Singular values below ``rcond * sigma_max`` are treated as zero, so
    rank-deficient and underdetermined systems return the minimum-norm
    minimizer. ``b`` may be a vector or a matrix of right-hand sides.
    """
    a = as_matrix(a)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"dimension mismatch: a has {a.shape[0]} rows, b has {b.shape[0]}")
    return pinv(a, rcond) @ b


def pinv(a, rcond: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse via the SVD with a relative cutoff."""
    a = as_matrix(a)
    if rcond is None:
        rcond = default_rcond(a.shape)
    res = svd(a)
    s = res.singular_values
    cutoff = rcond * (s[0] if s.size else 0.0)
    inv = np.zeros_like(s)
    keep = s > cutoff
    inv[keep] = 1.0 / s[keep]
    return (res.right_vectors_t.T * inv) @ res.left_vectors.T


def condition_number(a) -> float:
    """``sigma_max / sigma_min`` of ``a`` (``inf`` when rank deficient)."""
    s = svd(a).singular_values
    k = min(np.shape(a))
    if s.size < k or s[-1] <= default_rcond(np.shape(a)) * s[0] or s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])
