"""Small dense linear-algebra layer on top of numpy/LAPACK.

The wrappers pin down conventions the algorithms and tests rely on:
singular vectors are sign-fixed so that the largest-magnitude entry of each
left singular vector is non-negative, and failures surface as
:class:`~tensorkit.exceptions.NumericError`.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .exceptions import ArgumentError, DimensionError, NumericError


class SvdResult(NamedTuple):
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


def _as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got {m.ndim}-D input")
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix contains non-finite entries")
    return m


def _fix_signs(u: np.ndarray, vt: np.ndarray):
    if u.size == 0:
        return u, vt
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, vt * signs[:, None]


def svd(m) -> SvdResult:
    """Thin SVD with ``min(rows, cols)`` singular triplets."""
    m = _as_matrix(m)
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc
    u, vt = _fix_signs(u, vt)
    return SvdResult(u, s, vt)


def svd_truncated(m, k: int) -> SvdResult:
    """Leading rank-``k`` part of :func:`svd`."""
    m = _as_matrix(m)
    if not 1 <= k <= min(m.shape):
        raise ArgumentError(f"k must be in [1, {min(m.shape)}], got {k}")
    u, s, vt = svd(m)
    return SvdResult(u[:, :k], s[:k], vt[:k])


def cholesky(a) -> np.ndarray:
    """Lower Cholesky factor; raises NumericError naming the failed pivot."""
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"Cholesky needs a square matrix, got {a.shape}")
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NumericError(
            f"matrix is not positive definite (Cholesky failed at pivot {info - 1})"
        )
    if info < 0:
        raise NumericError(f"invalid argument {-info} passed to dpotrf")
    return c


def chol_solve(a, b) -> np.ndarray:
    """Solve ``a x = b`` for symmetric positive-definite ``a``."""
    low = cholesky(a)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != low.shape[0]:
        raise DimensionError(f"rhs has {b.shape[0]} rows, expected {low.shape[0]}")
    y = solve_triangular(low, b, lower=True)
    return solve_triangular(low.T, y, lower=False)


def pinv(m, rcond: float = 1e-12) -> np.ndarray:
    """Moore-Penrose inverse; singular values below ``rcond * max(s)`` are dropped."""
    m = _as_matrix(m)
    if m.size == 0:
        return np.zeros(m.shape[::-1])
    u, s, vt = svd(m)
    cutoff = rcond * (s[0] if s.size else 0.0)
    inv = np.zeros_like(s)
    keep = s > cutoff
    inv[keep] = 1.0 / s[keep]
    return (vt.T * inv) @ u.T


def qr(m):
    """Reduced QR with a non-negative diagonal in ``r``."""
    m = _as_matrix(m)
    q, r = np.linalg.qr(m)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d, r * d[:, None]


def logdet_spd(a) -> float:
    low = cholesky(a)
    return 2.0 * float(np.sum(np.log(np.diag(low))))
