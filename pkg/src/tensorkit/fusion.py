"""Joint factorisation of coupled data: CMTF and PARAFAC2."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import Tensor, _khatri_rao, _unfold
from .decompositions import ALS_RCOND, _converged, cpd_als, cpd_init
from .exceptions import ArgumentError, DimensionError
from .forms import TensorCPD, normalise_factors
from .numlin import pinv, svd
from .validation import FitOptions, check_rank, check_tensor

logger = logging.getLogger(__name__)

# budget of the CP-ALS that initialises PARAFAC2; independent of opts.max_iter
INIT_MAX_ITER = 1000
INIT_TOL = 1e-12


@dataclass(frozen=True)
class CoupledData:
    """Order-3 tensor plus a side matrix sharing mode 0 (rows) with it."""

    tensor: Tensor
    side_matrix: np.ndarray
    coupled_mode: int = 0

    def __post_init__(self):
        t = check_tensor(self.tensor)
        if t.order != 3:
            raise DimensionError(f"CMTF expects an order-3 tensor, got order {t.order}")
        if self.coupled_mode != 0:
            raise ArgumentError("only coupling on mode 0 is supported")
        y = np.array(self.side_matrix, dtype=np.float64)
        if y.ndim == 1 and y.size == 0:
            y = y.reshape(t.shape[0], 0)
        if y.ndim != 2:
            raise DimensionError(f"side matrix must be 2-D, got {y.ndim}-D")
        if y.shape[0] != t.shape[0]:
            raise DimensionError(
                f"side matrix has {y.shape[0]} rows, tensor mode 0 has {t.shape[0]}"
            )
        y.flags.writeable = False
        object.__setattr__(self, "tensor", t)
        object.__setattr__(self, "side_matrix", y)


@dataclass(frozen=True)
class Parafac2Data:
    """Matrix slices ``X_k`` of shape ``(J_k, I)``; ``J_k`` may vary."""

    slices: tuple

    def __post_init__(self):
        mats = []
        for k, s in enumerate(self.slices):
            m = np.array(s.data if isinstance(s, Tensor) else s, dtype=np.float64)
            if m.ndim != 2:
                raise DimensionError(f"slice {k} must be a matrix, got {m.ndim}-D")
            m.flags.writeable = False
            mats.append(m)
        if not mats:
            raise DimensionError("need at least one slice")
        cols = mats[0].shape[1]
        for k, m in enumerate(mats):
            if m.shape[1] != cols:
                raise DimensionError(f"slice {k} has {m.shape[1]} columns, expected {cols}")
        object.__setattr__(self, "slices", tuple(mats))


@dataclass
class CmtfResult:
    """Tensor CPD plus side factor ``V``; the side matrix is ``cpd.factors[0] @ V.T``."""

    cpd: TensorCPD
    side_factor: np.ndarray
    iterations: int
    error_trace: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def rel_error(self) -> float:
        return self.error_trace[-1]


@dataclass
class Parafac2Result:
    u: list[np.ndarray]
    s: np.ndarray
    v: np.ndarray
    iterations: int
    error_trace: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def rel_error(self) -> float:
        return self.error_trace[-1]

    def reconstruct(self) -> list[np.ndarray]:
        return [(u * s) @ self.v.T for u, s in zip(self.u, self.s)]


# ----------------------------------------------------------------------
# CMTF


def _cmtf_error(x, y, factors, v, denom) -> float:
    rec = TensorCPD(factors).full()
    resid = np.sum((x - rec) ** 2) + np.sum((y - factors[0] @ v.T) ** 2)
    return float(np.sqrt(resid) / denom) if denom > 0 else float(np.sqrt(resid))


def _cmtf_start(x, y, rank, opts) -> list[np.ndarray]:
    # warm start from a CP-ALS fit of the tensor alone; the stacked-SVD start
    # lands on coupled saddle points for a few percent of random problems
    cp = cpd_als(x, rank, FitOptions(opts.max_iter, opts.tol, opts.seed)).form
    if np.all(cp.weights != 0):
        return [cp.factors[0] * cp.weights, np.array(cp.factors[1]), np.array(cp.factors[2])]
    factors = cpd_init(x, rank, np.random.default_rng(opts.seed))
    u = svd(np.hstack([_unfold(x, 0), y])).u[:, :rank]
    if u.shape[1] == rank:
        factors[0] = u
    return factors


def cmtf(d: CoupledData, rank: int, opts: FitOptions | None = None, init=None) -> CmtfResult:
    """Coupled matrix-tensor factorisation by ALS.

    Minimises ``||X - [[A, B, C]]||^2 + ||Y - A V^T||^2`` with equal weights.
    ``A`` solves the stacked system of both terms; ``B``, ``C`` and ``V``
    are ordinary least-squares updates.  The error trace holds the combined
    relative error ``sqrt(total residual) / sqrt(||X||^2 + ||Y||^2)``.

    ``init`` optionally gives starting ``[A, B, C]``; by default they come
    from a CP-ALS fit of ``X`` alone.  ``V`` starts at its least-squares fit
    to ``A``.
    """
    opts = opts or FitOptions()
    if not isinstance(d, CoupledData):
        raise ArgumentError("cmtf expects CoupledData")
    rank = check_rank(rank)
    x, y = d.tensor.data, d.side_matrix
    if init is None:
        factors = _cmtf_start(x, y, rank, opts)
    else:
        factors = [np.array(f, dtype=np.float64) for f in init]
    a = factors[0]
    v = y.T @ a @ pinv(a.T @ a, ALS_RCOND)

    denom = np.sqrt(np.sum(x ** 2) + np.sum(y ** 2))
    trace: list[float] = []
    converged = False
    for it in range(opts.max_iter):
        a, b, c = factors
        gram = (c.T @ c) * (b.T @ b) + v.T @ v
        factors[0] = (_unfold(x, 0) @ _khatri_rao([c, b]) + y @ v) @ pinv(gram, ALS_RCOND)
        a = factors[0]
        factors[1] = _unfold(x, 1) @ _khatri_rao([c, a]) @ pinv((c.T @ c) * (a.T @ a), ALS_RCOND)
        b = factors[1]
        factors[2] = _unfold(x, 2) @ _khatri_rao([b, a]) @ pinv((b.T @ b) * (a.T @ a), ALS_RCOND)
        v = y.T @ a @ pinv(a.T @ a, ALS_RCOND)
        trace.append(_cmtf_error(x, y, factors, v, denom))
        if opts.verbose:
            logger.info("cmtf iter %d rel_error %.3e", it + 1, trace[-1])
        if _converged(trace, opts.tol):
            converged = True
            break

    # column scale of A is shared with V; normalise the CPD and rescale V to match
    norms_a = np.linalg.norm(factors[0], axis=0)
    normed, weights = normalise_factors(factors)
    safe = np.where(norms_a > 0, norms_a, 1.0)
    signs_a = np.sign(np.sum(normed[0] * factors[0], axis=0))
    signs_a[signs_a == 0] = 1.0
    v = v * (safe * signs_a)
    cpd = TensorCPD(normed, weights, d.tensor.modes)
    return CmtfResult(cpd, v, len(trace), trace, converged)


# ----------------------------------------------------------------------
# PARAFAC2


def _procrustes(xk, v, sk, h) -> np.ndarray:
    # P_k maximising tr(P_k^T X_k V diag(s_k) H^T) with orthonormal columns
    u, _, vt = svd(xk @ (v * sk) @ h.T)
    return u @ vt


def _parafac2_loss(slices, p, h, s, v) -> float:
    return float(sum(np.sum((xk - pk @ (h * sk) @ v.T) ** 2)
                     for xk, pk, sk in zip(slices, p, s)))


def parafac2(d: Parafac2Data, rank: int, opts: FitOptions | None = None) -> Parafac2Result:
    """PARAFAC2 by direct fitting.

    Model: ``X_k ~ U_k diag(S[k]) V^T`` with ``U_k = P_k H`` and ``P_k`` having
    orthonormal columns, so ``U_k^T U_k = H^T H`` for every ``k``.  Each
    iteration solves an orthogonal Procrustes problem per slice for ``P_k``
    and then performs one CP-ALS sweep on the projected slices
    ``P_k^T X_k`` to update ``H``, ``V`` and ``S``.  The error trace is the
    relative residual ``sqrt(sum_k ||X_k - model_k||^2 / sum_k ||X_k||^2)``.
    """
    opts = opts or FitOptions()
    if not isinstance(d, Parafac2Data):
        d = Parafac2Data(tuple(d))
    rank = check_rank(rank)
    slices = d.slices
    n_cols = slices[0].shape[1]
    if rank > min(n_cols, min(xk.shape[0] for xk in slices)):
        raise ArgumentError(
            f"rank {rank} exceeds min(I, min J_k) = {min(n_cols, min(x.shape[0] for x in slices))}"
        )

    # start: CP of the stacked cross-products X_k^T X_k ~ V diag(s_k) H^T H diag(s_k) V^T
    cross = np.stack([xk.T @ xk for xk in slices], axis=-1)
    start = cpd_als(cross, rank, FitOptions(max_iter=INIT_MAX_ITER, tol=INIT_TOL, seed=opts.seed))
    v = start.form.factors[0].copy()
    s = np.sqrt(np.abs(start.form.factors[2] * start.form.weights))
    h = np.eye(rank)

    total = sum(np.sum(xk ** 2) for xk in slices)
    denom = np.sqrt(total) if total > 0 else 1.0
    trace: list[float] = []
    converged = False
    for it in range(opts.max_iter):
        p = [_procrustes(xk, v, sk, h) for xk, sk in zip(slices, s)]
        # projected tensor Y[:, :, k] = P_k^T X_k, shape (R, I, K)
        y = np.stack([pk.T @ xk for pk, xk in zip(p, slices)], axis=-1)
        factors = [h, v, s]
        for n in range(3):
            others = [factors[m] for m in reversed(range(3)) if m != n]
            gram = np.ones((rank, rank))
            for f in others:
                gram = gram * (f.T @ f)
            factors[n] = _unfold(y, n) @ _khatri_rao(others) @ pinv(gram, ALS_RCOND)
        h, v, s = factors
        trace.append(np.sqrt(_parafac2_loss(slices, p, h, s, v)) / denom)
        if opts.verbose:
            logger.info("parafac2 iter %d rel_error %.3e", it + 1, trace[-1])
        if _converged(trace, opts.tol):
            converged = True
            break

    # unit-norm columns of V, scale into S
    norms = np.linalg.norm(v, axis=0)
    norms[norms == 0] = 1.0
    v = v / norms
    s = s * norms
    u = [pk @ h for pk in p]
    return Parafac2Result(u, s, v, len(trace), trace, converged)


# ----------------------------------------------------------------------
# estimators


class CMTF(BaseEstimator):
    """Coupled matrix-tensor factorisation; ``fit(X, Y)`` with ``Y`` sharing mode 0 of ``X``."""

    def __init__(self, rank=1, max_iter=50, tol=1e-8, random_state=0, verbose=False):
        self.rank = rank
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state
        self.verbose = verbose

    def fit(self, X, Y):
        t = check_tensor(X)
        result = cmtf(CoupledData(t, Y), self.rank,
                      FitOptions(self.max_iter, self.tol, self.random_state, self.verbose))
        self.result_ = result
        self.form_ = result.cpd
        self.side_factor_ = result.side_factor
        self.error_trace_ = result.error_trace
        self.n_iter_ = result.iterations
        self.rel_error_ = result.rel_error
        return self

    def inverse_transform(self):
        check_is_fitted(self, "form_")
        return self.form_.reconstruct(), self.form_.factors[0] @ self.side_factor_.T


class PARAFAC2(BaseEstimator):
    """PARAFAC2 on a list of matrices sharing their column dimension."""

    def __init__(self, rank=1, max_iter=50, tol=1e-8, random_state=0, verbose=False):
        self.rank = rank
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state
        self.verbose = verbose

    def fit(self, slices: Sequence, y=None):
        result = parafac2(Parafac2Data(tuple(slices)), self.rank,
                          FitOptions(self.max_iter, self.tol, self.random_state, self.verbose))
        self.result_ = result
        self.u_, self.s_, self.v_ = result.u, result.s, result.v
        self.error_trace_ = result.error_trace
        self.n_iter_ = result.iterations
        self.rel_error_ = result.rel_error
        return self

    def inverse_transform(self):
        check_is_fitted(self, "result_")
        return self.result_.reconstruct()
