"""Tensor factorisations: CP-ALS, randomised CP, HOSVD, HOOI and TT-SVD.

Each algorithm is available as a function returning a
:class:`DecompositionResult` and as a scikit-learn style estimator
(:class:`CPD`, :class:`RandomizedCPD`, :class:`HOSVD`, :class:`HOOI`,
:class:`TTSVD`) whose ``fit`` stores the fitted form in ``form_``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import _khatri_rao, _mode_dot, _multi_mode_dot, _unfold
from .exceptions import ArgumentError
from .forms import TensorCPD, TensorTKD, TensorTT, normalise_factors, rel_error
from .numlin import pinv, qr, svd
from .validation import FitOptions, check_rank, check_ranks, check_tensor

logger = logging.getLogger(__name__)

ALS_RCOND = 1e-12


@dataclass
class DecompositionResult:
    form: Union[TensorCPD, TensorTKD, TensorTT]
    iterations: int
    error_trace: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def rel_error(self) -> float:
        return self.error_trace[-1]


# ----------------------------------------------------------------------
# helpers


def _leading_left(m: np.ndarray, k: int) -> np.ndarray:
    """``k`` leading left singular vectors, completed to an orthonormal set if needed."""
    u = svd(m).u[:, :k]
    if u.shape[1] < k:
        q, _ = qr(np.hstack([u, np.eye(m.shape[0])]))
        u = np.hstack([u, q[:, u.shape[1]:k]])
    return u


def cpd_init(x: np.ndarray, rank: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Leading left singular vectors of each unfolding, padded with Gaussian columns."""
    factors = []
    for n in range(x.ndim):
        u = svd(_unfold(x, n)).u[:, :rank]
        if u.shape[1] < rank:
            u = np.hstack([u, rng.standard_normal((x.shape[n], rank - u.shape[1]))])
        factors.append(u)
    return factors


def _gram_hadamard(factors, skip: int) -> np.ndarray:
    rank = factors[0].shape[1]
    gram = np.ones((rank, rank))
    for m, f in enumerate(factors):
        if m != skip:
            gram = gram * (f.T @ f)
    return gram


def _kr_others(factors, skip: int) -> np.ndarray:
    # reversed so that the earliest remaining mode varies fastest, matching _unfold
    return _khatri_rao([factors[m] for m in reversed(range(len(factors))) if m != skip])


def als_update(x: np.ndarray, factors, n: int) -> np.ndarray:
    """Exact least-squares update of factor ``n`` with the others fixed."""
    mttkrp = _unfold(x, n) @ _kr_others(factors, n)
    return mttkrp @ pinv(_gram_hadamard(factors, n), ALS_RCOND)


def _sampled_update(x, factors, n, sample_size, rng) -> np.ndarray:
    dims = [x.shape[m] for m in reversed(range(x.ndim)) if m != n]
    rows = int(np.prod(dims))
    if sample_size >= rows:
        return als_update(x, factors, n)
    picks = rng.integers(0, rows, size=sample_size)
    sub = np.unravel_index(picks, dims)
    others = [m for m in reversed(range(x.ndim)) if m != n]
    kr = np.ones((sample_size, factors[0].shape[1]))
    for idx, m in zip(sub, others):
        kr = kr * factors[m][idx]
    xs = _unfold(x, n)[:, picks]
    return xs @ pinv(kr, ALS_RCOND).T


def _cpd_error(x, factors) -> float:
    return rel_error(x, TensorCPD(factors).full())


def _finish_cpd(factors, modes) -> TensorCPD:
    factors, weights = normalise_factors(factors)
    return TensorCPD(factors, weights, modes)


def _converged(trace, tol) -> bool:
    return len(trace) >= 2 and abs(trace[-2] - trace[-1]) < tol


# ----------------------------------------------------------------------
# CP


def cpd_als(x, rank: int, opts: FitOptions | None = None, init=None) -> DecompositionResult:
    """Canonical polyadic decomposition by alternating least squares.

    Each sweep solves, for every mode ``n``,
    ``A_n = X_(n) (khatri-rao of the other factors) pinv(hadamard of their Grams)``.
    Iteration stops once the relative error changes by less than ``opts.tol``.

    Parameters
    ----------
    x : Tensor or array_like
        Data of order >= 2.
    rank : int
    opts : FitOptions, optional
    init : list of ndarray, optional
        Starting factors; defaults to :func:`cpd_init`.
    """
    opts = opts or FitOptions()
    t = check_tensor(x, min_order=2)
    rank = check_rank(rank)
    data = t.data
    rng = np.random.default_rng(opts.seed)
    factors = [np.array(f, dtype=np.float64) for f in init] if init is not None else cpd_init(data, rank, rng)

    trace: list[float] = []
    converged = False
    for it in range(opts.max_iter):
        for n in range(data.ndim):
            factors[n] = als_update(data, factors, n)
        trace.append(_cpd_error(data, factors))
        if opts.verbose:
            logger.info("cpd_als iter %d rel_error %.3e", it + 1, trace[-1])
        if _converged(trace, opts.tol):
            converged = True
            break
    return DecompositionResult(_finish_cpd(factors, t.modes), len(trace), trace, converged)


def cpd_randomized(x, rank: int, sample_size: int, opts: FitOptions | None = None,
                   init=None) -> DecompositionResult:
    """CP-ALS where each mode update solves a row-sampled least-squares problem.

    Rows of the Khatri-Rao system are drawn uniformly with replacement.
    When ``sample_size`` is at least the number of rows of a mode's system
    the full system is solved instead, so the iterates coincide with
    :func:`cpd_als`.  The error trace is always measured on the full tensor.
    """
    opts = opts or FitOptions()
    t = check_tensor(x, min_order=2)
    rank = check_rank(rank)
    if isinstance(sample_size, bool) or not isinstance(sample_size, (int, np.integer)):
        raise ArgumentError(f"sample_size must be an integer, got {sample_size!r}")
    if sample_size < rank:
        raise ArgumentError(f"sample_size ({sample_size}) must be >= rank ({rank})")
    data = t.data
    rng = np.random.default_rng(opts.seed)
    factors = [np.array(f, dtype=np.float64) for f in init] if init is not None else cpd_init(data, rank, rng)

    trace: list[float] = []
    converged = False
    for it in range(opts.max_iter):
        for n in range(data.ndim):
            factors[n] = _sampled_update(data, factors, n, int(sample_size), rng)
        trace.append(_cpd_error(data, factors))
        if opts.verbose:
            logger.info("cpd_randomized iter %d rel_error %.3e", it + 1, trace[-1])
        if _converged(trace, opts.tol):
            converged = True
            break
    return DecompositionResult(_finish_cpd(factors, t.modes), len(trace), trace, converged)


# ----------------------------------------------------------------------
# Tucker


def hosvd(x, ranks) -> DecompositionResult:
    """Truncated higher-order SVD."""
    t = check_tensor(x)
    ranks = check_ranks(ranks, t.shape)
    factors = [_leading_left(_unfold(t.data, n), r) for n, r in enumerate(ranks)]
    core = _multi_mode_dot(t.data, factors, transpose=True)
    form = TensorTKD(core, factors, t.modes)
    return DecompositionResult(form, 1, [rel_error(t, form)], True)


def hooi(x, ranks, opts: FitOptions | None = None) -> DecompositionResult:
    """Higher-order orthogonal iteration, started from :func:`hosvd`.

    Sweep update: ``A_n`` = leading left singular vectors of the mode-n
    unfolding of ``X`` projected on every other factor.
    """
    opts = opts or FitOptions()
    t = check_tensor(x)
    ranks = check_ranks(ranks, t.shape)
    start = hosvd(t, ranks)
    factors = list(start.form.factors)
    data = t.data

    trace: list[float] = []
    prev = start.rel_error
    converged = False
    core = start.form.core
    for it in range(opts.max_iter):
        for n in range(data.ndim):
            y = _multi_mode_dot(data, factors, skip=n, transpose=True)
            factors[n] = _leading_left(_unfold(y, n), ranks[n])
        core = _mode_dot(y, factors[-1].T, data.ndim - 1)
        err = rel_error(data, _multi_mode_dot(core, factors))
        trace.append(err)
        if opts.verbose:
            logger.info("hooi iter %d rel_error %.3e", it + 1, err)
        if abs(prev - err) < opts.tol:
            converged = True
            break
        prev = err
    return DecompositionResult(TensorTKD(core, factors, t.modes), len(trace), trace, converged)


# ----------------------------------------------------------------------
# Tensor train


def _truncation_rank(s: np.ndarray, delta: float) -> int:
    # smallest r >= 1 whose discarded tail energy is <= delta**2
    tail = np.concatenate([np.cumsum((s ** 2)[::-1])[::-1], [0.0]])
    ok = np.nonzero(tail <= delta ** 2)[0]
    return max(1, int(ok[0]))


def tt_svd(x, eps: float | None = None, ranks: Sequence[int] | None = None) -> DecompositionResult:
    """Tensor-train decomposition by sequential truncated SVDs.

    Give either ``eps`` (relative accuracy; each of the ``N-1`` truncations
    may discard at most ``eps / sqrt(N-1) * ||X||_F``, so the overall
    relative error is ``<= eps``) or an explicit list of ``N-1`` bond ranks.
    A bond rank larger than what the unfolding supports is clipped.
    """
    t = check_tensor(x)
    if (eps is None) == (ranks is None):
        raise ArgumentError("give exactly one of eps or ranks")
    data = t.data
    order = data.ndim
    if eps is not None:
        if not eps > 0:
            raise ArgumentError(f"eps must be > 0, got {eps}")
        delta = eps / np.sqrt(max(order - 1, 1)) * np.linalg.norm(data.ravel())
    else:
        ranks = list(ranks)
        if len(ranks) != order - 1:
            raise ArgumentError(f"need {order - 1} bond ranks, got {len(ranks)}")
        for n, r in enumerate(ranks):
            check_rank(r, f"ranks[{n}]")

    cores = []
    rest = data.reshape(1, -1)
    r_prev = 1
    for n in range(order - 1):
        mat = rest.reshape(r_prev * data.shape[n], -1)
        u, s, vt = svd(mat)
        r = _truncation_rank(s, delta) if eps is not None else min(int(ranks[n]), s.size)
        cores.append(u[:, :r].reshape(r_prev, data.shape[n], r))
        rest = s[:r, None] * vt[:r]
        r_prev = r
    cores.append(rest.reshape(r_prev, data.shape[-1], 1))
    form = TensorTT(cores, t.modes)
    return DecompositionResult(form, 1, [rel_error(t, form)], True)


# ----------------------------------------------------------------------
# estimators


class _Decomposition(TransformerMixin, BaseEstimator):
    def _decompose(self, X) -> DecompositionResult:
        raise NotImplementedError

    def _options(self) -> FitOptions:
        return FitOptions(self.max_iter, self.tol, self.random_state, self.verbose)

    def fit(self, X, y=None):
        result = self._decompose(X)
        self.result_ = result
        self.form_ = result.form
        self.error_trace_ = list(result.error_trace)
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        self.rel_error_ = result.rel_error
        return self

    def transform(self, X):
        """Decompose ``X`` with the fitted hyper-parameters; returns the form."""
        check_is_fitted(self, "form_")
        return self._decompose(X).form

    def fit_transform(self, X, y=None):
        return self.fit(X).form_

    def inverse_transform(self, form=None):
        """Dense reconstruction of ``form`` (default: the fitted one)."""
        if form is None:
            check_is_fitted(self, "form_")
            form = self.form_
        return form.reconstruct()


class CPD(_Decomposition):
    """CP decomposition by ALS.

    Examples
    --------
    >>> import numpy as np
    >>> x = np.einsum("i,j,k->ijk", [1., 2.], [1., 1.], [1., -1.])
    >>> CPD(rank=1).fit(x).rel_error_ < 1e-10
    True
    """

    def __init__(self, rank=1, max_iter=50, tol=1e-8, random_state=0, verbose=False):
        self.rank = rank
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state
        self.verbose = verbose

    def _decompose(self, X):
        return cpd_als(X, self.rank, self._options())


class RandomizedCPD(_Decomposition):
    def __init__(self, rank=1, sample_size=None, max_iter=50, tol=1e-8, random_state=0,
                 verbose=False):
        self.rank = rank
        self.sample_size = sample_size
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state
        self.verbose = verbose

    def _decompose(self, X):
        size = self.sample_size if self.sample_size is not None else default_sample_size(self.rank)
        return cpd_randomized(X, self.rank, size, self._options())


def default_sample_size(rank: int) -> int:
    return 10 * int(rank)


class HOSVD(_Decomposition):
    def __init__(self, ranks=1):
        self.ranks = ranks

    def _decompose(self, X):
        return hosvd(X, self.ranks)


class HOOI(_Decomposition):
    def __init__(self, ranks=1, max_iter=50, tol=1e-8, random_state=0, verbose=False):
        self.ranks = ranks
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state
        self.verbose = verbose

    def _decompose(self, X):
        return hooi(X, self.ranks, self._options())


class TTSVD(_Decomposition):
    """TT-SVD with either a relative accuracy ``eps`` or fixed bond ``ranks``."""

    def __init__(self, eps=None, ranks=None):
        self.eps = eps
        self.ranks = ranks

    def _decompose(self, X):
        return tt_svd(X, eps=self.eps, ranks=self.ranks)
