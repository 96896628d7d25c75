"""Tensor-valued Gaussian models with Kronecker-separable covariance.

A :class:`TensorNormal` with mean ``M`` and per-mode covariance factors
``Sigma_1 .. Sigma_N`` describes ``X = M + Z x_1 L_1 ... x_N L_N`` where ``Z``
is i.i.d. standard normal and ``L_n`` is the Cholesky factor of ``Sigma_n``.
With row-major vectorisation the implied covariance of ``vec(X)`` is
``Sigma_1 kron Sigma_2 kron ... kron Sigma_N``.  Nothing here ever forms
that ``P x P`` matrix.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import Tensor, _fold, _mode_dot, _unfold
from .exceptions import ArgumentError, DataError, DimensionError, NumericError
from .numlin import chol_solve, cholesky
from .validation import FitOptions, check_samples, check_tensor, stack

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


class TensorNormal:
    """Mean tensor plus symmetric positive-definite covariance factors, one per mode."""

    def __init__(self, mean, factors: Sequence):
        mean = check_tensor(mean, name="mean")
        if len(factors) != mean.order:
            raise DimensionError(f"need {mean.order} covariance factors, got {len(factors)}")
        mats, chols = [], []
        for n, f in enumerate(factors):
            s = np.array(f, dtype=np.float64)
            if s.shape != (mean.shape[n], mean.shape[n]):
                raise DimensionError(
                    f"factor {n} has shape {s.shape}, expected {(mean.shape[n],) * 2}"
                )
            if not np.allclose(s, s.T, rtol=0, atol=1e-12 * max(1.0, np.abs(s).max())):
                raise NumericError(f"factor {n} is not symmetric")
            try:
                chols.append(cholesky(s))
            except NumericError as exc:
                raise NumericError(f"factor {n}: {exc}") from exc
            s.flags.writeable = False
            mats.append(s)
        self.mean = mean
        self.factors = tuple(mats)
        self._chol = tuple(chols)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mean.shape

    @property
    def order(self) -> int:
        return self.mean.order

    def dense_covariance(self) -> np.ndarray:
        """Full covariance of the row-major ``vec(X)``; for checks on small models."""
        out = np.ones((1, 1))
        for s in self.factors:
            out = np.kron(out, s)
        return out

    def logdet(self) -> float:
        p = self.mean.size
        return sum((p / n_i) * 2.0 * float(np.sum(np.log(np.diag(low))))
                   for n_i, low in zip(self.shape, self._chol))

    def __repr__(self):
        return f"TensorNormal(shape={self.shape})"


@dataclass(frozen=True)
class DofCount:
    eta_tensor: int
    eta_multi: int
    ratio: float


def _whiten(d: np.ndarray, chols, skip: int | None = None) -> np.ndarray:
    """``d x_n L_n^{-1}`` for every mode except ``skip`` (stacked-sample axis 0 untouched)."""
    for n, low in enumerate(chols):
        if n == skip:
            continue
        axis = n + 1
        moved = np.moveaxis(d, axis, 0)
        solved = solve_triangular(low, moved.reshape(moved.shape[0], -1), lower=True)
        d = np.moveaxis(solved.reshape(moved.shape), 0, axis)
    return d


def _mahalanobis(m: TensorNormal, d: np.ndarray) -> float:
    # <D, D x_1 S_1^{-1} ... x_N S_N^{-1}> through per-factor Cholesky solves
    y = d
    for n, s in enumerate(m.factors):
        y = _fold(chol_solve(s, _unfold(y, n)), n, y.shape)
    return float(np.dot(d.ravel(), y.ravel()))


def logpdf(m: TensorNormal, x) -> float:
    """Log-density of ``x``.

    ``log det`` of the Kronecker covariance is ``sum_n (P / I_n) log det Sigma_n``.
    """
    t = check_tensor(x)
    if t.shape != m.shape:
        raise DimensionError(f"sample shape {t.shape} does not match model shape {m.shape}")
    d = t.data - m.mean.data
    p = m.mean.size
    return -0.5 * (p * LOG_2PI + m.logdet() + _mahalanobis(m, d))


def sample(m: TensorNormal, count: int, seed: int) -> list[Tensor]:
    if isinstance(count, bool) or not isinstance(count, (int, np.integer)) or count < 1:
        raise ArgumentError(f"count must be an integer >= 1, got {count!r}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((int(count), *m.shape))
    for n, low in enumerate(m._chol):
        z = _mode_dot(z, low, n + 1)
    z = z + m.mean.data
    return [Tensor(zk, m.mean.modes) for zk in z]


def _normalise_scale(factors: list[np.ndarray]) -> list[np.ndarray]:
    # every factor but the last gets trace / I_n = 1; the scale moves to the last
    out = [f.copy() for f in factors]
    for n in range(len(out) - 1):
        alpha = np.trace(out[n]) / out[n].shape[0]
        out[n] /= alpha
        out[-1] *= alpha
    return out


def _loglik(data_c: np.ndarray, factors, chols) -> float:
    k = data_c.shape[0]
    p = int(np.prod(data_c.shape[1:]))
    logdet = sum((p / f.shape[0]) * 2.0 * np.sum(np.log(np.diag(low)))
                 for f, low in zip(factors, chols))
    w = _whiten(data_c, chols)
    return float(-0.5 * (k * p * LOG_2PI + k * logdet + np.sum(w ** 2)))


@dataclass
class FlipFlopResult:
    model: TensorNormal
    loglik_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def flip_flop(samples, opts: FitOptions | None = None, ridge: float = 0.0) -> FlipFlopResult:
    """Maximum-likelihood fit of a Kronecker-separable normal by the flip-flop algorithm.

    Each sweep updates ``Sigma_n`` in turn as the scatter of the mode-n
    unfoldings of the centred samples after whitening by every other factor,
    divided by ``K * P / I_n``.  Every update is the exact conditional
    maximiser, so the log-likelihood never decreases.  ``ridge`` adds
    ``ridge * I`` to each update.  Stops when the largest relative change of
    a (scale-normalised) factor drops below ``opts.tol``.
    """
    opts = opts or FitOptions()
    samples = check_samples(samples)
    if len(samples) < 2:
        raise DataError("fitting needs at least two samples")
    if ridge < 0:
        raise ArgumentError(f"ridge must be >= 0, got {ridge}")
    data = stack(samples)
    k = data.shape[0]
    shape = data.shape[1:]
    p = int(np.prod(shape))
    for n, i_n in enumerate(shape):
        if k * p / i_n <= i_n:
            warnings.warn(
                f"K*P/I_n = {k * p / i_n:g} <= I_n = {i_n} for mode {n}; "
                "the covariance factor may be singular (consider ridge > 0)",
                stacklevel=2,
            )
    mean = data.mean(axis=0)
    centred = data - mean
    factors = [np.eye(i) for i in shape]
    chols = [np.eye(i) for i in shape]
    trace: list[float] = []
    converged = False
    for it in range(opts.max_iter):
        before = [f.copy() for f in factors]
        for n, i_n in enumerate(shape):
            w = _whiten(centred, chols, skip=n)
            wn = np.moveaxis(w, n + 1, 1).reshape(k, i_n, -1)
            scatter = np.einsum("kia,kja->ij", wn, wn) / (k * p / i_n)
            scatter = 0.5 * (scatter + scatter.T) + ridge * np.eye(i_n)
            try:
                chols[n] = cholesky(scatter)
            except NumericError as exc:
                raise NumericError(
                    f"singular covariance update for mode {n} ({exc}); "
                    "use more samples or a ridge > 0"
                ) from exc
            factors[n] = scatter
        factors = _normalise_scale(factors)
        chols = [cholesky(f) for f in factors]
        trace.append(_loglik(centred, factors, chols))
        change = max(np.linalg.norm(f - f0) / np.linalg.norm(f0) for f, f0 in zip(factors, before))
        if opts.verbose:
            logger.info("flip-flop iter %d loglik %.6f change %.2e", it + 1, trace[-1], change)
        if change < opts.tol:
            converged = True
            break
    model = TensorNormal(Tensor(mean, samples[0].modes), factors)
    return FlipFlopResult(model, trace, len(trace), converged)


def fit(samples, opts: FitOptions | None = None, ridge: float = 0.0) -> TensorNormal:
    """Fit a :class:`TensorNormal` to samples (see :func:`flip_flop`)."""
    return flip_flop(samples, opts, ridge).model


def dof_ratio(shape: Sequence[int]) -> DofCount:
    """Distinct-parameter counts of the separable model versus an unstructured Gaussian."""
    shape = list(shape)
    if not shape:
        raise ArgumentError("shape must be non-empty")
    if any(int(i) < 1 for i in shape):
        raise ArgumentError(f"shape entries must be >= 1, got {shape}")
    p = math.prod(int(i) for i in shape)
    eta_tensor = p + sum(int(i) * (int(i) + 1) // 2 for i in shape)
    eta_multi = p + p * (p + 1) // 2
    return DofCount(eta_tensor, eta_multi, eta_tensor / eta_multi)


def classify_conditional(models, priors: Sequence[float], x):
    """Label maximising ``logpdf + log prior``; ties go to the smallest label."""
    models = list(models)
    priors = np.asarray(priors, dtype=np.float64)
    if len(models) < 2:
        raise ArgumentError("need at least two class models")
    if priors.shape != (len(models),):
        raise ArgumentError(f"need {len(models)} priors, got {priors.size}")
    if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-9:
        raise ArgumentError(f"priors must be non-negative and sum to 1, got sum {priors.sum()}")
    t = check_tensor(x)
    best = None
    for (label, model), prior in zip(models, priors):
        score = logpdf(model, t) + (math.log(prior) if prior > 0 else -math.inf)
        key = (-score, str(label))
        if best is None or key < best[0]:
            best = (key, label)
    return best[1]


class TensorGaussian(BaseEstimator):
    """Estimator wrapper around :func:`flip_flop`.

    ``fit`` takes ``(n_samples, I_1, ..., I_N)`` data or a list of tensors;
    ``score_samples`` returns per-sample log-densities.
    """

    def __init__(self, max_iter=50, tol=1e-8, ridge=0.0, verbose=False):
        self.max_iter = max_iter
        self.tol = tol
        self.ridge = ridge
        self.verbose = verbose

    def fit(self, X, y=None):
        res = flip_flop(X, FitOptions(self.max_iter, self.tol, 0, self.verbose), self.ridge)
        self.model_ = res.model
        self.loglik_trace_ = res.loglik_trace
        self.n_iter_ = res.iterations
        self.converged_ = res.converged
        return self

    def score_samples(self, X):
        check_is_fitted(self, "model_")
        return np.array([logpdf(self.model_, s) for s in check_samples(X, name="X")])

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=0):
        check_is_fitted(self, "model_")
        return np.stack([t.data for t in sample(self.model_, n_samples, random_state)])
