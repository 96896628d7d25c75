"""Tensor-native classifiers: the least-squares support tensor machine (LSSTM)
and tensor ensemble learning (TEL).

Labels are always ``-1`` / ``+1``.  ``sign(0)`` is taken as ``+1``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, solve
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.validation import check_is_fitted

from .core import Tensor
from .decompositions import cpd_als, hosvd
from .exceptions import (ArgumentError, DataError, DimensionError, NumericError,
                         TensorkitError, ValidationError)
from .validation import (FitOptions, check_binary_labels, check_rank, check_ranks,
                         check_samples, check_tensor, stack)

logger = logging.getLogger(__name__)


def _sign(v):
    return np.where(np.asarray(v) >= 0, 1, -1)


@dataclass(frozen=True)
class TensorDataset:
    samples: tuple
    labels: np.ndarray

    def __post_init__(self):
        samples = check_samples(self.samples)
        labels = check_binary_labels(self.labels, len(samples))
        object.__setattr__(self, "samples", tuple(samples))
        object.__setattr__(self, "labels", labels)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.samples[0].shape

    def __len__(self):
        return len(self.samples)


# ----------------------------------------------------------------------
# vector LS-SVM


def lssvm_solve(x: np.ndarray, y: np.ndarray, c: float, scale: float = 1.0):
    """Linear LS-SVM classifier via its KKT system.

    Minimises ``scale/2 ||w||^2 + c/2 sum_i e_i^2`` subject to
    ``y_i (w.x_i + b) = 1 - e_i``.  Returns ``(w, b)``.
    """
    n = x.shape[0]
    omega = np.outer(y, y) * (x @ x.T) / scale
    kkt = np.zeros((n + 1, n + 1))
    kkt[0, 1:] = y
    kkt[1:, 0] = y
    kkt[1:, 1:] = omega + np.eye(n) / c
    rhs = np.concatenate([[0.0], np.ones(n)])
    try:
        sol = solve(kkt, rhs, assume_a="sym")
    except LinAlgError as exc:
        raise NumericError(f"LS-SVM system is singular: {exc}") from exc
    b, alpha = sol[0], sol[1:]
    w = (alpha * y) @ x / scale
    return w, float(b)


class LSSVM(ClassifierMixin, BaseEstimator):
    """Linear least-squares SVM for vector data; the default TEL base learner."""

    def __init__(self, C=1.0):
        self.C = C

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionError(f"LSSVM expects a 2-D sample matrix, got {X.ndim}-D")
        if not self.C > 0:
            raise ArgumentError(f"C must be > 0, got {self.C}")
        y = check_binary_labels(y, X.shape[0])
        self.coef_, self.intercept_ = lssvm_solve(X, y, float(self.C))
        self.classes_ = np.array([-1, 1])
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        return np.asarray(X, dtype=np.float64) @ self.coef_ + self.intercept_

    def predict(self, X):
        return _sign(self.decision_function(X))


# ----------------------------------------------------------------------
# LSSTM


@dataclass(frozen=True)
class LsstmModel:
    """Rank-1 weight tensor ``w^(1) o ... o w^(N)`` plus bias."""

    mode_vectors: tuple
    bias: float
    c: float
    objective_trace: tuple = ()
    iterations: int = 0
    converged: bool = False

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(w) for w in self.mode_vectors)

    def weight_tensor(self) -> np.ndarray:
        out = np.ones(())
        for w in self.mode_vectors:
            out = np.multiply.outer(out, w)
        return out


def _contract_except(data: np.ndarray, vectors, skip: int) -> np.ndarray:
    """Contract stacked samples (K, I_1..I_N) with every mode vector but ``skip``."""
    out = data
    for m in reversed(range(len(vectors))):
        if m != skip:
            out = np.tensordot(out, vectors[m], axes=([m + 1], [0]))
    return out


def _lsstm_objective(data, y, vectors, b, c) -> float:
    scores = _contract_except(data, vectors, -1) + b
    reg = np.prod([w @ w for w in vectors])
    return float(0.5 * reg + 0.5 * c * np.sum((1.0 - y * scores) ** 2))


def lsstm_train(d: TensorDataset, c: float, opts: FitOptions | None = None) -> LsstmModel:
    """Fit an LSSTM by alternating LS-SVM solves over the modes.

    With every mode vector but ``w^(n)`` fixed, each sample collapses to a
    vector of length ``I_n``; ``w^(n)`` and the bias then solve an LS-SVM
    whose regulariser is scaled by ``prod_{m != n} ||w^(m)||^2``.  Each such
    step exactly minimises the objective in ``(w^(n), b)``, so the objective
    trace is non-increasing.
    """
    opts = opts or FitOptions()
    if not isinstance(d, TensorDataset):
        raise ArgumentError("lsstm_train expects a TensorDataset")
    if not c > 0:
        raise ArgumentError(f"c must be > 0, got {c}")
    data = stack(d.samples)
    y = d.labels
    vectors = [np.ones(i) / np.sqrt(i) for i in d.shape]
    b = 0.0
    trace: list[float] = []
    converged = False
    for it in range(opts.max_iter):
        before = [w.copy() for w in vectors]
        for n in range(len(vectors)):
            scale = float(np.prod([vectors[m] @ vectors[m] for m in range(len(vectors)) if m != n]))
            if scale == 0:
                raise NumericError(f"mode vector collapsed to zero while updating mode {n}")
            reduced = _contract_except(data, vectors, n)
            vectors[n], b = lssvm_solve(reduced, y, c, scale)
        trace.append(_lsstm_objective(data, y, vectors, b, c))
        change = max(
            np.linalg.norm(w - w0) / max(np.linalg.norm(w0), np.finfo(float).tiny)
            for w, w0 in zip(vectors, before)
        )
        if opts.verbose:
            logger.info("lsstm iter %d objective %.6e change %.2e", it + 1, trace[-1], change)
        if change < opts.tol:
            converged = True
            break
    return LsstmModel(tuple(vectors), b, float(c), tuple(trace), len(trace), converged)


def lsstm_decision(m: LsstmModel, x) -> float:
    t = check_tensor(x)
    if t.shape != m.shape:
        raise DimensionError(f"sample shape {t.shape} does not match model shape {m.shape}")
    return float(_contract_except(t.data[None], m.mode_vectors, -1)[0] + m.bias)


def lsstm_predict(m: LsstmModel, x) -> int:
    return int(_sign(lsstm_decision(m, x)))


# ----------------------------------------------------------------------
# TEL


@dataclass(frozen=True)
class DecompositionSpec:
    """Which representation TEL extracts per sample: ``cpd`` (one rank) or ``tkd`` (ranks)."""

    form: str = "cpd"
    rank: Any = 1

    def __post_init__(self):
        if self.form not in ("cpd", "tkd"):
            raise ArgumentError(f"form must be 'cpd' or 'tkd', got {self.form!r}")
        if self.form == "cpd":
            check_rank(self.rank)
        elif not isinstance(self.rank, (int, np.integer)):
            object.__setattr__(self, "rank", tuple(int(r) for r in self.rank))

    def slots(self, shape) -> list[tuple[int, int]]:
        if self.form == "cpd":
            return [(n, r) for n in range(len(shape)) for r in range(self.rank)]
        ranks = check_ranks(self.rank, shape)
        return [(n, r) for n in range(len(shape)) for r in range(ranks[n])]


@dataclass
class TelModel:
    learners: list            # [(mode, component, fitted learner)]
    decomposition_spec: DecompositionSpec
    shape: tuple
    options: FitOptions = field(default_factory=FitOptions)
    vote: str = "majority"


def _slot_vectors(x: Tensor, spec: DecompositionSpec, opts: FitOptions) -> dict:
    """Per-slot feature vectors of one sample."""
    if spec.form == "cpd":
        form = cpd_als(x, spec.rank, opts).form
        order = np.argsort(-np.abs(form.weights), kind="stable")
        out = {}
        for n, f in enumerate(form.factors):
            for slot, r in enumerate(order):
                col = f[:, r] * (form.weights[r] if n == 0 else 1.0)
                out[(n, slot)] = col
        return out
    form = hosvd(x, spec.rank).form
    out = {}
    for n, f in enumerate(form.factors):
        for r in range(f.shape[1]):
            col = f[:, r]
            if n == 0:
                piece = form.core[r]
                big = piece.flat[np.argmax(np.abs(piece))] if piece.size else 0.0
                col = col * np.linalg.norm(piece) * (1.0 if big >= 0 else -1.0)
            out[(n, r)] = col
    return out


def _decompose_all(samples, spec, opts):
    feats = []
    for i, s in enumerate(samples):
        try:
            feats.append(_slot_vectors(s, spec, opts))
        except ValidationError:
            raise
        except TensorkitError as exc:
            raise type(exc)(f"decomposition of sample {i} failed: {exc}") from exc
    return feats


class _TrainPredictAdapter:
    """Wrap a ``train(vectors, labels)`` / ``predict(vector)`` learner."""

    def __init__(self, learner):
        self.learner = learner

    def fit(self, X, y):
        self.learner.train(X, y)
        return self

    def predict(self, X):
        return np.array([self.learner.predict(v) for v in X])


def _make_learner(base):
    if base is None:
        return LSSVM()
    is_factory = isinstance(base, type) or (
        callable(base) and not hasattr(base, "fit") and not hasattr(base, "train")
    )
    learner = base() if is_factory else base
    if hasattr(learner, "fit"):
        return clone(learner) if isinstance(learner, BaseEstimator) else learner
    if hasattr(learner, "train"):
        return _TrainPredictAdapter(learner)
    raise ArgumentError("base learner must expose fit/predict or train/predict")


def tel_train(d: TensorDataset, spec: DecompositionSpec, base: Callable | Any = None,
              opts: FitOptions | None = None) -> TelModel:
    """Tensor ensemble learning.

    Every sample is decomposed (CP-ALS or HOSVD).  For each (mode,
    component) slot, the slot's factor columns across samples form a new
    vector dataset (CP weights folded into mode 0) on which one base learner
    is trained.  ``base`` is a factory returning a fresh learner, or an
    estimator instance that gets cloned; default :class:`LSSVM`.
    """
    opts = opts or FitOptions()
    if not isinstance(d, TensorDataset):
        raise ArgumentError("tel_train expects a TensorDataset")
    slots = spec.slots(d.shape)
    feats = _decompose_all(d.samples, spec, opts)
    learners = []
    for slot in slots:
        xs = np.stack([f[slot] for f in feats])
        learner = _make_learner(base)
        learner.fit(xs, d.labels)
        learners.append((slot[0], slot[1], learner))
    return TelModel(learners, spec, d.shape, opts)


def majority_vote(labels: Sequence[int]) -> int:
    total = int(np.sum(np.asarray(labels)))
    return 1 if total >= 0 else -1


def tel_predict(m: TelModel, x) -> int:
    t = check_tensor(x)
    if t.shape != tuple(m.shape):
        raise DimensionError(f"sample shape {t.shape} does not match model shape {tuple(m.shape)}")
    feats = _slot_vectors(t, m.decomposition_spec, m.options)
    votes = [int(_sign(learner.predict(feats[(n, r)][None])[0])) for n, r, learner in m.learners]
    return majority_vote(votes)


# ----------------------------------------------------------------------
# estimators


def _as_samples(X) -> list[Tensor]:
    return check_samples(X, name="X")


class LSSTM(ClassifierMixin, BaseEstimator):
    """Least-squares support tensor machine.

    ``X`` is an array of shape ``(n_samples, I_1, ..., I_N)`` or a list of
    tensors; ``y`` holds ``-1`` / ``+1``.
    """

    def __init__(self, C=1.0, max_iter=50, tol=1e-8, verbose=False):
        self.C = C
        self.max_iter = max_iter
        self.tol = tol
        self.verbose = verbose

    def fit(self, X, y):
        data = TensorDataset(tuple(_as_samples(X)), y)
        self.model_ = lsstm_train(data, self.C, FitOptions(self.max_iter, self.tol, 0, self.verbose))
        self.classes_ = np.array([-1, 1])
        self.objective_trace_ = list(self.model_.objective_trace)
        self.n_iter_ = self.model_.iterations
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return np.array([lsstm_decision(self.model_, s) for s in _as_samples(X)])

    def predict(self, X):
        return _sign(self.decision_function(X))


class TEL(ClassifierMixin, BaseEstimator):
    """Tensor ensemble learning with one base learner per (mode, component) slot."""

    def __init__(self, form="cpd", rank=1, base_estimator=None, max_iter=50, tol=1e-8,
                 random_state=0):
        self.form = form
        self.rank = rank
        self.base_estimator = base_estimator
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y):
        data = TensorDataset(tuple(_as_samples(X)), y)
        spec = DecompositionSpec(self.form, self.rank)
        opts = FitOptions(self.max_iter, self.tol, self.random_state)
        self.model_ = tel_train(data, spec, self.base_estimator, opts)
        self.classes_ = np.array([-1, 1])
        return self

    @property
    def n_learners_(self) -> int:
        check_is_fitted(self, "model_")
        return len(self.model_.learners)

    def predict(self, X):
        check_is_fitted(self, "model_")
        return np.array([tel_predict(self.model_, s) for s in _as_samples(X)])
