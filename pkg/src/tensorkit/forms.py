"""Kruskal (CP), Tucker and Tensor-Train representations.

All three expose ``shape``, ``order``, ``modes`` and ``reconstruct()`` so
callers can switch between them without caring which one they hold.
"""
from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from .core import Mode, Tensor, _khatri_rao, _multi_mode_dot, as_array, default_modes
from .exceptions import DimensionError, FormError


def _readonly_matrix(m, what: str) -> np.ndarray:
    arr = np.array(m, dtype=np.float64)
    if arr.ndim != 2:
        raise FormError(f"{what} must be a matrix, got {arr.ndim}-D")
    arr.flags.writeable = False
    return arr


def _check_modes(modes, shape) -> tuple[Mode, ...]:
    if modes is None:
        return default_modes(len(shape))
    modes = tuple(m if isinstance(m, Mode) else Mode(str(m)) for m in modes)
    if len(modes) != len(shape):
        raise FormError(f"expected {len(shape)} modes, got {len(modes)}")
    for m, size in zip(modes, shape):
        if m.features is not None and len(m.features) != size:
            raise FormError(f"mode {m.name!r} has {len(m.features)} features, size {size}")
    return modes


class TensorCPD:
    """Kruskal form: ``sum_r weights[r] * outer(factors[0][:, r], ..., factors[N-1][:, r])``."""

    def __init__(self, factors: Sequence, weights=None, modes=None):
        factors = [_readonly_matrix(f, f"factor {n}") for n, f in enumerate(factors)]
        if not factors:
            raise FormError("a CPD needs at least one factor matrix")
        rank = factors[0].shape[1]
        if rank < 1 or any(f.shape[1] != rank for f in factors):
            raise FormError(
                f"factor column counts must all equal R >= 1, got {[f.shape[1] for f in factors]}"
            )
        weights = np.ones(rank) if weights is None else np.array(weights, dtype=np.float64)
        if weights.shape != (rank,):
            raise FormError(f"weights must have length {rank}, got shape {weights.shape}")
        weights.flags.writeable = False
        self.factors = tuple(factors)
        self.weights = weights
        self.modes = _check_modes(modes, self.shape)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def rank(self) -> int:
        return self.weights.size

    def is_normalised(self, atol: float = 1e-10) -> bool:
        return all(np.allclose(np.linalg.norm(f, axis=0), 1.0, atol=atol) for f in self.factors)

    def full(self) -> np.ndarray:
        kr = _khatri_rao(list(self.factors))
        return (kr @ self.weights).reshape(self.shape)

    def reconstruct(self) -> Tensor:
        return Tensor(self.full(), self.modes)

    def __repr__(self):
        return f"TensorCPD(shape={self.shape}, rank={self.rank})"


class TensorTKD:
    """Tucker form: ``core x_1 A^(1) ... x_N A^(N)``."""

    def __init__(self, core, factors: Sequence, modes=None):
        core_arr = np.array(as_array(core), dtype=np.float64)
        factors = [_readonly_matrix(f, f"factor {n}") for n, f in enumerate(factors)]
        if core_arr.ndim != len(factors):
            raise FormError(
                f"core order {core_arr.ndim} does not match {len(factors)} factors"
            )
        for n, f in enumerate(factors):
            if f.shape[1] != core_arr.shape[n]:
                raise FormError(
                    f"factor {n} has {f.shape[1]} columns, core mode {n} has size {core_arr.shape[n]}"
                )
        core_arr.flags.writeable = False
        self.core = core_arr
        self.factors = tuple(factors)
        self.modes = _check_modes(modes, self.shape)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.core.shape

    def full(self) -> np.ndarray:
        return _multi_mode_dot(self.core, self.factors)

    def reconstruct(self) -> Tensor:
        return Tensor(self.full(), self.modes)

    def __repr__(self):
        return f"TensorTKD(shape={self.shape}, ranks={self.ranks})"


class TensorTT:
    """Tensor-Train form: a chain of order-3 cores ``(r_{n-1}, I_n, r_n)`` with ``r_0 = r_N = 1``."""

    def __init__(self, cores: Sequence, modes=None):
        arrs = []
        for n, c in enumerate(cores):
            arr = np.array(as_array(c), dtype=np.float64)
            if arr.ndim != 3:
                raise FormError(f"core {n} must be order 3, got order {arr.ndim}")
            arr.flags.writeable = False
            arrs.append(arr)
        if not arrs:
            raise FormError("a TT needs at least one core")
        if arrs[0].shape[0] != 1 or arrs[-1].shape[2] != 1:
            raise FormError("boundary TT ranks must be 1")
        for n in range(len(arrs) - 1):
            if arrs[n].shape[2] != arrs[n + 1].shape[0]:
                raise FormError(
                    f"bond mismatch between cores {n} and {n + 1}: "
                    f"{arrs[n].shape[2]} != {arrs[n + 1].shape[0]}"
                )
        self.cores = tuple(arrs)
        self.modes = _check_modes(modes, self.shape)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def order(self) -> int:
        return len(self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        """Inner bond dimensions ``r_1 .. r_{N-1}``."""
        return tuple(c.shape[2] for c in self.cores[:-1])

    def full(self) -> np.ndarray:
        out = self.cores[0].reshape(self.cores[0].shape[1], -1)
        for core in self.cores[1:]:
            r0 = core.shape[0]
            out = out @ core.reshape(r0, -1)
            out = out.reshape(-1, core.shape[2])
        return out.reshape(self.shape)

    def reconstruct(self) -> Tensor:
        return Tensor(self.full(), self.modes)

    def __repr__(self):
        return f"TensorTT(shape={self.shape}, ranks={self.ranks})"


Form = Union[TensorCPD, TensorTKD, TensorTT]


def reconstruct(form: Form) -> Tensor:
    """Dense tensor represented by ``form``, carrying the form's modes."""
    if not isinstance(form, (TensorCPD, TensorTKD, TensorTT)):
        raise FormError(f"cannot reconstruct {type(form).__name__}")
    return form.reconstruct()


def cpd_to_tkd(c: TensorCPD) -> TensorTKD:
    """Lossless Tucker view of a CPD: superdiagonal core holding the weights."""
    core = np.zeros((c.rank,) * c.order)
    idx = np.arange(c.rank)
    core[(idx,) * c.order] = c.weights
    return TensorTKD(core, c.factors, c.modes)


def rel_error(x, form) -> float:
    """``||X - reconstruct(form)||_F / ||X||_F`` (absolute error when ``X`` is zero).

    ``form`` may also be a dense Tensor or array.
    """
    data = as_array(x)
    approx = form.full() if isinstance(form, (TensorCPD, TensorTKD, TensorTT)) else as_array(form)
    if data.shape != approx.shape:
        raise DimensionError(f"shape mismatch: {data.shape} vs {approx.shape}")
    norm = np.linalg.norm(data.ravel())
    resid = np.linalg.norm((data - approx).ravel())
    return float(resid / norm) if norm > 0 else float(resid)


def normalise_factors(factors, weights=None):
    """Unit-norm columns with magnitudes (and signs) moved into the weights.

    After this, the largest-magnitude entry of every factor column is
    non-negative.  Zero columns stay zero and get weight 0.
    """
    factors = [np.array(f, dtype=np.float64) for f in factors]
    rank = factors[0].shape[1]
    weights = np.ones(rank) if weights is None else np.array(weights, dtype=np.float64)
    for f in factors:
        norms = np.linalg.norm(f, axis=0)
        nz = norms > 0
        f[:, nz] /= norms[nz]
        weights = weights * norms
        idx = np.argmax(np.abs(f), axis=0)
        signs = np.sign(f[idx, np.arange(rank)])
        signs[signs == 0] = 1.0
        f *= signs
        weights = weights * signs
    return factors, weights
