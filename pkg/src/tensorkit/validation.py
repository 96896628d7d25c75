"""Input validation helpers shared by the estimators and functional API."""
from __future__ import annotations

from dataclasses import dataclass
from numbers import Integral, Real
from typing import Sequence

import numpy as np

from .core import Tensor
from .exceptions import ArgumentError, DataError, DimensionError, NumericError


@dataclass(frozen=True)
class FitOptions:
    """Iteration controls shared by every iterative fit.

    ``tol`` is compared against the absolute change of the monitored
    quantity (relative error, log-likelihood, ...) between sweeps.
    """

    max_iter: int = 50
    tol: float = 1e-8
    seed: int = 0
    verbose: bool = False

    def __post_init__(self):
        if not isinstance(self.max_iter, Integral) or self.max_iter < 1:
            raise ArgumentError(f"max_iter must be an integer >= 1, got {self.max_iter!r}")
        if not isinstance(self.tol, Real) or not self.tol > 0:
            raise ArgumentError(f"tol must be > 0, got {self.tol!r}")
        if not isinstance(self.seed, Integral):
            raise ArgumentError(f"seed must be an integer, got {self.seed!r}")


def check_tensor(x, min_order: int = 1, name: str = "x") -> Tensor:
    """Coerce ``x`` to a finite :class:`Tensor` of order ``>= min_order``."""
    if not isinstance(x, Tensor):
        try:
            x = Tensor(x)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, DimensionError):
                raise
            raise DimensionError(f"{name} is not a numeric array: {exc}") from exc
    if x.order < min_order:
        raise DimensionError(f"{name} must have order >= {min_order}, got {x.order}")
    if not np.all(np.isfinite(x.data)):
        raise NumericError(f"{name} contains non-finite values")
    return x


def check_rank(rank, name: str = "rank") -> int:
    if isinstance(rank, bool) or not isinstance(rank, Integral) or rank < 1:
        raise ArgumentError(f"{name} must be an integer >= 1, got {rank!r}")
    return int(rank)


def check_ranks(ranks, shape: Sequence[int]) -> tuple[int, ...]:
    """Multilinear ranks: one per mode with ``1 <= R_n <= I_n``.

    A single integer is broadcast to every mode.
    """
    if isinstance(ranks, Integral):
        ranks = [ranks] * len(shape)
    ranks = tuple(ranks)
    if len(ranks) != len(shape):
        raise ArgumentError(f"need {len(shape)} ranks, got {len(ranks)}")
    for n, (r, size) in enumerate(zip(ranks, shape)):
        check_rank(r, f"rank[{n}]")
        if r > size:
            raise ArgumentError(f"rank[{n}]={r} exceeds dimension {size}")
    return tuple(int(r) for r in ranks)


def check_samples(samples, name: str = "samples") -> list[Tensor]:
    """A non-empty list of equal-shape tensors.

    Accepts a sequence of tensors/arrays or one ndarray whose first axis
    indexes the samples.
    """
    if isinstance(samples, np.ndarray):
        samples = list(samples)
    out = [check_tensor(s, name=f"{name}[{i}]") for i, s in enumerate(samples)]
    if not out:
        raise DataError(f"{name} is empty")
    shape = out[0].shape
    for i, s in enumerate(out):
        if s.shape != shape:
            raise DimensionError(f"{name}[{i}] has shape {s.shape}, expected {shape}")
    return out


def check_binary_labels(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != n_samples:
        raise DimensionError(f"got {y.size} labels for {n_samples} samples")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DataError("labels must be -1 or +1")
    if np.unique(y).size < 2:
        raise DataError("training data must contain both classes")
    return y


def stack(samples: Sequence[Tensor]) -> np.ndarray:
    return np.stack([s.data for s in samples])
