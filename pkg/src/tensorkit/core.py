"""Dense tensors with mode metadata, and the primitive multilinear operations.

Conventions
-----------
* Storage is row-major: the last index varies fastest.
* Mode-n unfolding follows Kolda & Bader: the remaining modes are laid out
  along the columns in ascending mode order with the *earliest* one varying
  fastest.  For a 2x2x2 tensor with ``v[i, j, k] = 4i + 2j + k`` the mode-0
  unfolding is ``[[0, 2, 1, 3], [4, 6, 5, 7]]``.
* Everything is float64 and immutable; operations return new objects.

The private ``_unfold`` / ``_fold`` / ``_mode_dot`` helpers work on plain
ndarrays and are what the decomposition code uses in its inner loops.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Any, Sequence

import numpy as np

from .exceptions import DimensionError, ModeIndexError, StateError

STATE_KINDS = ("fold", "unfold", "vectorise", "mode-n-product")
UNFOLD_CONVENTION = "kolda"


@dataclass(frozen=True)
class Mode:
    """Name of the property a dimension represents, plus optional feature labels."""

    name: str
    features: tuple[str, ...] | None = None

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise DimensionError("mode name must be a non-empty string")
        if self.features is not None:
            object.__setattr__(self, "features", tuple(str(f) for f in self.features))

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name}
        if self.features is not None:
            d["features"] = list(self.features)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Mode":
        return cls(d["name"], d.get("features"))


@dataclass(frozen=True)
class StateRecord:
    """One rearrangement applied to a tensor.

    ``prior_modes`` holds the full mode metadata from before the
    rearrangement so that folding restores it exactly.
    """

    kind: str
    params: dict = field(default_factory=dict)
    prior_shape: tuple[int, ...] = ()
    prior_modes: tuple[Mode, ...] = ()

    def __post_init__(self):
        if self.kind not in STATE_KINDS:
            raise StateError(f"unknown state kind {self.kind!r}")
        object.__setattr__(self, "prior_shape", tuple(int(s) for s in self.prior_shape))
        if any(s < 1 for s in self.prior_shape):
            raise DimensionError("prior_shape entries must be >= 1")
        object.__setattr__(self, "prior_modes", tuple(self.prior_modes))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "prior_shape": list(self.prior_shape),
            "prior_modes": [m.to_dict() for m in self.prior_modes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StateRecord":
        return cls(
            d["kind"],
            dict(d.get("params", {})),
            tuple(d.get("prior_shape", ())),
            tuple(Mode.from_dict(m) for m in d.get("prior_modes", ())),
        )


def default_modes(order: int) -> tuple[Mode, ...]:
    return tuple(Mode(f"mode-{n}") for n in range(order))


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


class Tensor:
    """Dense N-dimensional array with per-mode metadata and a state log.

    Parameters
    ----------
    data : array_like
        Values; copied and converted to float64.
    modes : sequence of Mode or str, optional
        One entry per dimension.  Strings are promoted to feature-less modes.
        Defaults to ``mode-0 .. mode-(N-1)``.
    state : sequence of StateRecord, optional
        Rearrangements that produced this view of the data.
    """

    __slots__ = ("_data", "_modes", "_state")

    def __init__(self, data, modes=None, state=()):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            raise DimensionError("a tensor needs at least one mode")
        if any(s < 1 for s in arr.shape):
            raise DimensionError(f"all dimensions must be >= 1, got {arr.shape}")
        if modes is None:
            modes = default_modes(arr.ndim)
        modes = tuple(m if isinstance(m, Mode) else Mode(str(m)) for m in modes)
        if len(modes) != arr.ndim:
            raise DimensionError(f"expected {arr.ndim} modes, got {len(modes)}")
        for n, (m, size) in enumerate(zip(modes, arr.shape)):
            if m.features is not None and len(m.features) != size:
                raise DimensionError(
                    f"mode {n} ({m.name!r}) has {len(m.features)} features "
                    f"but dimension {size}"
                )
        self._data = _readonly(arr)
        self._modes = modes
        self._state = tuple(state)

    # ------------------------------------------------------------------
    @property
    def data(self) -> np.ndarray:
        """Read-only ndarray view of the values."""
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def order(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def modes(self) -> tuple[Mode, ...]:
        return self._modes

    @property
    def mode_names(self) -> list[str]:
        return [m.name for m in self._modes]

    @property
    def state(self) -> tuple[StateRecord, ...]:
        return self._state

    @property
    def in_raw_state(self) -> bool:
        return not self._state

    @property
    def values(self) -> list[float]:
        """Row-major flat list of the values."""
        return self._data.ravel().tolist()

    def __getitem__(self, index):
        return self._data[index]

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self._data, other._data)
            and self._modes == other._modes
            and self._state == other._state
        )

    __hash__ = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, modes={self.mode_names}, state={len(self._state)})"

    def copy_with(self, data=None, modes=None, state=None) -> "Tensor":
        return Tensor(
            self._data if data is None else data,
            self._modes if modes is None else modes,
            self._state if state is None else state,
        )

    # convenience methods mirroring the module functions
    def unfold(self, mode: int) -> "Tensor":
        return unfold(self, mode)

    def fold(self) -> "Tensor":
        return fold(self)

    def vectorise(self) -> "Tensor":
        return vectorise(self)

    def mode_n_product(self, matrix, mode: int) -> "Tensor":
        return mode_n_product(self, matrix, mode)

    @property
    def frob_norm(self) -> float:
        return frobenius_norm(self)


def tensor_new(shape: Sequence[int], values: Sequence[float], mode_names=None) -> Tensor:
    """Build a raw tensor from a shape and a row-major value list."""
    shape = [int(s) for s in shape]
    if not shape:
        raise DimensionError("shape must have at least one entry")
    if any(s < 1 for s in shape):
        raise DimensionError(f"shape entries must be >= 1, got {shape}")
    values = np.asarray(values, dtype=np.float64).ravel()
    expected = int(np.prod(shape))
    if values.size != expected:
        raise DimensionError(
            f"shape {shape} needs {expected} values, got {values.size}"
        )
    return Tensor(values.reshape(shape), mode_names)


def as_array(x) -> np.ndarray:
    """Return the float64 ndarray behind a Tensor or array-like."""
    if isinstance(x, Tensor):
        return x.data
    return np.asarray(x, dtype=np.float64)


# ----------------------------------------------------------------------
# ndarray-level kernels


def _check_mode(mode: int, order: int) -> int:
    if not isinstance(mode, (int, np.integer)) or isinstance(mode, bool):
        raise ModeIndexError(f"mode must be an integer, got {mode!r}")
    if not 0 <= mode < order:
        raise ModeIndexError(f"mode {mode} out of range for order {order}")
    return int(mode)


def _unfold(x: np.ndarray, mode: int) -> np.ndarray:
    return np.reshape(np.moveaxis(x, mode, 0), (x.shape[mode], -1), order="F")


def _fold(m: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    rest = [s for n, s in enumerate(shape) if n != mode]
    full = np.reshape(m, [shape[mode], *rest], order="F")
    return np.moveaxis(full, 0, mode)


def _mode_dot(x: np.ndarray, m: np.ndarray, mode: int) -> np.ndarray:
    out = np.tensordot(m, x, axes=(1, mode))
    return np.moveaxis(out, 0, mode)


def _multi_mode_dot(x: np.ndarray, matrices, skip: int | None = None, transpose=False):
    for n, m in enumerate(matrices):
        if n == skip:
            continue
        x = _mode_dot(x, m.T if transpose else m, n)
    return x


def _khatri_rao(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Column-wise Kronecker product; the first matrix's row index varies slowest."""
    r = matrices[0].shape[1]
    return reduce(lambda a, b: np.einsum("ir,jr->ijr", a, b).reshape(-1, r), matrices)


# ----------------------------------------------------------------------
# public Tensor-level operations


def _joined_name(modes: Sequence[Mode]) -> str:
    return "*".join(m.name for m in modes) or "singleton"


def unfold(t: Tensor, mode: int) -> Tensor:
    """Mode-``mode`` matricisation, shape ``(I_mode, prod(other dims))``.

    The result keeps the unfolded mode's metadata as its row mode; the
    original metadata is stashed in the appended :class:`StateRecord`.
    """
    mode = _check_mode(mode, t.order)
    others = [m for n, m in enumerate(t.modes) if n != mode]
    record = StateRecord(
        "unfold",
        {"mode": mode, "convention": UNFOLD_CONVENTION},
        t.shape,
        t.modes,
    )
    return Tensor(
        _unfold(t.data, mode),
        (t.modes[mode], Mode(_joined_name(others))),
        t.state + (record,),
    )


def fold(t: Tensor) -> Tensor:
    """Undo the most recent unfold or vectorise."""
    if not t.state:
        raise StateError("tensor already in raw state")
    record = t.state[-1]
    if record.kind == "unfold":
        data = _fold(t.data, record.params["mode"], record.prior_shape)
    elif record.kind == "vectorise":
        data = np.reshape(t.data, record.prior_shape)
    else:
        raise StateError(f"cannot fold a tensor whose last state is {record.kind!r}")
    return Tensor(data, record.prior_modes, t.state[:-1])


def vectorise(t: Tensor) -> Tensor:
    """Row-major vectorisation to shape ``(prod(shape),)``."""
    record = StateRecord("vectorise", {"ordering": "row-major"}, t.shape, t.modes)
    return Tensor(t.data.reshape(-1), (Mode(_joined_name(t.modes)),), t.state + (record,))


def mode_n_product(t: Tensor, m, mode: int) -> Tensor:
    """Contract the columns of matrix ``m`` (J x I_mode) with mode ``mode`` of ``t``.

    The multiplied mode keeps its name but loses its feature labels.
    """
    mode = _check_mode(mode, t.order)
    mat = as_array(m)
    if mat.ndim != 2:
        raise DimensionError(f"mode-n product needs a matrix, got {mat.ndim}-D")
    if mat.shape[1] != t.shape[mode]:
        raise DimensionError(
            f"matrix has {mat.shape[1]} columns but mode {mode} has size {t.shape[mode]}"
        )
    modes = list(t.modes)
    modes[mode] = Mode(modes[mode].name)
    record = StateRecord(
        "mode-n-product", {"mode": mode, "size": int(mat.shape[0])}, t.shape, t.modes
    )
    return Tensor(_mode_dot(t.data, mat, mode), modes, t.state + (record,))


def khatri_rao(a, b) -> np.ndarray:
    """Column-wise Kronecker product of ``a`` (I x R) and ``b`` (J x R)."""
    a, b = as_array(a), as_array(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DimensionError(f"khatri_rao needs equal column counts, got {a.shape}, {b.shape}")
    return _khatri_rao([a, b])


def kronecker(a, b) -> np.ndarray:
    a, b = as_array(a), as_array(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError("kronecker expects two matrices")
    return np.kron(a, b)


def hadamard(a, b) -> np.ndarray:
    a, b = as_array(a), as_array(b)
    if a.shape != b.shape:
        raise DimensionError(f"hadamard needs equal shapes, got {a.shape}, {b.shape}")
    return a * b


def frobenius_norm(t) -> float:
    return float(np.linalg.norm(as_array(t).ravel()))


def inner(t1, t2) -> float:
    a, b = as_array(t1), as_array(t2)
    if a.shape != b.shape:
        raise DimensionError(f"inner product needs equal shapes, got {a.shape}, {b.shape}")
    return float(np.dot(a.ravel(), b.ravel()))
