"""``.htb`` JSON container, CSV import and plot-data reports.

Every ``.htb`` file is one JSON object with ``format_version`` ``"1"`` and a
``kind``.  Matrices and dense blocks are stored as ``{"shape": [...],
"data": [...]}`` with row-major flat data.  Floats are written with 17
significant digits so that doubles survive the round trip, and the writer
is canonical: the same value always serialises to the same bytes.

Kinds: ``tensor``, ``cpd``, ``tkd``, ``tt``, ``tensor_normal``, ``lsstm``,
``tel``, plus ``dataset`` (labelled samples), ``cmtf`` and ``parafac2``.
"""
from __future__ import annotations

import csv
import json
import math
import os
from typing import Any

import numpy as np

from .core import Mode, StateRecord, Tensor
from .exceptions import FormatError, TensorkitError, ValidationError, VersionError
from .forms import TensorCPD, TensorTKD, TensorTT
from .fusion import CmtfResult, Parafac2Result
from .gaussian import TensorNormal
from .learning import LSSVM, DecompositionSpec, LsstmModel, TelModel, TensorDataset
from .validation import FitOptions

FORMAT_VERSION = "1"
KINDS = ("tensor", "cpd", "tkd", "tt", "tensor_normal", "lsstm", "tel",
         "dataset", "cmtf", "parafac2")


# ----------------------------------------------------------------------
# canonical JSON writer


def _number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError("data", f"non-finite value {x} cannot be stored")
    text = format(x, ".17g")
    # "-0" would parse back as the integer 0 and lose the sign
    return "-0.0" if text == "-0" else text


def _scalar_list(xs) -> bool:
    return all(not isinstance(x, (dict, list, tuple)) for x in xs)


def _encode(obj, level: int = 0) -> str:
    pad = "  " * (level + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * level + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if _scalar_list(obj):
            return "[" + ", ".join(_encode(x, level + 1) for x in obj) + "]"
        items = [pad + _encode(x, level + 1) for x in obj]
        return "[\n" + ",\n".join(items) + "\n" + "  " * level + "]"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    return _number(obj)


def dumps(doc: dict) -> str:
    return _encode(doc) + "\n"


# ----------------------------------------------------------------------
# value -> document


def _block(arr) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    return {"shape": list(arr.shape), "data": arr.ravel().tolist()}


def _modes(modes) -> list:
    return [m.to_dict() for m in modes]


def _header(kind: str) -> dict:
    return {"format_version": FORMAT_VERSION, "kind": kind}


def to_document(value) -> dict:
    """Serialisable document for any supported value."""
    if isinstance(value, Tensor):
        doc = _header("tensor")
        doc.update(shape=list(value.shape), modes=_modes(value.modes),
                   data=value.data.ravel().tolist(),
                   state=[r.to_dict() for r in value.state])
        return doc
    if isinstance(value, TensorCPD):
        doc = _header("cpd")
        doc.update(shape=list(value.shape), rank=value.rank, modes=_modes(value.modes),
                   weights=value.weights.tolist(), factors=[_block(f) for f in value.factors])
        return doc
    if isinstance(value, TensorTKD):
        doc = _header("tkd")
        doc.update(shape=list(value.shape), ranks=list(value.ranks), modes=_modes(value.modes),
                   core=_block(value.core), factors=[_block(f) for f in value.factors])
        return doc
    if isinstance(value, TensorTT):
        doc = _header("tt")
        doc.update(shape=list(value.shape), ranks=list(value.ranks), modes=_modes(value.modes),
                   cores=[_block(c) for c in value.cores])
        return doc
    if isinstance(value, TensorNormal):
        doc = _header("tensor_normal")
        doc.update(shape=list(value.shape), modes=_modes(value.mean.modes),
                   mean=value.mean.data.ravel().tolist(),
                   factors=[_block(f) for f in value.factors])
        return doc
    if isinstance(value, LsstmModel):
        doc = _header("lsstm")
        doc.update(shape=list(value.shape), c=value.c, bias=value.bias,
                   mode_vectors=[np.asarray(w).tolist() for w in value.mode_vectors],
                   iterations=value.iterations, converged=value.converged)
        return doc
    if isinstance(value, TelModel):
        learners = []
        for n, r, learner in value.learners:
            if not isinstance(learner, LSSVM):
                raise ValidationError(
                    "learners", f"only LSSVM base learners can be saved, got {type(learner).__name__}"
                )
            learners.append({"mode": int(n), "component": int(r), "c": float(learner.C),
                             "coef": learner.coef_.tolist(), "intercept": learner.intercept_})
        spec = value.decomposition_spec
        rank = spec.rank if isinstance(spec.rank, (int, np.integer)) else list(spec.rank)
        doc = _header("tel")
        doc.update(shape=list(value.shape),
                   decomposition={"form": spec.form, "rank": rank},
                   options={"max_iter": value.options.max_iter, "tol": value.options.tol,
                            "seed": value.options.seed},
                   vote=value.vote, learners=learners)
        return doc
    if isinstance(value, TensorDataset):
        doc = _header("dataset")
        doc.update(shape=list(value.shape), modes=_modes(value.samples[0].modes),
                   count=len(value),
                   data=np.stack([s.data for s in value.samples]).ravel().tolist(),
                   labels=[int(v) for v in value.labels])
        return doc
    if isinstance(value, CmtfResult):
        doc = to_document(value.cpd)
        doc["kind"] = "cmtf"
        doc["side_factor"] = _block(value.side_factor)
        return doc
    if isinstance(value, Parafac2Result):
        doc = _header("parafac2")
        doc.update(rank=int(value.v.shape[1]), u=[_block(u) for u in value.u],
                   s=_block(value.s), v=_block(value.v))
        return doc
    raise ValidationError("kind", f"cannot serialise {type(value).__name__}")


# ----------------------------------------------------------------------
# document -> value


def _get(doc: dict, key: str):
    if key not in doc:
        raise ValidationError(key, "missing field")
    return doc[key]


def _ints(doc, key) -> list[int]:
    v = _get(doc, key)
    if not isinstance(v, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in v):
        raise ValidationError(key, "must be a list of integers")
    return v


def _floats(values, key) -> np.ndarray:
    if not isinstance(values, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
    ):
        raise ValidationError(key, "must be a flat list of numbers")
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(key, "contains non-finite values")
    return arr


def _read_block(obj, key, ndim=None) -> np.ndarray:
    if not isinstance(obj, dict):
        raise ValidationError(key, "must be an object with shape and data")
    shape = _ints(obj, "shape")
    if ndim is not None and len(shape) != ndim:
        raise ValidationError(key, f"expected {ndim}-D block, got shape {shape}")
    data = _floats(_get(obj, "data"), key)
    if data.size != int(np.prod(shape)):
        raise ValidationError(key, f"shape {shape} needs {int(np.prod(shape))} values, got {data.size}")
    return data.reshape(shape)


def _read_modes(doc, order) -> tuple[Mode, ...] | None:
    if "modes" not in doc:
        return None
    try:
        modes = tuple(Mode.from_dict(m) for m in doc["modes"])
    except (KeyError, TypeError, TensorkitError) as exc:
        raise ValidationError("modes", str(exc)) from exc
    if len(modes) != order:
        raise ValidationError("modes", f"expected {order} modes, got {len(modes)}")
    return modes


def _wrap(field_name, fn, *args):
    try:
        return fn(*args)
    except ValidationError:
        raise
    except TensorkitError as exc:
        raise ValidationError(field_name, str(exc)) from exc


def _load_tensor(doc) -> Tensor:
    shape = _ints(doc, "shape")
    data = _floats(_get(doc, "data"), "data")
    if not shape or data.size != int(np.prod(shape)):
        raise ValidationError("data", f"shape {shape} needs {int(np.prod(shape)) if shape else '?'} values, got {data.size}")
    modes = _read_modes(doc, len(shape))
    try:
        state = tuple(StateRecord.from_dict(r) for r in doc.get("state", []))
    except (KeyError, TypeError, TensorkitError) as exc:
        raise ValidationError("state", str(exc)) from exc
    return _wrap("modes", Tensor, data.reshape(shape), modes, state)


def _load_factors(doc) -> list[np.ndarray]:
    factors = _get(doc, "factors")
    if not isinstance(factors, list) or not factors:
        raise ValidationError("factors", "must be a non-empty list")
    return [_read_block(f, "factors", 2) for f in factors]


def _load_cpd(doc) -> TensorCPD:
    factors = _load_factors(doc)
    if len({f.shape[1] for f in factors}) != 1:
        raise ValidationError("factors", f"column counts differ: {[f.shape[1] for f in factors]}")
    weights = _floats(_get(doc, "weights"), "weights")
    if weights.size != factors[0].shape[1]:
        raise ValidationError("weights", f"expected {factors[0].shape[1]} weights, got {weights.size}")
    if "shape" in doc and _ints(doc, "shape") != [f.shape[0] for f in factors]:
        raise ValidationError("shape", "does not match the factor row counts")
    return _wrap("factors", TensorCPD, factors, weights, _read_modes(doc, len(factors)))


def _load_tkd(doc) -> TensorTKD:
    factors = _load_factors(doc)
    core_obj = _get(doc, "core")
    core = _read_block(core_obj, "core")
    if core.ndim != len(factors) or any(f.shape[1] != core.shape[n] for n, f in enumerate(factors)):
        raise ValidationError("factors", "factor column counts must match the core shape")
    return _wrap("core", TensorTKD, core, factors, _read_modes(doc, len(factors)))


def _load_tt(doc) -> TensorTT:
    cores_obj = _get(doc, "cores")
    if not isinstance(cores_obj, list) or not cores_obj:
        raise ValidationError("cores", "must be a non-empty list")
    cores = [_read_block(c, "cores", 3) for c in cores_obj]
    return _wrap("cores", TensorTT, cores, _read_modes(doc, len(cores)))


def _load_tensor_normal(doc) -> TensorNormal:
    shape = _ints(doc, "shape")
    mean = _floats(_get(doc, "mean"), "mean")
    if not shape or mean.size != int(np.prod(shape)):
        raise ValidationError("mean", f"shape {shape} does not match {mean.size} values")
    factors = _load_factors(doc)
    mean_t = _wrap("modes", Tensor, mean.reshape(shape), _read_modes(doc, len(shape)))
    return _wrap("factors", TensorNormal, mean_t, factors)


def _load_lsstm(doc) -> LsstmModel:
    vecs = _get(doc, "mode_vectors")
    if not isinstance(vecs, list) or not vecs:
        raise ValidationError("mode_vectors", "must be a non-empty list")
    vectors = tuple(_floats(v, "mode_vectors") for v in vecs)
    if "shape" in doc and _ints(doc, "shape") != [v.size for v in vectors]:
        raise ValidationError("shape", "does not match the mode vector lengths")
    c = float(_get(doc, "c"))
    if not c > 0:
        raise ValidationError("c", "must be > 0")
    return LsstmModel(vectors, float(_get(doc, "bias")), c, (),
                      int(doc.get("iterations", 0)), bool(doc.get("converged", False)))


def _load_tel(doc) -> TelModel:
    shape = tuple(_ints(doc, "shape"))
    dec = _get(doc, "decomposition")
    try:
        spec = DecompositionSpec(dec["form"], dec["rank"])
        opts = FitOptions(**_get(doc, "options"))
    except (KeyError, TypeError, TensorkitError) as exc:
        raise ValidationError("decomposition", str(exc)) from exc
    learners = []
    for item in _get(doc, "learners"):
        learner = LSSVM(C=float(item.get("c", 1.0)))
        learner.coef_ = _floats(item["coef"], "learners")
        learner.intercept_ = float(item["intercept"])
        learner.classes_ = np.array([-1, 1])
        if learner.coef_.size != shape[int(item["mode"])]:
            raise ValidationError("learners", f"learner for mode {item['mode']} has wrong length")
        learners.append((int(item["mode"]), int(item["component"]), learner))
    try:
        expected = spec.slots(shape)
    except TensorkitError as exc:
        raise ValidationError("decomposition", str(exc)) from exc
    if [(n, r) for n, r, _ in learners] != expected:
        raise ValidationError("learners", "learner slots do not match the decomposition spec")
    return TelModel(learners, spec, shape, opts, doc.get("vote", "majority"))


def _load_dataset(doc) -> TensorDataset:
    shape = _ints(doc, "shape")
    count = int(_get(doc, "count"))
    data = _floats(_get(doc, "data"), "data")
    if data.size != count * int(np.prod(shape)):
        raise ValidationError("data", f"expected {count} samples of shape {shape}")
    modes = _read_modes(doc, len(shape))
    samples = tuple(Tensor(s, modes) for s in data.reshape([count, *shape]))
    return _wrap("labels", TensorDataset, samples, _get(doc, "labels"))


def _load_cmtf(doc) -> CmtfResult:
    cpd = _load_cpd(doc)
    side = _read_block(_get(doc, "side_factor"), "side_factor", 2)
    if side.shape[1] != cpd.rank:
        raise ValidationError("side_factor", "column count must equal the CPD rank")
    return CmtfResult(cpd, side, 0, [], False)


def _load_parafac2(doc) -> Parafac2Result:
    u = [_read_block(b, "u", 2) for b in _get(doc, "u")]
    s = _read_block(_get(doc, "s"), "s", 2)
    v = _read_block(_get(doc, "v"), "v", 2)
    rank = v.shape[1]
    if s.shape != (len(u), rank) or any(uk.shape[1] != rank for uk in u):
        raise ValidationError("u", "u, s and v must share the rank")
    return Parafac2Result(u, s, v, 0, [], False)


_LOADERS = {
    "tensor": _load_tensor, "cpd": _load_cpd, "tkd": _load_tkd, "tt": _load_tt,
    "tensor_normal": _load_tensor_normal, "lsstm": _load_lsstm, "tel": _load_tel,
    "dataset": _load_dataset, "cmtf": _load_cmtf, "parafac2": _load_parafac2,
}


def from_document(doc: Any, kind: str | tuple | None = None):
    if not isinstance(doc, dict):
        raise ValidationError("document", "top level must be a JSON object")
    version = _get(doc, "format_version")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format_version {version!r} (expected {FORMAT_VERSION!r})")
    found = _get(doc, "kind")
    if found not in _LOADERS:
        raise ValidationError("kind", f"unknown kind {found!r}")
    if kind is not None:
        allowed = (kind,) if isinstance(kind, str) else tuple(kind)
        if found not in allowed:
            raise ValidationError("kind", f"expected {' or '.join(allowed)}, found {found!r}")
    return _LOADERS[found](doc)


def loads(text: str, kind=None):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return from_document(doc, kind)


def load(path, kind=None):
    """Read an ``.htb`` file; ``kind`` optionally restricts what is accepted."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads(text, kind)


def save(value, path) -> None:
    text = dumps(to_document(value))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def canonicalise(text: str) -> str:
    """Re-serialise a document through the canonical writer."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return dumps(to_document(from_document(doc)))


# ----------------------------------------------------------------------
# CSV


def import_csv(path, shape) -> Tensor:
    """Read cells row by row, left to right, into a row-major tensor of ``shape``."""
    shape = [int(s) for s in shape]
    values = []
    with open(path, newline="", encoding="utf-8") as fh:
        for r, row in enumerate(csv.reader(fh)):
            for c, cell in enumerate(row):
                cell = cell.strip()
                if not cell and len(row) == 1:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise FormatError(f"non-numeric cell {cell!r} at row {r + 1}, column {c + 1}") from None
    expected = int(np.prod(shape)) if shape else 0
    if len(values) != expected:
        raise FormatError(f"expected {expected} cells, found {len(values)}")
    return Tensor(np.asarray(values).reshape(shape))


# ----------------------------------------------------------------------
# reports


def build_report(form, rel_error: float | None = None, plot_kind: str | None = None) -> dict:
    """One entry per (mode, component) with the factor column and its labels."""
    if isinstance(form, TensorCPD):
        kind, ranks = "cpd", [form.rank] * form.order
    elif isinstance(form, TensorTKD):
        kind, ranks = "tkd", list(form.ranks)
    else:
        raise ValidationError("form", f"reports support cpd and tkd forms, got {type(form).__name__}")
    entries = []
    for n, (f, mode) in enumerate(zip(form.factors, form.modes)):
        labels = list(mode.features) if mode.features is not None else [str(i) for i in range(f.shape[0])]
        suggested = plot_kind or ("line" if f.shape[0] >= 8 else "bar")
        for r in range(ranks[n]):
            entries.append({
                "mode": n,
                "mode_name": mode.name,
                "component": r,
                "title": f"{mode.name}: component {r}",
                "values": f[:, r].tolist(),
                "features": labels,
                "plot_kind": suggested,
            })
    meta = {"form": kind, "ranks": ranks if kind == "tkd" else form.rank,
            "shape": list(form.shape), "mode_names": [m.name for m in form.modes],
            "rel_error": rel_error}
    if kind == "cpd":
        meta["weights"] = form.weights.tolist()
    return {"format_version": FORMAT_VERSION, "kind": "report", "metadata": meta, "entries": entries}


def emit_report(form, path, rel_error: float | None = None, plot_kind: str | None = None) -> None:
    bundle = build_report(form, rel_error, plot_kind)
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        fh.write(dumps(bundle))
