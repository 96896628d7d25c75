"""Command-line front end.

Exit codes: 0 success, 2 bad arguments, 3 bad input data or file, 4 numeric
failure.  Results go to stdout as one JSON line; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import io
from .core import Tensor
from .decompositions import (cpd_als, cpd_randomized, default_sample_size, hooi, hosvd,
                             tt_svd)
from .exceptions import ArgumentError, NumericError, TensorkitError
from .forms import reconstruct, rel_error
from .fusion import CoupledData, Parafac2Data, cmtf, parafac2
from .gaussian import dof_ratio, flip_flop, logpdf, sample
from .learning import (DecompositionSpec, TensorDataset, lsstm_predict, lsstm_train,
                       tel_predict, tel_train)
from .validation import FitOptions

EXIT_OK, EXIT_ARGS, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _rank(text: str):
    vals = _int_list(text)
    if not vals:
        raise argparse.ArgumentTypeError("rank must not be empty")
    return vals[0] if len(vals) == 1 else vals


def _fit_flags(p, max_iter=50):
    p.add_argument("--max-iter", type=int, default=max_iter)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true")


def _options(args) -> FitOptions:
    return FitOptions(args.max_iter, args.tol, args.seed, args.verbose)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tensorkit", description="Multilinear data toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="decompose a tensor")
    p.add_argument("--method", required=True, choices=["cpd", "cpd-rand", "hosvd", "hooi", "tt"])
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rank", type=_rank, help="R, or R_1,...,R_N for hosvd/hooi/tt")
    p.add_argument("--eps", type=float, help="relative error budget for tt")
    p.add_argument("--sample-size", type=int, help="rows sampled per update for cpd-rand")
    p.add_argument("--report", help="also write plot data for the factors")
    p.add_argument("--plot-kind", choices=["line", "bar"])
    _fit_flags(p)

    p = sub.add_parser("reconstruct", help="expand a decomposition to a dense tensor")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("residual", help="relative error of a decomposition against data")
    p.add_argument("--data", required=True)
    p.add_argument("--form", required=True)

    p = sub.add_parser("fuse", help="coupled or irregular-slice decompositions")
    p.add_argument("--method", required=True, choices=["cmtf", "parafac2"])
    p.add_argument("--in", dest="input", required=True, nargs="+",
                   help="tensor (cmtf) or one matrix file per slice (parafac2)")
    p.add_argument("--side", help="coupled side matrix (cmtf)")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--out", required=True)
    _fit_flags(p)

    p = sub.add_parser("classify", help="tensor classifiers")
    csub = p.add_subparsers(dest="action", required=True)
    t = csub.add_parser("train")
    t.add_argument("--model", required=True, choices=["lsstm", "tel"])
    t.add_argument("--in", dest="input", required=True, help="labelled dataset file")
    t.add_argument("--out", required=True)
    t.add_argument("--c", type=float, default=1.0)
    t.add_argument("--form", choices=["cpd", "tkd"], default="cpd", help="tel decomposition")
    t.add_argument("--rank", type=_rank, default=1, help="tel decomposition rank")
    _fit_flags(t)
    t = csub.add_parser("predict")
    t.add_argument("--model", required=True, choices=["lsstm", "tel"])
    t.add_argument("--model-file", required=True)
    t.add_argument("--in", dest="input", required=True,
                   help="dataset, a single sample, or samples stacked along mode 0")

    p = sub.add_parser("stats", help="tensor-normal models")
    ssub = p.add_subparsers(dest="action", required=True)
    s = ssub.add_parser("fit")
    s.add_argument("--in", dest="input", required=True, help="samples stacked along mode 0")
    s.add_argument("--out", required=True)
    s.add_argument("--ridge", type=float, default=0.0)
    _fit_flags(s)
    s = ssub.add_parser("logpdf")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="input", required=True)
    s = ssub.add_parser("sample")
    s.add_argument("--model", required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s = ssub.add_parser("dof-ratio")
    s.add_argument("--shape", type=_int_list, required=True)

    p = sub.add_parser("import-csv", help="read a CSV file into a tensor file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--shape", type=_int_list, required=True)
    p.add_argument("--out", required=True)

    for action in parser._subparsers._group_actions:
        for name, child in action.choices.items():
            child.set_defaults(_parser=child)
            if child._subparsers is not None:
                for grand in child._subparsers._group_actions[0].choices.values():
                    grand.set_defaults(_parser=grand)
    return parser


def _emit(obj) -> None:
    print(json.dumps(obj))


def _unstack(t: Tensor) -> list[Tensor]:
    if t.order < 2:
        raise ArgumentError("stacked samples need order >= 2 (mode 0 indexes samples)")
    return [Tensor(s, t.modes[1:]) for s in t.data]


def _cmd_decompose(args) -> None:
    x = io.load(args.input, "tensor")
    opts = _options(args)
    method = args.method
    if method == "tt":
        if (args.eps is None) == (args.rank is None):
            raise ArgumentError("tt needs exactly one of --eps or --rank")
        ranks = None
        if args.rank is not None:
            ranks = [args.rank] * (x.order - 1) if isinstance(args.rank, int) else args.rank
        res = tt_svd(x, eps=args.eps, ranks=ranks)
    else:
        if args.rank is None:
            raise ArgumentError(f"--rank is required for {method}")
        if method in ("cpd", "cpd-rand") and not isinstance(args.rank, int):
            raise ArgumentError(f"{method} takes a single rank")
        if method == "cpd":
            res = cpd_als(x, args.rank, opts)
        elif method == "cpd-rand":
            size = args.sample_size or default_sample_size(args.rank)
            res = cpd_randomized(x, args.rank, size, opts)
        elif method == "hosvd":
            res = hosvd(x, args.rank)
        else:
            res = hooi(x, args.rank, opts)
    form = res.form
    info = {"rel_error": res.rel_error, "iterations": res.iterations, "converged": res.converged}
    io.save(form, args.out)
    if args.report:
        io.emit_report(form, args.report, info["rel_error"], args.plot_kind)
    _emit(info)


def _cmd_reconstruct(args) -> None:
    form = io.load(args.input, ("cpd", "tkd", "tt", "cmtf"))
    if hasattr(form, "cpd"):
        form = form.cpd
    io.save(reconstruct(form), args.out)


def _cmd_residual(args) -> None:
    x = io.load(args.data, "tensor")
    form = io.load(args.form, ("cpd", "tkd", "tt", "cmtf"))
    if hasattr(form, "cpd"):
        form = form.cpd
    _emit({"rel_error": rel_error(x, form)})


def _cmd_fuse(args) -> None:
    opts = _options(args)
    if args.method == "cmtf":
        if args.side is None or len(args.input) != 1:
            raise ArgumentError("cmtf takes one --in tensor and a --side matrix")
        x = io.load(args.input[0], "tensor")
        y = io.load(args.side, "tensor")
        if y.order != 2:
            raise ArgumentError(f"side matrix must be order 2, got order {y.order}")
        res = cmtf(CoupledData(x, y.data), args.rank, opts)
    else:
        if args.side is not None:
            raise ArgumentError("parafac2 does not take --side")
        slices = [io.load(path, "tensor") for path in args.input]
        res = parafac2(Parafac2Data(tuple(s.data for s in slices)), args.rank, opts)
    io.save(res, args.out)
    _emit({"rel_error": res.rel_error, "iterations": res.iterations, "converged": res.converged})


def _predict_inputs(path) -> tuple[list[Tensor], np.ndarray | None]:
    value = io.load(path, ("dataset", "tensor"))
    if isinstance(value, TensorDataset):
        return list(value.samples), value.labels
    return [value], None


def _cmd_classify(args) -> None:
    if args.action == "train":
        data = io.load(args.input, "dataset")
        opts = _options(args)
        if args.model == "lsstm":
            model = lsstm_train(data, args.c, opts)
            info = {"iterations": model.iterations, "converged": model.converged}
        else:
            from .learning import LSSVM

            model = tel_train(data, DecompositionSpec(args.form, args.rank), LSSVM(C=args.c), opts)
            info = {"learners": len(model.learners)}
        predict = lsstm_predict if args.model == "lsstm" else tel_predict
        labels = np.array([predict(model, s) for s in data.samples])
        info["train_accuracy"] = float(np.mean(labels == data.labels))
        io.save(model, args.out)
        _emit(info)
        return
    model = io.load(args.model_file, args.model)
    predict = lsstm_predict if args.model == "lsstm" else tel_predict
    samples, truth = _predict_inputs(args.input)
    if truth is None and samples[0].shape != model.shape:
        samples = _unstack(samples[0])
    labels = [int(predict(model, s)) for s in samples]
    out = {"labels": labels}
    if truth is not None:
        out["accuracy"] = float(np.mean(np.array(labels) == truth))
    _emit(out)


def _cmd_stats(args) -> None:
    if args.action == "dof-ratio":
        d = dof_ratio(args.shape)
        _emit({"eta_tensor": d.eta_tensor, "eta_multi": d.eta_multi, "ratio": d.ratio})
    elif args.action == "fit":
        samples = _unstack(io.load(args.input, "tensor"))
        res = flip_flop(samples, _options(args), args.ridge)
        io.save(res.model, args.out)
        _emit({"loglik": res.loglik_trace[-1], "iterations": res.iterations,
               "converged": res.converged})
    elif args.action == "logpdf":
        model = io.load(args.model, "tensor_normal")
        x = io.load(args.input, "tensor")
        if x.shape == model.shape:
            _emit({"logpdf": logpdf(model, x)})
        else:
            _emit({"logpdf": [logpdf(model, s) for s in _unstack(x)]})
    else:
        model = io.load(args.model, "tensor_normal")
        draws = sample(model, args.count, args.seed)
        stacked = Tensor(np.stack([d.data for d in draws]))
        io.save(stacked, args.out)
        _emit({"count": len(draws), "shape": list(stacked.shape)})


def _cmd_import_csv(args) -> None:
    t = io.import_csv(args.input, args.shape)
    io.save(t, args.out)
    _emit({"shape": list(t.shape)})


_COMMANDS = {
    "import-csv": _cmd_import_csv,
    "decompose": _cmd_decompose, "reconstruct": _cmd_reconstruct, "residual": _cmd_residual,
    "fuse": _cmd_fuse, "classify": _cmd_classify, "stats": _cmd_stats,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        _COMMANDS[args.command](args)
    except ArgumentError as exc:
        sub = getattr(args, "_parser", parser)
        sys.stderr.write(sub.format_usage())
        print(f"{sub.prog}: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TensorkitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
