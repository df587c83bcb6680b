"""Command-line entry point: ``signw <subcommand> ...``.

Exit codes: 0 success, 1 input error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from typing import List, Optional

import numpy as np

from . import __version__
from .metrics import SemiMetricSpec, pairwise_distances
from .records import RecordError, load_records
from .regression import CVConfig, DEFAULT_BANDWIDTH_SCALES, KERNELS, fit_cv
from .sde_lab import NumericalError, SDEConfig, convergence_experiment, empirical_small_ball, simulate
from .signature import batch_signature, time_augment
from .tensor_algebra import DimensionOverflow, free_lie_dim

log = logging.getLogger("signw")


class InputError(ValueError):
    pass


def fmt(x: float) -> str:
    """CSV number: 6 significant digits."""
    return f"{float(x):.6g}"


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _metric(text: str) -> SemiMetricSpec:
    try:
        return SemiMetricSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _metric_list(text: str) -> List[SemiMetricSpec]:
    return [_metric(t) for t in text.split(",") if t.strip()]


def _h_grid(text: str) -> np.ndarray:
    try:
        lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:steps, got {text!r}") from None
    if steps < 1 or hi < lo or lo < 0:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}")
    return np.linspace(lo, hi, steps)


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline="\n"), True


def _write_manifest(out_path: Optional[str], args, started: float, extra=None):
    if out_path is None or out_path == "-":
        return
    params = {k: (str(v) if isinstance(v, SemiMetricSpec) else v) for k, v in vars(args).items() if k != "func"}
    params = json.loads(json.dumps(params, default=lambda o: [str(x) for x in o] if isinstance(o, list) else
                                   (o.tolist() if isinstance(o, np.ndarray) else str(o))))
    manifest = {
        "subcommand": args.command,
        "parameters": params,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "argv": sys.argv[1:],
        "wall_clock_seconds": round(time.perf_counter() - started, 3),
    }
    if extra:
        manifest.update(extra)
    with open(out_path + ".manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _paths(records, augment: bool):
    paths = [r.path() for r in records]
    return [time_augment(p) for p in paths] if augment else paths


# --- subcommands --------------------------------------------------------------


def cmd_sig(args):
    recs = load_records(args.input)
    paths = _paths(recs, args.augment_time)
    d = paths[0].dim
    if any(p.dim != d for p in paths):
        raise InputError("records have different dimensions")
    sigs = batch_signature(paths, args.level)
    out, close = _open_out(args.out)
    try:
        for rec, s in zip(recs, sigs):
            out.write(json.dumps({"id": rec.id, "d": d, "level": args.level, "signature": s.tolist()}) + "\n")
    finally:
        if close:
            out.close()


def cmd_dist(args):
    xs = load_records(args.input)
    ys = load_records(args.other) if args.other else None
    spec = SemiMetricSpec.parse(args.metric, augment=args.augment_time)
    D = pairwise_distances(spec, [r.path() for r in xs], None if ys is None else [r.path() for r in ys])
    cols = ys if ys is not None else xs
    out, close = _open_out(args.out)
    try:
        out.write(",".join(["id"] + [r.id for r in cols]) + "\n")
        for rec, row in zip(xs, D):
            out.write(",".join([rec.id] + [fmt(v) for v in row]) + "\n")
    finally:
        if close:
            out.close()


def _cv_config(args) -> CVConfig:
    return CVConfig(
        folds=args.cv_folds,
        bandwidths=tuple(args.grid_h),
        relative=not args.absolute_h,
        C_grid=tuple(args.grid_C),
        a_grid=tuple(args.grid_a),
        seed=args.seed,
    )


def cmd_sde_bench(args):
    started = time.perf_counter()
    cfg = SDEConfig(drift="power", drift_param=args.p, diffusion="xcos", z0=args.z0, T=args.T, L=args.steps)
    seeds = [args.seed + i for i in range(args.n_seeds)]
    progress = (lambda msg: log.info(msg)) if args.verbose else None
    res = convergence_experiment(args.m_values, args.metrics, cfg, _cv_config(args), seeds,
                                 n_test=args.n_test, kernel=args.kernel, progress=progress)
    header = ",".join(["M"] + [str(m) for m in args.metrics]) + "\n"

    def table(values):
        return header + "".join(",".join([str(M)] + [fmt(v) for v in row]) + "\n" for M, row in zip(res.m_values, values))

    out, close = _open_out(args.out)
    try:
        out.write(table(res.rmse))
    finally:
        if close:
            out.close()
    if args.out and args.out != "-":
        stem = args.out[:-4] if args.out.endswith(".csv") else args.out
        with open(stem + "_timing.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table(res.seconds))
        _write_manifest(args.out, args, started, {"seeds": seeds, "chosen_hyperparameters": res.chosen})


def cmd_classify(args):
    started = time.perf_counter()
    train, test = load_records(args.train), load_records(args.test)
    for name, recs in (("training", train), ("test", test)):
        missing = [r.id for r in recs if r.label is None]
        if missing:
            raise InputError(f"{name} record {missing[0]!r} has no label")
    spec = SemiMetricSpec.parse(args.metric, augment=args.augment_time)
    train_paths = [r.path() for r in train]
    test_paths = [r.path() for r in test]
    labels = [r.label for r in train]
    model, res = fit_cv(_cv_config(args), spec, args.kernel, train_paths, labels=labels)
    pred, scores = model.classify(test_paths)
    truth = [r.label for r in test]
    classes = sorted(set(labels) | set(truth))
    confusion = {c: {p: 0 for p in classes} for c in classes}
    for t, p in zip(truth, pred):
        confusion[t][p] += 1
    report = {
        "metric": str(res.metric),
        "kernel": args.kernel,
        "h": float(fmt(res.h)),
        "cv_score": float(fmt(res.score)),
        "accuracy": float(fmt(np.mean([t == p for t, p in zip(truth, pred)]))),
        "n_train": len(train),
        "n_test": len(test),
        "classes": classes,
        "confusion": confusion,
        "predictions": [{"id": r.id, "label": p} for r, p in zip(test, pred)],
    }
    out, close = _open_out(args.out)
    try:
        json.dump(report, out, indent=2, sort_keys=True)
        out.write("\n")
    finally:
        if close:
            out.close()
    _write_manifest(args.out, args, started)


def cmd_smallball(args):
    started = time.perf_counter()
    cfg = SDEConfig(drift="zero", drift_param=None, diffusion="zero", T=args.T, L=args.steps)
    paths, _ = simulate(cfg, args.seed, range(args.samples + 1), augment=args.metric.is_signature)
    curve = empirical_small_ball(paths[1:], paths[0], args.metric, args.h_grid)
    out, close = _open_out(args.out)
    try:
        out.write("h,fraction\n")
        for h, frac in curve:
            out.write(f"{fmt(h)},{fmt(frac)}\n")
    finally:
        if close:
            out.close()
    _write_manifest(args.out, args, started)


def cmd_nu(args):
    print(free_lie_dim(args.d, args.n))


# --- parser -------------------------------------------------------------------


def _add_cv_flags(p, folds=5):
    p.add_argument("--cv-folds", type=int, default=folds)
    p.add_argument("--grid-h", type=_floats, default=list(DEFAULT_BANDWIDTH_SCALES),
                   help="bandwidth grid; multiples of the median training distance unless --absolute-h")
    p.add_argument("--absolute-h", action="store_true", help="read --grid-h as absolute bandwidths")
    p.add_argument("--grid-C", type=_floats, default=list(CVConfig.C_grid))
    p.add_argument("--grid-a", type=_floats, default=list(CVConfig.a_grid))
    p.add_argument("--kernel", choices=KERNELS, default="gaussian")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signw", description="Signature semi-metrics and Nadaraya-Watson estimators.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sig", help="truncated signatures of JSON-lines series")
    p.add_argument("input")
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--augment-time", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sig)

    p = sub.add_parser("dist", help="pairwise distance matrix as CSV")
    p.add_argument("input")
    p.add_argument("other", nargs="?")
    p.add_argument("--metric", required=True)
    p.add_argument("--augment-time", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("sde-bench", help="RMSE versus training size for SDE terminal values")
    p.add_argument("--m-values", type=_ints, default=[8, 16, 32, 64, 128, 256, 512, 1024, 2048])
    p.add_argument("--metrics", type=_metric_list, required=True)
    p.add_argument("--p", type=int, default=5, help="drift power in b(x) = -x^p")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--z0", type=float, default=1.0)
    p.add_argument("--n-test", type=int, default=512)
    p.add_argument("--n-seeds", type=int, default=1, help="average over seeds seed, seed+1, ...")
    p.add_argument("--out")
    _add_cv_flags(p)
    p.set_defaults(func=cmd_sde_bench)

    p = sub.add_parser("classify", help="Nadaraya-Watson classification of labelled series")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--augment-time", action="store_true")
    p.add_argument("--out")
    _add_cv_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("smallball", help="empirical concentration function of Brownian paths")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--metric", type=_metric, required=True)
    p.add_argument("--h-grid", type=_h_grid, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_smallball)

    p = sub.add_parser("nu", help="free nilpotent Lie algebra dimension")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_nu)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (NumericalError, FloatingPointError, DimensionOverflow) as exc:
        print(f"signw: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (RecordError, InputError, ValueError, OSError) as exc:
        print(f"signw: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
