"""Command line front end: ``twolayer synth | optimize | greedy | analyze | eval``.

Exit codes: 0 success, 2 usage or invalid input, 3 I/O failure, 4 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cv import NumericalError
from .data import (
    SYNTH_DIMS,
    Standardization,
    load_csv,
    metrics,
    sample_unit_cube,
    standardize,
    synth_function,
    train_test_split,
    write_csv,
)
from .greedy import CRITERIA, GreedyConfig, GreedyModel, fit_greedy, predict, staged_predict
from .kernels import FAMILIES, KernelSpec
from .layer import FirstLayer, principal_angles, spectral_report
from .optim import INITS, OptimConfig, optimize_first_layer

log = logging.getLogger("twolayer")

EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


def _bool(s: str) -> bool:
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def _optional_int(s: str):
    return None if str(s).lower() in ("", "none", "auto") else int(float(s))


def _int(s: str) -> int:
    v = float(s)
    if v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}")
    return int(v)


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


# ---------------------------------------------------------------- artifacts

def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest_path(primary) -> Path:
    return Path(str(primary) + ".manifest.json")


def _derive(path, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


def _write_manifest(args, primary, outputs, inputs, config, timings):
    manifest = {
        "subcommand": args.command,
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "config": config,
        "inputs": {str(k): str(v) for k, v in inputs.items()},
        "outputs": {str(p): _sha256(p) for p in outputs},
    }
    if not args.no_timings:
        manifest["timings_seconds"] = timings
    path = _manifest_path(primary)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for v in row])


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


# ---------------------------------------------------------------- shared flag groups

def _add_common(p):
    p.add_argument("--seed", type=_int, default=0, help="random seed")
    p.add_argument("--no-timings", action="store_true", help="omit wall-clock fields from outputs")
    p.add_argument("--config", help="flat key=value file; explicit flags take precedence")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")


def _add_kernel(p):
    g = p.add_argument_group("kernel")
    g.add_argument("--kernel", choices=FAMILIES, default="matern0", help="base radial kernel")
    g.add_argument("--length-scale", type=float, default=1.0, help="distance multiplier eps")
    g.add_argument("--sqrt-d-scaling", type=_bool, default=False, nargs="?", const=True,
                   help="additionally divide distances by sqrt(d)")


def _add_data(p):
    g = p.add_argument_group("data")
    g.add_argument("--data", required=True, help="CSV with header; last column is the target")
    g.add_argument("--train-fraction", type=float, default=0.8, help="fraction of rows used for training")
    g.add_argument("--split-seed", type=_int, default=0, help="seed of the train/test permutation")
    g.add_argument("--standardize", type=_bool, default=False, nargs="?", const=True,
                   help="z-score features and target with training statistics")


def _kernel_from(args, d: int) -> KernelSpec:
    eps = args.length_scale / (np.sqrt(d) if args.sqrt_d_scaling else 1.0)
    return KernelSpec(args.kernel, eps)


def _dataset_from(args):
    ds = train_test_split(load_csv(args.data), args.train_fraction, args.split_seed)
    if args.standardize:
        ds = standardize(ds)
    return ds


def _resolved(args, skip=("command", "func_", "config", "verbose")) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ---------------------------------------------------------------- subcommands

def cmd_synth(args):
    t0 = time.perf_counter()
    d = SYNTH_DIMS[args.func]
    X = sample_unit_cube(d, args.n, args.seed)
    write_csv(args.out, X, synth_function(args.func, X))
    _write_manifest(args, args.out, [args.out], {}, _resolved(args), {"total": time.perf_counter() - t0})
    log.info("wrote %d samples of %s to %s", args.n, args.func, args.out)


def _optim_config(args) -> OptimConfig:
    return OptimConfig(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        k_folds=args.k_folds,
        lam=args.lam,
        adam_beta1=args.adam_beta1,
        adam_beta2=args.adam_beta2,
        adam_eps=args.adam_eps,
        patience=args.patience,
        min_rel_improvement=args.min_rel_improvement,
        seed=args.seed,
        rows=args.rows,
        init=args.init,
        init_scale=args.init_scale,
        restore_best=args.restore_best,
    )


def cmd_optimize(args):
    t0 = time.perf_counter()
    ds = _dataset_from(args)
    spec = _kernel_from(args, ds.n_features)
    config = _optim_config(args)
    initial = FirstLayer.load(args.init_layer) if args.init_layer else None
    if config.init == "loaded" and initial is None:
        raise UsageError("--init loaded requires --init-layer")
    t1 = time.perf_counter()
    layer, trace = optimize_first_layer(spec, ds, config, initial)
    t2 = time.perf_counter()

    out = Path(args.out)
    trace_path = Path(args.trace) if args.trace else _derive(out, ".trace.csv")
    payload = layer.to_dict()
    payload["manifest"] = _manifest_path(out).name
    payload["stop_reason"] = trace.stop_reason
    payload["best_epoch"] = None if trace.best_epoch is None else trace.best_epoch + 1
    _write_json(out, payload)
    _write_rows(trace_path, ["epoch", "loss", "seconds"],
                [(e, loss, None if args.no_timings else sec) for e, loss, sec in trace.rows()])
    cfg = _resolved(args)
    cfg["kernel_resolved"] = spec.to_dict()
    cfg["optim_resolved"] = config.to_dict()
    _write_manifest(args, out, [out, trace_path], {"data": args.data, "init_layer": args.init_layer},
                    cfg, {"load": t1 - t0, "optimize": t2 - t1})
    log.info("optimized %dx%d layer in %d epochs (%s)", layer.rows, layer.cols, len(trace.epoch_loss),
             trace.stop_reason)


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, count = (t.strip() for t in text.split(","))
        lo, hi, count = float(lo), float(hi), _int(count)
    except (ValueError, argparse.ArgumentTypeError):
        raise UsageError(f"--eps-grid expects lo,hi,count, got {text!r}") from None
    if not (0 < lo <= hi) or count < 1:
        raise UsageError("--eps-grid needs 0 < lo <= hi and count >= 1")
    return np.geomspace(lo, hi, count)


def _decay_rows(model, spec, layer, ds):
    n = model.n_centers
    train_res = model.trace.max_residual
    if len(ds.y_test):
        P = staged_predict(model, spec, layer, ds.X_test)
        err = P - ds.y_test[:, None]
        mse = np.mean(err * err, axis=0)
        mx = np.max(np.abs(err), axis=0)
        return [(j + 1, train_res[j], mse[j], mx[j]) for j in range(n)]
    return [(j + 1, train_res[j], None, None) for j in range(n)]


DECAY_HEADER = ["n_centers", "train_max_residual", "test_mse", "test_max_error"]
TRACE_HEADER = ["iteration", "selected_index", "indicator", "max_residual", "max_power"]


def cmd_greedy(args):
    t0 = time.perf_counter()
    ds = _dataset_from(args)
    spec = _kernel_from(args, ds.n_features)
    if args.layer and args.eps_grid:
        raise UsageError("--layer and --eps-grid are mutually exclusive")
    layer = FirstLayer.load(args.layer) if args.layer else None
    config = GreedyConfig(args.criterion, args.max_centers, args.tol, args.power_floor, args.lam)
    out = Path(args.out)
    decay_path = Path(args.decay) if args.decay else _derive(out, ".decay.csv")
    extra = {"manifest": _manifest_path(out).name}
    if ds.standardization is not None:
        extra["standardization"] = ds.standardization.to_dict()
    outputs, timings = [], {"load": time.perf_counter() - t0}
    cfg = _resolved(args)

    if args.eps_grid:
        grid = _parse_grid(args.eps_grid)
        rows, summary = [], []
        for i, eps in enumerate(grid):
            sp = spec.with_length_scale(spec.length_scale * eps)
            t = time.perf_counter()
            model = fit_greedy(sp, None, ds.X_train, ds.y_train, config)
            timings[f"fit_eps{i}"] = time.perf_counter() - t
            path = _derive(out, f".eps{i:02d}.json")
            model.save(path, dict(extra, eps=float(eps)))
            outputs.append(path)
            decay = _decay_rows(model, sp, None, ds)
            rows += [(float(eps),) + r for r in decay]
            summary.append({"eps": float(eps), "file": path.name, "n_centers": model.n_centers})
        _write_rows(decay_path, ["eps"] + DECAY_HEADER, rows)
        _write_json(out, dict(extra, grid=summary, kernel=spec.to_dict()))
        cfg["eps_values"] = [float(e) for e in grid]
    else:
        t = time.perf_counter()
        model = fit_greedy(spec, layer, ds.X_train, ds.y_train, config)
        timings["fit"] = time.perf_counter() - t
        model.save(out, extra)
        _write_rows(decay_path, DECAY_HEADER, _decay_rows(model, spec, layer, ds))
        trace_path = Path(args.trace) if args.trace else _derive(out, ".trace.csv")
        _write_rows(trace_path, TRACE_HEADER, model.trace.rows())
        outputs.append(trace_path)
        log.info("selected %d centers (%s)", model.n_centers, model.trace.stop_reason)
    cfg["kernel_resolved"] = spec.to_dict()
    _write_manifest(args, out, [out, decay_path] + outputs, {"data": args.data, "layer": args.layer}, cfg,
                    timings)


def cmd_analyze(args):
    t0 = time.perf_counter()
    layers = [FirstLayer.load(p) for p in args.layer]
    out = Path(args.out)
    spectral_csv = _derive(out, ".spectral.csv")
    rep = spectral_report(layers[0])
    _write_rows(spectral_csv, ["index", "singular_value", "cumulative_power"], rep.to_rows())
    payload = {
        "manifest": _manifest_path(out).name,
        "layer": args.layer[0],
        "degenerate": rep.degenerate,
        "singular_values": rep.singular_values.tolist(),
        "right_singular_vectors": rep.right_singular_vectors.tolist(),
        "left_singular_vectors": rep.left_singular_vectors.tolist(),
        "eigenvalues": None if rep.eigenvalues is None else
        [str(v) if np.iscomplexobj(rep.eigenvalues) else float(v) for v in rep.eigenvalues],
    }
    outputs = [spectral_csv]
    if len(layers) > 1:
        d = layers[0].cols
        ns = [args.n] if args.n else list(range(1, d + 1))
        angle_rows = []
        for other, name in zip(layers[1:], args.layer[1:]):
            for n in ns:
                ang = principal_angles(layers[0], other, n)
                angle_rows.append((name, n, float(ang.max())))
        angles_csv = _derive(out, ".angles.csv")
        _write_rows(angles_csv, ["layer", "n", "largest_angle_deg"], angle_rows)
        outputs.append(angles_csv)
    _write_json(out, payload)
    _write_manifest(args, out, [out] + outputs, {"layers": ",".join(args.layer)}, _resolved(args),
                    {"total": time.perf_counter() - t0})


def cmd_eval(args):
    t0 = time.perf_counter()
    payload = json.loads(Path(args.model).read_text())
    if "grid" in payload:
        raise UsageError("eval takes a single model file, not an eps-grid summary")
    model = GreedyModel.from_dict(payload)
    ds = train_test_split(load_csv(args.data), args.train_fraction, args.split_seed)
    X, y = ds.X, ds.y
    if "standardization" in payload:
        st = Standardization.from_dict(payload["standardization"])
        X, y = st.apply_x(X), st.apply_y(y)
    mask = {"all": np.ones(len(y), bool), "train": ds.train_mask, "test": ~ds.train_mask}[args.split]
    if not mask.any():
        raise UsageError(f"split {args.split!r} is empty")
    pred = predict(model, model.kernel, model.layer, X[mask])
    result = metrics(y[mask], pred)
    result.update(n_points=int(mask.sum()), n_centers=model.n_centers, split=args.split,
                  manifest=_manifest_path(args.out).name)
    _write_json(args.out, result)
    outputs = [args.out]
    if args.predictions:
        _write_rows(args.predictions, ["y_true", "y_pred"], zip(y[mask].tolist(), pred.tolist()))
        outputs.append(args.predictions)
    _write_manifest(args, args.out, outputs, {"model": args.model, "data": args.data}, _resolved(args),
                    {"total": time.perf_counter() - t0})
    print(json.dumps({k: result[k] for k in ("mse", "max_abs_error")}))


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="twolayer", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sample a test function on the unit cube", formatter_class=fmt)
    p.add_argument("--func", choices=sorted(SYNTH_DIMS), default="f5", help="test function")
    p.add_argument("--n", type=_int, default=1000, help="number of samples")
    p.add_argument("--out", required=True, help="output CSV")
    _add_common(p)
    p.set_defaults(func_=cmd_synth)

    p = sub.add_parser("optimize", help="optimize the first-layer matrix", formatter_class=fmt)
    _add_data(p)
    _add_kernel(p)
    g = p.add_argument_group("optimizer")
    g.add_argument("--learning-rate", type=float, default=5e-3, help="Adam step size")
    g.add_argument("--batch-size", type=_int, default=64, help="mini-batch size")
    g.add_argument("--max-epochs", type=_int, default=25, help="epoch limit")
    g.add_argument("--k-folds", type=_optional_int, default=None, help="fold count; default leave-one-out")
    g.add_argument("--lam", type=float, default=1e-5, help="Tikhonov shift of the batch Gram matrix")
    g.add_argument("--adam-beta1", type=float, default=0.9, help="first-moment decay")
    g.add_argument("--adam-beta2", type=float, default=0.999, help="second-moment decay")
    g.add_argument("--adam-eps", type=float, default=1e-8, help="Adam denominator offset")
    g.add_argument("--patience", type=_int, default=3, help="epochs without relative improvement before stopping")
    g.add_argument("--min-rel-improvement", type=float, default=1e-4,
                   help="relative epoch-loss decrease that resets patience")
    g.add_argument("--rows", type=_optional_int, default=None, help="layer rows b (default d)")
    g.add_argument("--init", choices=INITS, default="identity", help="starting matrix")
    g.add_argument("--init-scale", type=float, default=1.0, help="c for scaled_identity")
    g.add_argument("--init-layer", help="layer JSON for --init loaded")
    g.add_argument("--restore-best", type=_bool, default=True, help="return the best epoch's layer")
    p.add_argument("--out", required=True, help="layer JSON")
    p.add_argument("--trace", help="trace CSV; when omitted: <out stem>.trace.csv")
    _add_common(p)
    p.set_defaults(func_=cmd_optimize)

    p = sub.add_parser("greedy", help="greedy kernel approximation", formatter_class=fmt)
    _add_data(p)
    _add_kernel(p)
    g = p.add_argument_group("greedy")
    g.add_argument("--layer", help="first-layer JSON (omit for the plain kernel)")
    g.add_argument("--eps-grid", help="lo,hi,count: one plain-kernel fit per log-spaced length scale")
    g.add_argument("--criterion", choices=CRITERIA, default="f_greedy", help="selection rule")
    g.add_argument("--max-centers", type=_int, default=100, help="expansion size limit")
    g.add_argument("--lam", type=float, default=0.0, help="diagonal regularization of the training Gram")
    g.add_argument("--tol", type=float, default=0.0, help="stop when the selection indicator is <= tol")
    g.add_argument("--power-floor", type=float, default=1e-13, help="relative power stability floor")
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--decay", help="error-decay CSV; when omitted: <out stem>.decay.csv")
    p.add_argument("--trace", help="selection trace CSV; when omitted: <out stem>.trace.csv")
    _add_common(p)
    p.set_defaults(func_=cmd_greedy)

    p = sub.add_parser("analyze", help="spectral report and principal angles of layers", formatter_class=fmt)
    p.add_argument("--layer", action="append", required=True,
                   help="layer JSON; repeat to compare further layers against the first")
    p.add_argument("--n", type=_int, default=None, help="subspace dimension (default: all)")
    p.add_argument("--out", required=True, help="JSON report; CSVs are written next to it")
    _add_common(p)
    p.set_defaults(func_=cmd_analyze)

    p = sub.add_parser("eval", help="evaluate a greedy model on a CSV", formatter_class=fmt)
    p.add_argument("--model", required=True, help="model JSON written by greedy")
    p.add_argument("--data", required=True, help="CSV with the same columns as the training data")
    p.add_argument("--split", choices=("all", "train", "test"), default="all", help="rows to score")
    p.add_argument("--train-fraction", type=float, default=0.8, help="must match the fitting run")
    p.add_argument("--split-seed", type=_int, default=0, help="must match the fitting run")
    p.add_argument("--out", required=True, help="metrics JSON")
    p.add_argument("--predictions", help="optional CSV of targets and predictions")
    _add_common(p)
    p.set_defaults(func_=cmd_eval)
    return parser


def _apply_config_file(parser, argv):
    """Parse ``argv``; values from ``--config`` become defaults so explicit flags still win."""
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in subparsers), None)
    if known.config and command:
        values = read_config(known.config)
        sub = subparsers[command]
        actions = {a.dest: a for a in sub._actions}
        unknown = sorted(set(values) - set(actions) - {"config"})
        if unknown:
            raise UsageError(f"{known.config}: unknown keys {unknown}")
        for key, value in values.items():
            action = actions.get(key)
            if action is None:
                continue
            if isinstance(action, argparse._StoreTrueAction):
                values[key] = _bool(value)
            action.required = False
        values.pop("config", None)
        sub.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config_file(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, argparse.ArgumentTypeError) as exc:
        print(f"twolayer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"twolayer: error: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func_(args)
    except (UsageError, ValueError) as exc:
        print(f"twolayer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"twolayer: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"twolayer: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
