"""Command line interface.

Every subcommand takes ``--seed`` and ``--threads`` (default from the
``STRUCTSPARSE_NUM_THREADS`` environment variable) and writes a JSON
manifest next to its main output recording the arguments, library versions
and output checksums.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from . import __version__
from .complexity import METHODS, complexity_eval
from .datagen import (
    LabeledDataset,
    gen_multichannel_targets,
    gen_multilook_targets,
    gen_shared_toy,
    gen_two_class_patches,
)
from .dfdl import DfdlModel, dfdl_fit, dfdl_predict
from .dlsi import DlsiModel, dlsi_predict, dlsi_train
from .io import (
    FormatError,
    load_model,
    read_dataset,
    read_dataset_csv,
    save_model,
    write_array,
    write_dataset,
    write_dataset_csv,
)
from .lrsdl import LrsdlModel, fddl_train, lrsdl_predict, lrsdl_train
from .metrics import evaluate, roc_sweep
from .tensor import SparsityMode, TensorModel, as_tensor, src_dictionary, tensor_predict, tensordl_train

THREADS_ENV = "STRUCTSPARSE_NUM_THREADS"
CHUNK = 128

DEFAULTS = {
    "lrsdl": {"k": 4, "k0": 2, "lam1": 0.01, "lam2": 0.01, "eta": 0.1, "iters": 50},
    "fddl": {"k": 4, "lam1": 0.01, "lam2": 0.01, "iters": 50},
    "dlsi": {"k": 4, "lam": 0.01, "eta": 0.1, "iters": 30, "method": "efficient"},
    "dfdl": {"k": 20, "rho": 0.1, "lam": 0.1, "gamma": 0.01, "iters": 30},
    "tensordl": {"k": 6, "lam1": 0.01, "lam2": 0.01, "mode": "sm", "iters": 30, "lam": 0.02, "ground_label": 0},
    "src": {"mode": "sm", "lam": 0.02, "ground_label": 0},
}


class CliError(Exception):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(path, args, outputs) -> None:
    manifest = {
        "command": args.command,
        "args": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")},
        "seed": args.seed,
        "versions": {
            "structsparse": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "outputs": {str(p): _sha256(p) for p in outputs},
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _manifest_path(args, main_output) -> Path:
    return Path(args.manifest) if args.manifest else Path(str(main_output) + ".manifest.json")


def _load_data(path) -> LabeledDataset:
    p = str(path)
    return read_dataset_csv(p) if p.endswith(".csv") else read_dataset(p)


def _save_data(path, ds) -> None:
    p = str(path)
    (write_dataset_csv if p.endswith(".csv") else write_dataset)(p, ds)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _config(args) -> dict:
    cfg = dict(DEFAULTS[args.method])
    if args.config:
        with open(args.config) as f:
            loaded = json.load(f)
        if not isinstance(loaded, dict):
            raise CliError("config file must hold a JSON object")
        cfg.update(loaded)
    for item in args.set or []:
        if "=" not in item:
            raise CliError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        cfg[key.strip()] = _parse_value(val)
    unknown = set(cfg) - set(DEFAULTS[args.method])
    if unknown:
        raise CliError(f"unknown option(s) for {args.method}: {', '.join(sorted(unknown))}")
    return cfg


# synth -------------------------------------------------------------------


def cmd_synth(args) -> list[Path]:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = ".csv" if args.format == "csv" else ".ssd"
    kind = "toy-shared" if args.toy_shared else args.kind
    if kind is None:
        raise CliError("choose a dataset with --kind or --toy-shared")
    files = []
    if kind == "toy-shared":
        kw = {} if args.n_per_class is None else {"n_per_class": args.n_per_class, "n_train": min(200, args.n_per_class // 2)}
        data = gen_shared_toy(args.seed, **kw)
        pairs = [("train", data.train), ("test", data.test)]
    elif kind == "patches":
        data = gen_two_class_patches(args.seed)
        pairs = [("train", data.train), ("test", data.test)]
    elif kind == "multichannel":
        data = gen_multichannel_targets(args.seed, noise_level=args.noise_level, n_channels=args.channels)
        pairs = [("train", data.train), ("test", data.test)]
    else:
        data = gen_multilook_targets(args.seed, noise_level=args.noise_level, n_looks=args.channels)
        pairs = [("test", LabeledDataset(data.looks, data.labels, "test"))]
        write_array(out / "dictionary.ssa", data.D)
        files.append(out / "dictionary.ssa")
    for name, ds in pairs:
        path = out / f"{name}{ext}"
        _save_data(path, ds)
        files.append(path)
    _write_manifest(Path(args.manifest) if args.manifest else out / "manifest.json", args, files)
    return files


# train / classify --------------------------------------------------------


def _train(method: str, ds: LabeledDataset, cfg: dict):
    Y, y = ds.samples, ds.labels
    if method in ("lrsdl", "fddl", "dlsi", "dfdl") and Y.ndim != 2:
        raise CliError(f"{method} needs single-channel data")
    if method == "lrsdl":
        return lrsdl_train(Y, y, cfg["k"], cfg["k0"], cfg["lam1"], cfg["lam2"], cfg["eta"], iters=cfg["iters"])
    if method == "fddl":
        return fddl_train(Y, y, cfg["k"], cfg["lam1"], cfg["lam2"], iters=cfg["iters"])
    if method == "dlsi":
        return dlsi_train(Y, y, cfg["k"], cfg["lam"], cfg["eta"], iters=cfg["iters"], method=cfg["method"])
    if method == "dfdl":
        return dfdl_fit(Y, y, cfg["k"], cfg["rho"], cfg["lam"], cfg["gamma"], iters=cfg["iters"])
    mode = SparsityMode(str(cfg["mode"]).lower())
    if method == "tensordl":
        res = tensordl_train(
            as_tensor(Y), y, cfg["k"], cfg["lam1"], cfg["lam2"], mode, iters=cfg["iters"],
            ground_label=cfg["ground_label"],
        )
        return TensorModel(res.dictionary, mode, cfg["lam"])
    return TensorModel(src_dictionary(as_tensor(Y), y, cfg["ground_label"]), mode, cfg["lam"])


def _predict_chunk(model, Y):
    if isinstance(model, LrsdlModel):
        return lrsdl_predict(Y, model)
    if isinstance(model, DlsiModel):
        return dlsi_predict(Y, model)
    if isinstance(model, DfdlModel):
        return dfdl_predict(Y, model)
    if isinstance(model, TensorModel):
        return tensor_predict(as_tensor(Y), model)
    raise CliError(f"unsupported model {type(model).__name__}")


def predict(model, Y, workers: int = 1) -> np.ndarray:
    """Predict in fixed-size column chunks; results do not depend on ``workers``."""
    if isinstance(model, TensorModel):
        Y = as_tensor(Y)
        if Y.shape[0] != model.dictionary.D.shape[0] or Y.shape[2] != model.dictionary.n_channels:
            raise CliError(f"data shape {Y.shape} does not fit the model")
    elif Y.ndim != 2:
        raise CliError("this model needs single-channel data")
    chunks = [Y[:, s : s + CHUNK] for s in range(0, Y.shape[1], CHUNK)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: _predict_chunk(model, c), chunks))
    else:
        parts = [_predict_chunk(model, c) for c in chunks]
    return np.concatenate(parts).astype(np.int64)


def cmd_train(args) -> list[Path]:
    cfg = _config(args)
    ds = _load_data(args.data)
    model = _train(args.method, ds, cfg)
    save_model(args.out, model)
    _write_manifest(_manifest_path(args, args.out), args, [Path(args.out)])
    return [Path(args.out)]


def _write_labels(path, labels) -> None:
    Path(path).write_text("".join(f"{int(v)}\n" for v in labels))


def _read_labels(path) -> np.ndarray:
    try:
        return np.array([int(line) for line in Path(path).read_text().split()], dtype=np.int64)
    except ValueError as exc:
        raise CliError(f"bad prediction file {path}: {exc}") from None


def cmd_classify(args) -> list[Path]:
    model = load_model(args.model)
    ds = _load_data(args.data)
    pred = predict(model, ds.samples, args.workers)
    _write_labels(args.out, pred)
    _write_manifest(_manifest_path(args, args.out), args, [Path(args.out)])
    return [Path(args.out)]


def cmd_eval(args) -> list[Path]:
    pred = _read_labels(args.pred)
    true = _load_data(args.data).labels
    if len(pred) != len(true):
        raise CliError(f"{len(pred)} predictions for {len(true)} samples")
    report = evaluate(pred, true)
    text = report.to_json(indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        _write_manifest(_manifest_path(args, args.out), args, [Path(args.out)])
        print(f"accuracy {report.accuracy:.4f}")
        return [Path(args.out)]
    sys.stdout.write(text)
    return []


def _parse_range(text: str) -> list[float]:
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise CliError("range must be start:stop:step with a positive step")
        start, stop, step = parts
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(max(n, 0))]
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_roc(args) -> list[Path]:
    with open(args.input) as f:
        payload = json.load(f)
    try:
        samples, positives = payload["samples"], payload["positives"]
    except (KeyError, TypeError):
        raise CliError("ROC input needs 'samples' and 'positives'") from None
    values = _parse_range(args.values)
    points = roc_sweep(args.kind, values, samples, positives)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["param", "miss", "false_alarm"])
        for p in points:
            w.writerow([repr(p.param), repr(p.miss), repr(p.false_alarm)])
    _write_manifest(_manifest_path(args, args.out), args, [Path(args.out)])
    return [Path(args.out)]


def cmd_complexity(args) -> list[Path]:
    params = {k: getattr(args, k) for k in ("c", "C", "k", "N", "n", "d", "L", "q", "q2")}
    print(complexity_eval(args.method, **params))
    return []


def _bench_data(method, seed):
    if method in ("lrsdl", "fddl", "dlsi"):
        d = gen_shared_toy(seed, n_per_class=300, n_train=100)
    elif method == "dfdl":
        d = gen_two_class_patches(seed)
    else:
        d = gen_multichannel_targets(seed, noise_level=3.0)
    return d.train, d.test


def cmd_bench(args) -> list[Path]:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in DEFAULTS:
            raise CliError(f"unknown method {m!r}")
    rows = []
    for m in methods:
        train, test = _bench_data(m, args.seed)
        cfg = dict(DEFAULTS[m])
        if "iters" in cfg:
            cfg["iters"] = min(cfg["iters"], args.iters)
        for r in range(args.repeats):
            t0 = time.perf_counter()
            model = _train(m, train, cfg)
            t1 = time.perf_counter()
            pred = predict(model, test.samples)
            t2 = time.perf_counter()
            acc = float(np.mean(pred == test.labels))
            rows.append([m, args.seed, r, f"{t1 - t0:.4f}", f"{t2 - t1:.4f}", f"{acc:.4f}"])
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["method", "seed", "repeat", "train_seconds", "classify_seconds", "accuracy"])
        w.writerows(rows)
    _write_manifest(_manifest_path(args, args.out), args, [Path(args.out)])
    return [Path(args.out)]


# parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--threads", type=int, default=None, help=f"BLAS threads (default ${THREADS_ENV})")
    common.add_argument("--manifest", default=None, help="manifest path (default next to the output)")

    p = argparse.ArgumentParser(prog="structsparse", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    s.add_argument("--kind", choices=["toy-shared", "patches", "multichannel", "multilook"])
    s.add_argument("--toy-shared", action="store_true", help="shorthand for --kind toy-shared")
    s.add_argument("--out", default=".", help="output directory")
    s.add_argument("--format", choices=["bin", "csv"], default="bin")
    s.add_argument("--noise-level", type=float, default=0.0)
    s.add_argument("--channels", type=int, default=2, help="channels (multichannel) or looks (multilook)")
    s.add_argument("--n-per-class", type=int, default=None, help="samples per class (toy-shared)")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", parents=[common], help="train a model")
    t.add_argument("--method", choices=sorted(DEFAULTS), required=True)
    t.add_argument("--data", required=True, help="training dataset (.ssd or .csv)")
    t.add_argument("--out", required=True, help="model archive to write")
    t.add_argument("--config", help="JSON file with method options")
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one option")
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("classify", parents=[common], help="predict labels")
    c.add_argument("--model", required=True)
    c.add_argument("--data", required=True)
    c.add_argument("--out", required=True, help="prediction file, one label per line")
    c.add_argument("--workers", type=int, default=1)
    c.set_defaults(func=cmd_classify)

    e = sub.add_parser("eval", parents=[common], help="score predictions")
    e.add_argument("--pred", required=True)
    e.add_argument("--data", required=True, help="dataset holding the true labels")
    e.add_argument("--out", help="metrics JSON (default stdout)")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("roc", parents=[common], help="miss / false-alarm sweep")
    r.add_argument("--kind", choices=["theta", "m_connect"], required=True)
    r.add_argument("--input", required=True, help='JSON {"samples": [...], "positives": [...]}')
    r.add_argument("--values", required=True, help="start:stop:step or comma list")
    r.add_argument("--out", required=True, help="CSV output")
    r.set_defaults(func=cmd_roc)

    x = sub.add_parser("complexity", parents=[common], help="operation count of a method")
    x.add_argument("--method", required=True, help=", ".join(METHODS))
    for name in ("c", "C", "k", "N", "n", "d", "L", "q", "q2"):
        x.add_argument(f"--{name}", dest=name, type=int, default=None)
    x.set_defaults(func=cmd_complexity)

    b = sub.add_parser("bench", parents=[common], help="timed train/classify runs as CSV")
    b.add_argument("--methods", default="fddl,lrsdl,dlsi,dfdl,src,tensordl")
    b.add_argument("--repeats", type=int, default=1)
    b.add_argument("--iters", type=int, default=10, help="cap on outer iterations")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = args.threads
    if threads is None and os.environ.get(THREADS_ENV):
        try:
            threads = int(os.environ[THREADS_ENV])
        except ValueError:
            print(f"error: {THREADS_ENV} must be an integer", file=sys.stderr)
            return 2
    try:
        with threadpool_limits(limits=threads):
            args.func(args)
    except (CliError, FormatError, ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
