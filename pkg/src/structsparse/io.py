"""Binary and CSV file formats for arrays, datasets and trained models.

All integers are 8-byte little-endian unsigned, all reals 8-byte
little-endian IEEE doubles. Arrays are stored column-major one channel
after another. Layouts:

Array file::

    b"SSARRAY\\0" | version | rows | cols | channels | data

Dataset file::

    b"SSDATA\\0\\0" | version | rows | cols | channels | split (0 train, 1 test)
    | data | labels (cols signed 8-byte ints)

Model archive::

    b"SSMODEL\\0" | version | method name | entry count | entries

A string is its byte length followed by UTF-8 bytes. An entry is
``name | kind | ndim | dims | payload`` with kind 0 for real arrays, 1 for
integer arrays and 2 for a JSON string (ndim 0, payload is a string).
"""

from __future__ import annotations

import csv
import json
import struct
from typing import BinaryIO

import numpy as np

from .core import BlockPartition
from .datagen import LabeledDataset
from .dfdl import DfdlModel
from .dlsi import DlsiModel
from .lrsdl import LrsdlModel
from .tensor import ConfuserThresholds, SparsityMode, TensorDictionary, TensorModel

VERSION = 1
ARRAY_MAGIC = b"SSARRAY\0"
DATASET_MAGIC = b"SSDATA\0\0"
MODEL_MAGIC = b"SSMODEL\0"
_SPLITS = ("train", "test")


class FormatError(ValueError):
    """Malformed or unsupported file contents."""


def _u64(f: BinaryIO, v: int) -> None:
    f.write(struct.pack("<Q", int(v)))


def _read_exact(f: BinaryIO, n: int) -> bytes:
    b = f.read(n)
    if len(b) != n:
        raise FormatError("unexpected end of file")
    return b


def _r64(f: BinaryIO) -> int:
    return struct.unpack("<Q", _read_exact(f, 8))[0]


def _write_str(f, s: str) -> None:
    b = s.encode("utf-8")
    _u64(f, len(b))
    f.write(b)


def _read_str(f) -> str:
    return _read_exact(f, _r64(f)).decode("utf-8")


def _check_header(f, magic: bytes) -> None:
    if _read_exact(f, 8) != magic:
        raise FormatError("wrong file type")
    v = _r64(f)
    if v != VERSION:
        raise FormatError(f"unsupported version {v}")


def _as3(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3:
        raise ValueError("only matrices and 3-way tensors can be stored")
    return a


def _write_block(f, a: np.ndarray) -> None:
    for t in range(a.shape[2]):
        f.write(np.asarray(a[:, :, t], dtype="<f8").tobytes(order="F"))


def _read_block(f, rows, cols, chans) -> np.ndarray:
    n = rows * cols * chans
    raw = np.frombuffer(_read_exact(f, 8 * n), dtype="<f8")
    out = np.empty((rows, cols, chans))
    per = rows * cols
    for t in range(chans):
        out[:, :, t] = raw[t * per : (t + 1) * per].reshape((rows, cols), order="F")
    return out


def write_array(path, a) -> None:
    """Store a matrix or tensor; a matrix is saved with one channel."""
    a = _as3(a)
    with open(path, "wb") as f:
        f.write(ARRAY_MAGIC)
        _u64(f, VERSION)
        for s in a.shape:
            _u64(f, s)
        _write_block(f, a)


def read_array(path, squeeze: bool = True) -> np.ndarray:
    """Load an array file; one-channel data comes back as a matrix unless ``squeeze`` is off."""
    with open(path, "rb") as f:
        _check_header(f, ARRAY_MAGIC)
        rows, cols, chans = _r64(f), _r64(f), _r64(f)
        a = _read_block(f, rows, cols, chans)
        if f.read(1):
            raise FormatError("trailing bytes")
    return a[:, :, 0] if squeeze and chans == 1 else a


def write_dataset(path, ds: LabeledDataset) -> None:
    a = _as3(ds.samples)
    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        _u64(f, VERSION)
        for s in a.shape:
            _u64(f, s)
        _u64(f, _SPLITS.index(ds.split))
        _write_block(f, a)
        f.write(np.asarray(ds.labels, dtype="<i8").tobytes())


def read_dataset(path) -> LabeledDataset:
    """Load a dataset file; single-channel samples come back as a matrix."""
    with open(path, "rb") as f:
        _check_header(f, DATASET_MAGIC)
        rows, cols, chans = _r64(f), _r64(f), _r64(f)
        split = _r64(f)
        if split >= len(_SPLITS):
            raise FormatError("bad split tag")
        a = _read_block(f, rows, cols, chans)
        labels = np.frombuffer(_read_exact(f, 8 * cols), dtype="<i8").astype(np.int64)
        if f.read(1):
            raise FormatError("trailing bytes")
    return LabeledDataset(a[:, :, 0] if chans == 1 else a, labels, _SPLITS[split])


def write_dataset_csv(path, ds: LabeledDataset) -> None:
    """One row per sample: label then features, channel after channel.

    The first line is a comment giving the channel count; reals are written
    with 17 significant digits so reading back is exact.
    """
    a = _as3(ds.samples)
    d, n, T = a.shape
    with open(path, "w", newline="") as f:
        f.write(f"# channels={T} split={ds.split}\n")
        w = csv.writer(f)
        w.writerow(["label"] + [f"c{t}_f{i}" for t in range(T) for i in range(d)])
        for j in range(n):
            w.writerow([int(ds.labels[j])] + [repr(float(v)) for v in a[:, j, :].T.ravel()])


def read_dataset_csv(path) -> LabeledDataset:
    with open(path, newline="") as f:
        first = f.readline()
        meta = dict(tok.split("=", 1) for tok in first.lstrip("#").split() if "=" in tok)
        try:
            T = int(meta.get("channels", 1))
        except ValueError:
            raise FormatError("bad channel count") from None
        rows = list(csv.reader(f))
    if not rows:
        raise FormatError("missing header")
    body = rows[1:]
    n = len(body)
    width = len(rows[0]) - 1
    if width % T:
        raise FormatError("feature count is not a multiple of the channel count")
    d = width // T
    a = np.empty((d, n, T))
    labels = np.empty(n, dtype=np.int64)
    for j, r in enumerate(body):
        if len(r) != width + 1:
            raise FormatError(f"row {j + 2} has {len(r)} fields, expected {width + 1}")
        try:
            labels[j] = int(r[0])
            a[:, j, :] = np.array([float(v) for v in r[1:]]).reshape(T, d).T
        except ValueError as exc:
            raise FormatError(f"row {j + 2}: {exc}") from None
    split = meta.get("split", "train")
    return LabeledDataset(a[:, :, 0] if T == 1 else a, labels, split if split in _SPLITS else "train")


def _write_entry(f, name: str, value) -> None:
    _write_str(f, name)
    if isinstance(value, str):
        _u64(f, 2)
        _u64(f, 0)
        _write_str(f, value)
        return
    a = np.asarray(value)
    integer = np.issubdtype(a.dtype, np.integer) or a.dtype == bool
    _u64(f, 1 if integer else 0)
    _u64(f, a.ndim)
    for s in a.shape:
        _u64(f, s)
    f.write(np.asarray(a, dtype="<i8" if integer else "<f8").tobytes(order="F"))


def _read_entry(f):
    name = _read_str(f)
    kind, ndim = _r64(f), _r64(f)
    if kind == 2:
        return name, _read_str(f)
    if kind not in (0, 1):
        raise FormatError(f"unknown entry kind {kind}")
    dims = tuple(_r64(f) for _ in range(ndim))
    count = int(np.prod(dims)) if dims else 1
    dt = "<i8" if kind == 1 else "<f8"
    a = np.frombuffer(_read_exact(f, 8 * count), dtype=dt).reshape(dims, order="F")
    return name, a.astype(np.int64 if kind == 1 else float)


def _model_entries(model) -> tuple[str, dict]:
    if isinstance(model, LrsdlModel):
        p = model.partition
        return "lrsdl", {
            "D": model.D, "D0": model.D0, "class_means": model.class_means,
            "shared_mean": model.shared_mean, "classes": np.asarray(model.classes),
            "class_sizes": np.array(p.class_sizes, dtype=np.int64),
            "history": np.asarray(model.history, dtype=float),
            "params": json.dumps({"lam1": model.lam1, "lam2": model.lam2, "eta": model.eta, "w": model.w}),
        }
    if isinstance(model, DlsiModel):
        ent = {f"D{c}": D for c, D in enumerate(model.dictionaries)}
        ent.update({
            "classes": np.asarray(model.classes), "history": np.asarray(model.history, dtype=float),
            "params": json.dumps({"lam": model.lam, "eta": model.eta, "n": len(model.dictionaries)}),
        })
        return "dlsi", ent
    if isinstance(model, DfdlModel):
        ent = {f"D{c}": D for c, D in enumerate(model.dictionaries)}
        ent.update({
            "classes": np.asarray(model.classes), "levels": np.asarray(model.levels, dtype=np.int64),
            "params": json.dumps({"gamma": model.gamma, "rho": model.rho, "n": len(model.dictionaries)}),
        })
        return "dfdl", ent
    if isinstance(model, TensorModel):
        td = model.dictionary
        th = model.thresholds
        return "tensor", {
            "D": td.D, "classes": np.asarray(td.classes),
            "class_sizes": np.array(td.partition.class_sizes, dtype=np.int64),
            "shared_size": np.array([td.partition.shared_size], dtype=np.int64),
            "thresholds": np.array([th.eps, th.tau] if th else [], dtype=float),
            "params": json.dumps({"mode": model.mode.value, "lam": model.lam, "nonneg": model.nonneg}),
        }
    raise TypeError(f"cannot store model of type {type(model).__name__}")


def save_model(path, model) -> None:
    """Write a trained LRSDL/FDDL, DLSI, DFDL or tensor model."""
    method, entries = _model_entries(model)
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        _u64(f, VERSION)
        _write_str(f, method)
        _u64(f, len(entries))
        for name, value in entries.items():
            _write_entry(f, name, value)


def load_model(path):
    with open(path, "rb") as f:
        _check_header(f, MODEL_MAGIC)
        method = _read_str(f)
        e = dict(_read_entry(f) for _ in range(_r64(f)))
        if f.read(1):
            raise FormatError("trailing bytes")
    try:
        params = json.loads(e["params"])
        if method == "lrsdl":
            part = BlockPartition(tuple(int(s) for s in e["class_sizes"]))
            return LrsdlModel(
                e["D"], part, e["D0"], e["class_means"], e["shared_mean"], params["lam1"], params["lam2"],
                params["eta"], e["classes"], params["w"], list(e["history"]),
            )
        if method == "dlsi":
            dicts = [e[f"D{c}"] for c in range(params["n"])]
            return DlsiModel(dicts, params["lam"], params["eta"], e["classes"], list(e["history"]))
        if method == "dfdl":
            dicts = [e[f"D{c}"] for c in range(params["n"])]
            return DfdlModel(dicts, [int(v) for v in e["levels"]], params["gamma"], params["rho"], e["classes"])
        if method == "tensor":
            part = BlockPartition(tuple(int(s) for s in e["class_sizes"]), int(e["shared_size"][0]))
            th = e["thresholds"]
            return TensorModel(
                TensorDictionary(e["D"], part, e["classes"]), SparsityMode(params["mode"]), params["lam"],
                params["nonneg"], ConfuserThresholds(float(th[0]), float(th[1])) if th.size else None,
            )
    except KeyError as exc:
        raise FormatError(f"model archive lacks entry {exc.args[0]}") from None
    raise FormatError(f"unknown method {method!r}")
