"""On-disk formats.

``HWV1`` volume file, all integers little-endian::

    bytes 0-3    magic b"HWV1"
    bytes 4-15   dims (n_u, n_v, n_w) as uint32
    bytes 16-19  element type tag, uint32; 1 = float64
    bytes 20-    n_u*n_v*n_w float64 values, u varying fastest

CSV files carry a header row, use ``.`` as decimal separator and UTF-8.
Floats are written with ``repr`` so that reading them back is exact.

A dataset directory holds ``manifest.json``, ``responses.csv`` (id, y) and
either ``signals.csv`` (id, x_1..x_p) or ``volumes/<id>.hwv``.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .funreg import FunctionalDataset

MAGIC = b"HWV1"
TAG_FLOAT64 = 1
_HEADER = struct.Struct("<4sIIII")


def write_volume(path, volume) -> None:
    vol = np.asarray(volume, dtype="<f8")
    if vol.ndim != 3:
        raise ValueError(f"volume must be 3D, got shape {vol.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, *vol.shape, TAG_FLOAT64))
        fh.write(vol.ravel(order="F").tobytes())


def read_volume(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, nu, nv, nw, tag = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if tag != TAG_FLOAT64:
        raise ValueError(f"{path}: unsupported element type tag {tag}")
    expected = nu * nv * nw * 8
    if len(data) - _HEADER.size != expected:
        raise ValueError(f"{path}: payload has {len(data) - _HEADER.size} bytes, expected {expected}")
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    return flat.reshape((nu, nv, nw), order="F").astype(float)


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def read_csv(path):
    """Header and rows (as strings) of a CSV file."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def write_columns(path, columns: dict) -> None:
    names = list(columns)
    cols = [np.asarray(columns[k]).ravel() for k in names]
    write_csv(path, names, zip(*cols))


def read_columns(path) -> dict:
    header, rows = read_csv(path)
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {h: data[:, i] for i, h in enumerate(header)}


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# -- grids ---------------------------------------------------------------

def write_grid(path_stem, grid, name: str = "value") -> Path:
    """Write a 1D grid as ``<stem>.csv`` (t, name) or a 3D grid as ``<stem>.hwv``."""
    grid = np.asarray(grid)
    stem = Path(path_stem)
    if grid.ndim == 1:
        p = grid.shape[0]
        out = stem.with_suffix(".csv")
        t = (np.arange(p) + 0.5) / p
        vals = grid.astype(float) if grid.dtype != bool else grid.astype(np.int64)
        write_csv(out, ["t", name], zip(t, vals))
        return out
    out = stem.with_suffix(".hwv")
    write_volume(out, grid.astype(float))
    return out


def read_grid(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".hwv":
        return read_volume(path)
    cols = read_columns(path)
    names = [k for k in cols if k != "t"]
    return cols[names[0]]


# -- datasets -------------------------------------------------------------

def write_dataset(directory, dataset: FunctionalDataset, ids=None, extra_manifest=None) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    n = dataset.n
    ids = [f"s{i:04d}" for i in range(n)] if ids is None else [str(i) for i in ids]
    shape = dataset.grid_shape
    manifest = {"format": "hwfr-dataset", "version": 1, "n": n, "grid_shape": list(shape),
                "kind": "1d" if len(shape) == 1 else "3d"}
    if extra_manifest:
        manifest.update(extra_manifest)
    write_json(d / "manifest.json", manifest)
    write_csv(d / "responses.csv", ["id", "y"], zip(ids, dataset.responses))
    if len(shape) == 1:
        write_signals(d / "signals.csv", ids, dataset.predictors)
    else:
        (d / "volumes").mkdir(exist_ok=True)
        for i, vol in zip(ids, dataset.predictors):
            write_volume(d / "volumes" / f"{i}.hwv", vol)


def write_signals(path, ids, signals) -> None:
    p = signals.shape[1]
    write_csv(path, ["id"] + [f"x_{j + 1}" for j in range(p)],
              ([i] + list(row) for i, row in zip(ids, signals)))


def read_signals(path):
    header, rows = read_csv(path)
    ids = [r[0] for r in rows]
    X = np.array([[float(v) for v in r[1:]] for r in rows])
    return ids, X


def read_dataset(directory):
    """Load a dataset directory; returns ``(dataset, ids, manifest)``."""
    d = Path(directory)
    manifest = read_json(d / "manifest.json")
    _, rows = read_csv(d / "responses.csv")
    ids = [r[0] for r in rows]
    y = np.array([float(r[1]) for r in rows])
    if manifest["kind"] == "1d":
        sig_ids, X = read_signals(d / "signals.csv")
        if sig_ids != ids:
            raise ValueError(f"{d}: signal ids do not match response ids")
    else:
        X = np.array([read_volume(d / "volumes" / f"{i}.hwv") for i in ids])
    return FunctionalDataset(X, y), ids, manifest
