"""Field files, noise injection and report files.

A field file is one line of JSON (axes, shape, dtype, units) terminated by a
newline, followed by the raw little-endian float64 or complex128 values in C
order.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from opgraph.errors import GraphParseError
from opgraph.field import DTYPES, Field

_LE = {"real64": np.dtype("<f8"), "complex128": np.dtype("<c16")}


def write_field(path, f: Field) -> None:
    header = {"axes": list(f.axes), "shape": list(f.shape), "dtype": f.dtype, "units": f.units}
    data = np.ascontiguousarray(f.data, dtype=_LE[f.dtype])
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode() + b"\n")
        fh.write(data.tobytes(order="C"))


def read_field(path) -> Field:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise GraphParseError(f"{path}: missing header line")
    try:
        h = json.loads(raw[:nl])
        shape = tuple(int(s) for s in h["shape"])
        dt = _LE[h["dtype"]]
        axes, units = tuple(h["axes"]), str(h["units"])
    except (ValueError, KeyError, TypeError) as e:
        raise GraphParseError(f"{path}: bad header ({e})") from None
    body = raw[nl + 1:]
    n = math.prod(shape)
    if len(body) != n * dt.itemsize:
        raise GraphParseError(f"{path}: expected {n * dt.itemsize} data bytes, found {len(body)}")
    data = np.frombuffer(body, dtype=dt).reshape(shape).astype(DTYPES[h["dtype"]])
    return Field(data, axes, units)


def add_noise(y: np.ndarray, sigma: float = 0.0, seed: int = 0) -> np.ndarray:
    """Additive white Gaussian noise with standard deviation ``sigma`` (a no-op at 0)."""
    if sigma <= 0:
        return y
    rng = np.random.default_rng(seed)
    n = rng.standard_normal(y.shape)
    if np.iscomplexobj(y):
        n = (n + 1j * rng.standard_normal(y.shape)) / math.sqrt(2)
    return y + sigma * n


def _plain(v: Any):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, set, frozenset)):
        items = sorted(v) if isinstance(v, (set, frozenset)) else v
        return [_plain(x) for x in items]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if hasattr(v, "to_dict"):
        return _plain(v.to_dict())
    return v


def to_json(report: dict) -> str:
    return json.dumps(_plain(report), indent=2, sort_keys=False)


def write_report(path, report: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(report) + "\n")
    return path


def write_csv(path, rows: Iterable[dict], columns: list[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    return path
