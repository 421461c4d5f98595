"""Serialization: masks as run-length JSON and binary PGM, grid functions as
CSV, reports as canonical JSON."""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path
from typing import Any

import numpy as np

from .causal import Region


def region_to_json(r: Region) -> dict:
    """Row-major run-length encoding ``[[start, length], ...]`` of the mask."""
    flat = r.mask.ravel()
    d = np.diff(np.concatenate([[0], flat.view(np.int8), [0]]))
    starts = np.nonzero(d == 1)[0]
    ends = np.nonzero(d == -1)[0]
    return {"grid_id": r.grid_id, "shape": list(r.mask.shape),
            "runs": [[int(s), int(e - s)] for s, e in zip(starts, ends)]}


def region_from_json(d: dict) -> Region:
    shape = tuple(d["shape"])
    flat = np.zeros(shape[0] * shape[1], dtype=bool)
    for s, n in d["runs"]:
        flat[s:s + n] = True
    return Region(d["grid_id"], flat.reshape(shape))


def mask_to_pgm(mask: np.ndarray) -> bytes:
    """Binary (P5) greymap, row 0 of the grid at the bottom; set cells black."""
    m = np.asarray(mask, dtype=bool)[::-1]
    h, w = m.shape
    pix = np.where(m, 0, 255).astype(np.uint8)
    return f"P5\n{w} {h}\n255\n".encode() + pix.tobytes()


def pgm_to_mask(data: bytes) -> np.ndarray:
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = map(int, parts[1].split())
    pix = np.frombuffer(parts[3], dtype=np.uint8, count=w * h).reshape(h, w)
    return (pix == 0)[::-1]


def write_pgm(path: str | Path, mask: np.ndarray) -> None:
    Path(path).write_bytes(mask_to_pgm(mask))


def array_to_csv(a: np.ndarray) -> str:
    """One line per row; ``repr``-exact floats."""
    a = np.atleast_2d(np.asarray(a))
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in a:
        w.writerow([repr(float(v)) if np.isrealobj(row) else str(complex(v)) for v in row])
    return buf.getvalue()


def csv_to_array(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(_io.StringIO(text)) if r]
    return np.array([[float(v) for v in r] for r in rows])


def write_csv(path: str | Path, a: np.ndarray) -> None:
    Path(path).write_text(array_to_csv(a))


def _default(o: Any):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj: Any) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=1, default=_default, allow_nan=False) + "\n"
