"""Bit-exact raw volume files with a JSON sidecar.

Payload: little-endian IEEE-754 float32 in C (z, y, x) order. Sidecar:
``<payload path>.json`` holding dims, dtype, axis order, peak and
provenance. Raw-plus-sidecar keeps half-gigabyte volumes streamable and
language neutral.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .exceptions import DataError
from .volume import Volume

DTYPE_TAG = "f32le"
ORDER_TAG = "zyx"


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_volume(path, vol: Volume, provenance: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = np.ascontiguousarray(vol.data, dtype="<f4")
    path.write_bytes(payload.tobytes())
    meta = {
        "dims": list(vol.dims),
        "dtype": DTYPE_TAG,
        "order": ORDER_TAG,
        "peak": vol.peak,
    }
    if provenance:
        meta["provenance"] = provenance
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def read_metadata(path) -> dict:
    sc = sidecar_path(path)
    if not sc.exists():
        raise DataError(f"missing sidecar {sc}")
    try:
        meta = json.loads(sc.read_text())
    except json.JSONDecodeError as err:
        raise DataError(f"unparseable sidecar {sc}: {err}") from err
    for key in ("dims", "dtype", "order"):
        if key not in meta:
            raise DataError(f"sidecar {sc} lacks '{key}'")
    if meta["dtype"] != DTYPE_TAG or meta["order"] != ORDER_TAG:
        raise DataError(f"unsupported volume encoding {meta['dtype']}/{meta['order']}")
    return meta


def read_volume(path) -> Volume:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such volume file: {path}")
    meta = read_metadata(path)
    dims = tuple(int(v) for v in meta["dims"])
    if len(dims) != 3:
        raise DataError(f"sidecar dims must have 3 entries, got {meta['dims']}")
    raw = path.read_bytes()
    expected = 4 * dims[0] * dims[1] * dims[2]
    if len(raw) != expected:
        raise DataError(f"payload is {len(raw)} bytes, dims {dims} require {expected}")
    data = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    if not np.isfinite(data).all():
        raise DataError(f"volume file {path} contains non-finite values")
    return Volume(data, peak=float(meta.get("peak", 1.0)))
