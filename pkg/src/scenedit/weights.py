"""Flat binary container for named real arrays.

Layout: an 8-byte little-endian header length, a UTF-8 JSON header
{"schema_version": 1, "arrays": [{name, shape, dtype, offset}, ...]} and the
concatenated float32 little-endian payload.  Entries are sorted by name so
the same arrays always serialize to the same bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CorruptManifest, IoFailure

DTYPE = "f32"
_NP_DTYPE = np.dtype("<f4")


def save_arrays(path: str | Path, arrays: dict) -> None:
    entries = []
    payload = bytearray()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(np.asarray(arrays[name], np.float64), dtype=_NP_DTYPE)
        entries.append({"name": name, "shape": list(arr.shape), "dtype": DTYPE,
                        "offset": len(payload)})
        payload.extend(arr.tobytes())
    header = json.dumps({"schema_version": 1, "arrays": entries},
                        sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(struct.pack("<Q", len(header)))
            fh.write(header)
            fh.write(bytes(payload))
    except OSError as exc:
        raise IoFailure(f"cannot write weight file {path}: {exc}") from exc


def load_arrays(path: str | Path) -> dict:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read weight file {path}: {exc}") from exc
    if len(blob) < 8:
        raise CorruptManifest(f"weight file {path} is truncated")
    (header_len,) = struct.unpack("<Q", blob[:8])
    try:
        header = json.loads(blob[8:8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptManifest(f"weight file {path} has a bad header: {exc}") from exc
    payload = blob[8 + header_len:]
    out = {}
    for entry in header.get("arrays", []):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * _NP_DTYPE.itemsize
        if end > len(payload):
            raise CorruptManifest(f"array {entry['name']!r} overruns the payload")
        arr = np.frombuffer(payload[start:end], dtype=_NP_DTYPE).reshape(shape)
        out[entry["name"]] = arr.astype(np.float64)
    return out
