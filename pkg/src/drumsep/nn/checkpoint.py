"""Versioned binary tensor container used for checkpoints and template banks.

Layout (all integers little-endian):

    bytes 0..7    magic b"DRUMSEP\\x01"
    bytes 8..11   u32 container version (currently 1)
    bytes 12..19  u64 length of the JSON manifest that follows
    manifest      UTF-8 JSON: {"meta": {...}, "tensors": [entry, ...]}
    payload       raw tensor bytes, little-endian, at the stated offsets

Each manifest entry has: name, dtype ("<f4", "<f8", or "<i8"), shape
(list of ints), offset (relative to the start of the payload), nbytes.
Tensors are written in manifest order with no gaps, so the format can be
read back bit-exactly by any implementation.
"""

from __future__ import annotations

import json
import struct
from typing import Dict, Tuple

import numpy as np

from ..errors import FileFormatError

MAGIC = b"DRUMSEP\x01"
VERSION = 1
_ALLOWED_DTYPES = ("<f4", "<f8", "<i8")


def save_tensors(path, tensors: Dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        dtype = arr.dtype.newbyteorder("<").str
        if dtype not in _ALLOWED_DTYPES:
            raise FileFormatError(f"tensor {name!r} has unsupported dtype {arr.dtype}")
        blob = arr.astype(dtype, copy=False).tobytes()
        entries.append({
            "name": name,
            "dtype": dtype,
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(blob),
        })
        blobs.append(blob)
        offset += len(blob)

    manifest = json.dumps({"meta": meta or {}, "tensors": entries},
                          sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(manifest)))
        fh.write(manifest)
        for blob in blobs:
            fh.write(blob)


def load_tensors(path) -> Tuple[Dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 20 or data[:8] != MAGIC:
        raise FileFormatError(f"{path}: not a drumsep tensor container")
    (version,) = struct.unpack_from("<I", data, 8)
    if version != VERSION:
        raise FileFormatError(f"{path}: unsupported container version {version}")
    (manifest_len,) = struct.unpack_from("<Q", data, 12)
    manifest = json.loads(data[20:20 + manifest_len].decode("utf-8"))
    payload = data[20 + manifest_len:]

    tensors = {}
    for entry in manifest["tensors"]:
        start = entry["offset"]
        end = start + entry["nbytes"]
        if end > len(payload):
            raise FileFormatError(f"{path}: tensor {entry['name']!r} overruns payload")
        arr = np.frombuffer(payload[start:end], dtype=entry["dtype"])
        tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return tensors, manifest.get("meta", {})
