"""Versioned checkpoint container with byte-stable round trips.

Layout: 8-byte magic, little-endian u64 header length, JSON header
(sorted keys, no whitespace), then the raw bytes of every array in
header order. No timestamps or environment data are stored, so saving
the same state twice yields identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAGIC = b"STRFNET1"


def save_checkpoint(path, config: dict, arrays: dict, extra: dict | None = None):
    """Write config (JSON-safe dict), named arrays and extra metadata."""
    keys = sorted(arrays)
    blobs = []
    index = []
    for key in keys:
        # asarray keeps 0-d shapes; ascontiguousarray would promote them to (1,)
        arr = np.asarray(arrays[key], order="C")
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        blobs.append(arr.tobytes())
        index.append({"key": key, "dtype": arr.dtype.str, "shape": list(arr.shape)})
    header = {"config": config, "arrays": index, "extra": extra or {}}
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint64(len(header_bytes)).tobytes())
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path) -> tuple[dict, dict, dict]:
    """Returns (config, arrays, extra)."""
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    off = len(MAGIC)
    header_len = int(np.frombuffer(raw[off : off + 8], dtype="<u8")[0])
    off += 8
    header = json.loads(raw[off : off + header_len].decode())
    off += header_len
    arrays = {}
    for entry in header["arrays"]:
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
        nbytes = dtype.itemsize * count
        arr = np.frombuffer(raw[off : off + nbytes], dtype=dtype).reshape(entry["shape"])
        arrays[entry["key"]] = arr.copy()
        off += nbytes
    if off != len(raw):
        raise ValueError(f"{path}: trailing bytes after arrays")
    return header["config"], arrays, header["extra"]


def pack_state(params: dict, buffers: dict, adam_m: dict | None = None,
               adam_v: dict | None = None) -> dict:
    """Namespace the separate state dicts into one flat array dict."""
    out = {}
    for prefix, group in (("param", params), ("buffer", buffers),
                          ("adam_m", adam_m or {}), ("adam_v", adam_v or {})):
        for key, val in group.items():
            out[f"{prefix}/{key}"] = val
    return out


def unpack_state(arrays: dict) -> tuple[dict, dict, dict, dict]:
    """Inverse of pack_state; returns (params, buffers, adam_m, adam_v)."""
    groups = {"param": {}, "buffer": {}, "adam_m": {}, "adam_v": {}}
    for key, val in arrays.items():
        prefix, _, name = key.partition("/")
        if prefix not in groups or not name:
            raise ValueError(f"unrecognized checkpoint array key {key!r}")
        groups[prefix][name] = val
    return groups["param"], groups["buffer"], groups["adam_m"], groups["adam_v"]
