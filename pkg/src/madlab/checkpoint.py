"""Parameter checkpoint container.

Layout: 8-byte magic "MADCKPT1", little-endian uint32 header length,
UTF-8 JSON header — a list of {"name", "dtype", "shape"} entries — then
the raw little-endian array payloads concatenated in header order.
"""

import json
import struct

import numpy as np

MAGIC = b"MADCKPT1"

_DTYPES = {"f4": "<f4", "f8": "<f8", "i8": "<i8"}


def _dtype_tag(arr):
    for tag, np_dtype in _DTYPES.items():
        if arr.dtype == np.dtype(np_dtype).newbyteorder("="):
            return tag
    raise ValueError(f"unsupported checkpoint dtype: {arr.dtype}")


def save_checkpoint(path, arrays, meta=None):
    """arrays: ordered dict/list of (name, ndarray). meta: JSON-safe extras."""
    if isinstance(arrays, dict):
        arrays = list(arrays.items())
    header = {
        "entries": [
            {"name": name, "dtype": _dtype_tag(np.asarray(a)), "shape": list(np.asarray(a).shape)}
            for name, a in arrays
        ],
    }
    if meta:
        header["meta"] = meta
    blob = json.dumps(header, separators=(",", ":"), sort_keys=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, a in arrays:
            a = np.asarray(a)
            fh.write(np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path):
    """Returns (dict name -> ndarray, meta dict)."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"not a checkpoint file (magic {magic!r})")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        out = {}
        for ent in header["entries"]:
            dt = np.dtype(_DTYPES[ent["dtype"]])
            count = int(np.prod(ent["shape"])) if ent["shape"] else 1
            buf = fh.read(count * dt.itemsize)
            arr = np.frombuffer(buf, dtype=dt).reshape(ent["shape"])
            out[ent["name"]] = arr.astype(dt.newbyteorder("="))
    return out, header.get("meta", {})
