"""Versioned binary container for trained models.

Layout: magic ``GSMD``, format version (uint16 LE), header length
(uint32 LE), UTF-8 JSON header, then the tensor payload as little-endian
float64, concatenated in the order listed by header["tensors"]. The header
carries the architecture tag, preprocessing config, training history and
any calibration bundled with the model; entries are
{"name", "shape", "offset", "count"} with offsets in elements.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"GSMD"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def save_container(path, header: dict, tensors: dict[str, np.ndarray]) -> None:
    index = []
    offset = 0
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        index.append({"name": name, "shape": list(arr.shape),
                      "offset": offset, "count": int(arr.size)})
        offset += arr.size
        blobs.append(arr.tobytes())
    full = dict(header)
    full["tensors"] = index
    full["byte_order"] = "little"
    full["dtype"] = "float64"
    head = json.dumps(full, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", FORMAT_VERSION, len(head)))
        fh.write(head)
        for blob in blobs:
            fh.write(blob)


def load_container(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ModelFormatError(f"not a model container (magic {magic!r})")
        version, head_len = struct.unpack("<HI", fh.read(6))
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported container version {version}")
        header = json.loads(fh.read(head_len).decode("utf-8"))
        payload = fh.read()
    tensors = {}
    for entry in header["tensors"]:
        start = entry["offset"] * 8
        stop = start + entry["count"] * 8
        arr = np.frombuffer(payload[start:stop], dtype="<f8").astype(np.float64)
        tensors[entry["name"]] = arr.reshape(entry["shape"])
    return header, tensors
