"""Magic-tagged binary container: header line, JSON metadata, raw LE arrays."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .exceptions import ModelFormatError


def write_container(path: str | Path, magic: str, meta: dict, arrays: dict[str, np.ndarray],
                    dtype: str = "<f4") -> None:
    arrays = {k: np.ascontiguousarray(v, dtype=dtype) for k, v in arrays.items()}
    meta = dict(meta, dtype=dtype,
                arrays=[{"name": k, "shape": list(v.shape)} for k, v in arrays.items()])
    header = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic.encode("ascii") + b"\n")
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for v in arrays.values():
            fh.write(v.tobytes(order="C"))


def read_container(path: str | Path, magic: str) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        data = fh.read()
    tag = magic.encode("ascii") + b"\n"
    if not data.startswith(tag):
        raise ModelFormatError(f"{path}: expected {magic!r} header")
    pos = len(tag)
    try:
        (hlen,) = struct.unpack_from("<I", data, pos)
        pos += 4
        meta = json.loads(data[pos : pos + hlen].decode("utf-8"))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: corrupt header ({exc})") from None
    pos += hlen
    dtype = np.dtype(meta["dtype"])
    arrays = {}
    for spec in meta["arrays"]:
        shape = tuple(spec["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        if pos + nbytes > len(data):
            raise ModelFormatError(f"{path}: truncated array {spec['name']!r}")
        arrays[spec["name"]] = np.frombuffer(data, dtype=dtype, count=int(np.prod(shape)),
                                             offset=pos).reshape(shape).astype(dtype.newbyteorder("="))
        pos += nbytes
    if pos != len(data):
        raise ModelFormatError(f"{path}: {len(data) - pos} trailing bytes")
    return meta, arrays
