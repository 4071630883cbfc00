"""Versioned binary container shared by map, dataset, image and model files.

Byte layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"IDLC"
    4       2     container version (uint16, currently 1)
    6       2     reserved, zero
    8       8     kind tag, ASCII, NUL padded (e.g. b"geomap\\0\\0")
    16      4     header length H (uint32)
    20      H     header, UTF-8 JSON with sorted keys
    20+H    ...   array blobs, concatenated in header["arrays"] order

``header["arrays"]`` is a list of ``[name, dtype, shape]`` entries; dtype is
``"<f8"`` or ``"<i8"``, data is row-major (C order) with no padding.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"IDLC"
CONTAINER_VERSION = 1
_PREFIX = struct.Struct("<4sHH8sI")
_DTYPES = {"<f8", "<i8"}


class FormatError(ValueError):
    pass


def dump(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    kind_b = kind.encode("ascii")
    if len(kind_b) > 8:
        raise ValueError("kind tag longer than 8 bytes")
    blobs = []
    table = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        dt = "<i8" if np.issubdtype(arr.dtype, np.integer) else "<f8"
        data = np.ascontiguousarray(arr, dtype=dt)
        table.append([name, dt, list(data.shape)])
        blobs.append(data.tobytes(order="C"))
    header = dict(meta)
    header["arrays"] = table
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, CONTAINER_VERSION, 0, kind_b.ljust(8, b"\0"), len(hbytes)))
        fh.write(hbytes)
        for b in blobs:
            fh.write(b)


def load(path, kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _PREFIX.size:
        raise FormatError(f"{path}: truncated file")
    magic, version, _, kind_b, hlen = _PREFIX.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != CONTAINER_VERSION:
        raise FormatError(f"{path}: unsupported container version {version}")
    file_kind = kind_b.rstrip(b"\0").decode("ascii")
    if kind is not None and file_kind != kind:
        raise FormatError(f"{path}: expected a {kind!r} file, found {file_kind!r}")
    pos = _PREFIX.size
    header = json.loads(raw[pos:pos + hlen].decode("utf-8"))
    pos += hlen
    arrays = {}
    for name, dt, shape in header.pop("arrays"):
        if dt not in _DTYPES:
            raise FormatError(f"{path}: unsupported dtype {dt}")
        n = int(np.prod(shape)) * 8
        if pos + n > len(raw):
            raise FormatError(f"{path}: truncated array {name}")
        arrays[name] = np.frombuffer(raw, dtype=dt, count=n // 8, offset=pos).reshape(shape).copy()
        pos += n
    if pos != len(raw):
        raise FormatError(f"{path}: {len(raw) - pos} trailing bytes")
    header["kind"] = file_kind
    return header, arrays
