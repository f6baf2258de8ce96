"""Flat binary container for named float64 arrays.

Layout (little-endian)::

    magic    8 bytes  b"VSDLARR\\0"
    version  uint32   currently 1
    count    uint32   number of arrays
    count x:
        name_len  uint16, name  utf-8 bytes
        ndim      uint8,  dims  uint64 x ndim
        data      float64 x prod(dims), row-major
    sha256   32 bytes over everything above
"""
from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError

MAGIC = b"VSDLARR\0"
VERSION = 1


def dumps(arrays: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype="<f8", order="C")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)) + encoded)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def loads(blob: bytes) -> dict[str, np.ndarray]:
    if len(blob) < 48 or blob[:8] != MAGIC:
        raise DataError("not a model array file")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise DataError("model file checksum mismatch")
    version, count = struct.unpack_from("<II", body, 8)
    if version != VERSION:
        raise DataError(f"unsupported model file version {version}")
    try:
        return _read_arrays(body, count)
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise DataError(f"malformed model file: {exc}") from None


def _read_arrays(body: bytes, count: int) -> dict[str, np.ndarray]:
    pos = 16
    out = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<H", body, pos)
        pos += 2
        name = body[pos:pos + n].decode("utf-8")
        pos += n
        (ndim,) = struct.unpack_from("<B", body, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}Q", body, pos)
        pos += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        out[name] = np.frombuffer(body, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * size
    if pos != len(body):
        raise ValueError("trailing bytes")
    return out


def save_arrays(path, arrays: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(arrays))


def load_arrays(path) -> dict[str, np.ndarray]:
    return loads(Path(path).read_bytes())
