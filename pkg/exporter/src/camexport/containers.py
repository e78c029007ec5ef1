"""ATC1 tensor container writer/reader (interchange format with the engine).

Layout: magic "ATC1", version u32 LE = 1, dtype code u8 (1=f32, 2=f64),
ndim u8, extents u64 LE each, then the row-major little-endian payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"ATC1"
VERSION = 1
ELEMENT_CAP = 2**31
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 1, np.dtype("float64"): 2}


class ContainerError(ValueError):
    """Malformed container or unsupported payload."""


def write_container(arr: np.ndarray, path) -> None:
    arr = np.ascontiguousarray(arr)
    dtype = np.dtype(arr.dtype)
    if dtype not in _CODES:
        raise ContainerError(f"only f32/f64 payloads supported, got {dtype}")
    if arr.ndim < 1 or any(d < 1 for d in arr.shape):
        raise ContainerError(f"invalid dims {arr.shape}")
    if arr.size > ELEMENT_CAP:
        raise ContainerError(f"{arr.size} elements exceed the container cap")
    header = MAGIC + struct.pack("<IBB", VERSION, _CODES[dtype], arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    payload = arr.astype(dtype.newbyteorder("<"), copy=False).tobytes(order="C")
    Path(path).write_bytes(header + payload)


def read_container(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 10 or raw[:4] != MAGIC:
        raise ContainerError(f"{path}: not an ATC1 container")
    version, code, ndim = struct.unpack_from("<IBB", raw, 4)
    if version != VERSION or code not in _DTYPES:
        raise ContainerError(f"{path}: unsupported version/dtype")
    dims = struct.unpack_from(f"<{ndim}Q", raw, 10)
    offset = 10 + 8 * ndim
    dtype = _DTYPES[code]
    count = int(np.prod(dims))
    if len(raw) != offset + count * dtype.itemsize:
        raise ContainerError(f"{path}: truncated payload")
    return np.frombuffer(raw, dtype=dtype, count=count, offset=offset).reshape(dims).copy()
