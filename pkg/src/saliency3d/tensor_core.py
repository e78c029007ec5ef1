"""Dense tensor kernels and the ATC1 binary container.

Tensors are plain numpy float32 arrays in row-major order. Dimension-order
conventions (e.g. C x T x H x W for activation fields) are documented at each
call site rather than carried on the array. All reductions accumulate in
float64 and round to float32 once, in a fixed order, so results are
bit-identical across runs and schedules.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError

# Guards against corrupt containers claiming absurd sizes.
ELEMENT_CAP = 2**31

_MAGIC = b"ATC1"
_VERSION = 1
_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODE_FOR_DTYPE = {np.dtype("float32"): 1, np.dtype("float64"): 2}


def _check_dims(dims) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if len(dims) == 0:
        raise DimensionError("tensor needs at least one dimension")
    if any(d < 1 for d in dims):
        raise DimensionError(f"all extents must be >= 1, got {dims}")
    n = 1
    for d in dims:
        n *= d
    if n > ELEMENT_CAP:
        raise DimensionError(f"element count {n} exceeds cap {ELEMENT_CAP}")
    return dims


def create(dims, fill: float = 0.0) -> np.ndarray:
    """New float32 tensor of the given extents, every element == fill."""
    dims = _check_dims(dims)
    if not np.isfinite(fill):
        raise ValueError(f"fill must be finite, got {fill}")
    return np.full(dims, fill, dtype=np.float32)


def write_container(t: np.ndarray, path) -> None:
    """Serialize a float32/float64 tensor to the ATC1 binary format.

    Layout: magic "ATC1", version u32 LE, dtype code u8 (1=f32, 2=f64),
    ndim u8, extents as u64 LE, then the row-major little-endian payload.
    """
    t = np.ascontiguousarray(t)
    dtype = np.dtype(t.dtype)
    if dtype not in _CODE_FOR_DTYPE:
        raise FormatError(f"container supports f32/f64, got {dtype}")
    _check_dims(t.shape)
    header = _MAGIC + struct.pack("<IBB", _VERSION, _CODE_FOR_DTYPE[dtype], t.ndim)
    header += struct.pack(f"<{t.ndim}Q", *t.shape)
    payload = t.astype(dtype.newbyteorder("<"), copy=False).tobytes(order="C")
    Path(path).write_bytes(header + payload)


def read_container(path) -> np.ndarray:
    """Read an ATC1 container back into a numpy array.

    Raises FormatError on wrong magic/version/dtype or a truncated payload;
    filesystem problems surface as OSError.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 10:
        raise FormatError(f"{path}: too short to hold a container header")
    if raw[:4] != _MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {_MAGIC!r}")
    version, dtype_code, ndim = struct.unpack_from("<IBB", raw, 4)
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype_code not in _DTYPE_CODES:
        raise FormatError(f"{path}: unknown dtype code {dtype_code}")
    if ndim < 1:
        raise FormatError(f"{path}: ndim must be >= 1")
    offset = 10
    if len(raw) < offset + 8 * ndim:
        raise FormatError(f"{path}: truncated dimension table")
    dims = struct.unpack_from(f"<{ndim}Q", raw, offset)
    offset += 8 * ndim
    try:
        dims = _check_dims(dims)
    except DimensionError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    dtype = _DTYPE_CODES[dtype_code]
    count = int(np.prod(dims))
    expected = offset + count * dtype.itemsize
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload is {len(raw) - offset} bytes, expected {count * dtype.itemsize}"
        )
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: payload contains non-finite values")
    return data.reshape(dims).copy()


def channel_sum(t: np.ndarray) -> np.ndarray:
    """Sum a C x T x H x W field over channels -> T x H x W.

    Accumulates in float64 in ascending channel order, rounds to float32 once.
    """
    if t.ndim != 4:
        raise DimensionError(f"channel_sum expects rank 4, got rank {t.ndim}")
    acc = np.zeros(t.shape[1:], dtype=np.float64)
    for c in range(t.shape[0]):
        acc += t[c]
    return acc.astype(np.float32)


def relu_map(t: np.ndarray) -> np.ndarray:
    """Elementwise max(x, 0), any rank."""
    return np.maximum(t, 0)


def max_all(t: np.ndarray) -> float:
    """Global maximum element of a non-empty tensor."""
    if t.size == 0:
        raise DimensionError("max_all of an empty tensor")
    return float(t.max())
