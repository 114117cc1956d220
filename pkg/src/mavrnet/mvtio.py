"""Binary tensor file format (.mvt) used for cached views, fixtures, and
checkpoint payloads.

Layout: magic b"MVT1", one dtype byte (0 = f32, 1 = f64), one rank byte,
rank u64 little-endian extents, then the row-major little-endian payload.
"""

import io
import struct

import numpy as np

MAGIC = b"MVT1"

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_FOR = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class MvtError(ValueError):
    """Malformed .mvt content."""


def dump_mvt(array, fp) -> None:
    """Write one array to a binary file object."""
    arr = np.asarray(array)
    if not arr.flags.c_contiguous:
        arr = np.ascontiguousarray(arr)  # keeps rank-0 arrays rank-0 upstream
    if arr.dtype not in _CODE_FOR:
        raise MvtError(f"unsupported dtype {arr.dtype}; expected float32 or float64")
    if arr.ndim > 255:
        raise MvtError("rank exceeds 255")
    fp.write(MAGIC)
    fp.write(struct.pack("<BB", _CODE_FOR[arr.dtype], arr.ndim))
    fp.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    fp.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())


def load_mvt(fp):
    """Read one array from a binary file object."""
    magic = fp.read(4)
    if magic != MAGIC:
        raise MvtError(f"bad magic {magic!r}; not an .mvt stream")
    head = fp.read(2)
    if len(head) != 2:
        raise MvtError("truncated header")
    code, rank = struct.unpack("<BB", head)
    if code not in _DTYPE_CODES:
        raise MvtError(f"unknown dtype code {code}")
    dtype = _DTYPE_CODES[code]
    raw_shape = fp.read(8 * rank)
    if len(raw_shape) != 8 * rank:
        raise MvtError("truncated shape block")
    shape = struct.unpack(f"<{rank}Q", raw_shape) if rank else ()
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    payload = fp.read(count * dtype.itemsize)
    if len(payload) != count * dtype.itemsize:
        raise MvtError("truncated payload")
    arr = np.frombuffer(payload, dtype=dtype, count=count).reshape(shape)
    return arr.astype(dtype.newbyteorder("="), copy=True)


def write_mvt(path, array) -> None:
    with open(path, "wb") as fp:
        dump_mvt(array, fp)


def read_mvt(path):
    with open(path, "rb") as fp:
        return load_mvt(fp)


def mvt_bytes(array) -> bytes:
    buf = io.BytesIO()
    dump_mvt(array, buf)
    return buf.getvalue()


def mvt_from_bytes(blob: bytes):
    return load_mvt(io.BytesIO(blob))
