"""Flat binary exchange format for 2-D float arrays.

Layout: 16-byte header (magic "HNST", u32 rows, u32 cols, u32 extra),
then rows*cols little-endian float32 values in row-major order. The
extra field is 0 for plain matrices; window writers use it to record
the number of image channels packed into each row.
"""

import os
import struct

import numpy as np

from .errors import SchemaError, ShapeError

MAGIC = b"HNST"
_HEADER = struct.Struct("<4sIII")


def write_hnst(path, values, extra=0):
    arr = np.ascontiguousarray(values, dtype="<f4")
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got shape {arr.shape}")
    rows, cols = arr.shape
    header = _HEADER.pack(MAGIC, rows, cols, int(extra))
    tmp = f"{os.fspath(path)}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())
    os.replace(tmp, path)


def read_hnst(path):
    """Read back a matrix written by write_hnst.

    Returns (values, extra) with values as float32.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise SchemaError(f"{path}: file shorter than the 16-byte header")
    magic, rows, cols, extra = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SchemaError(f"{path}: bad magic {magic!r}")
    payload = raw[_HEADER.size:]
    expected = rows * cols * 4
    if len(payload) != expected:
        raise SchemaError(f"{path}: expected {expected} payload bytes, "
                          f"found {len(payload)}")
    values = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    return values.copy(), extra
