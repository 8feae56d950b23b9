"""Binary n-dimensional array container used for datasets, checkpoints and outputs.

Layout (all little-endian):

======  =====  ==========================================
offset  size   field
======  =====  ==========================================
0       4      magic ``EBMT``
4       1      version (1)
5       1      dtype code (0 = 32-bit float)
6       1      ndim
7       1      reserved (0)
8       4*n    dims, ndim unsigned 32-bit integers
...     4*N    payload, row-major float32, N = prod(dims)
======  =====  ==========================================

Write then read is bit-identical.  The reader validates the header and the
payload length before allocating anything payload-sized.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import FormatError

MAGIC = b"EBMT"
VERSION = 1
DTYPE_F32 = 0
_MAX_NDIM = 32


def atomic_write_bytes(path, data: bytes) -> None:
    """Write a file atomically: temp file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def tensor_bytes(array: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim > _MAX_NDIM:
        raise FormatError(f"ndim {arr.ndim} exceeds the format limit of {_MAX_NDIM}")
    header = struct.pack("<4sBBBB", MAGIC, VERSION, DTYPE_F32, arr.ndim, 0)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + dims + arr.tobytes()


def write_tensor(path, array: np.ndarray) -> None:
    atomic_write_bytes(path, tensor_bytes(array))


def read_tensor(path) -> np.ndarray:
    path = os.fspath(path)
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) < 8:
            raise FormatError(f"{path}: truncated header ({len(header)} bytes)")
        magic, version, dtype, ndim, reserved = struct.unpack("<4sBBBB", header)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if dtype != DTYPE_F32:
            raise FormatError(f"{path}: unsupported dtype code {dtype}")
        if reserved != 0:
            raise FormatError(f"{path}: reserved byte is {reserved}, expected 0")
        if ndim > _MAX_NDIM:
            raise FormatError(f"{path}: ndim {ndim} exceeds the format limit")
        dim_bytes = fh.read(4 * ndim)
        if len(dim_bytes) < 4 * ndim:
            raise FormatError(f"{path}: truncated dimension table")
        dims = struct.unpack(f"<{ndim}I", dim_bytes) if ndim else ()
        count = 1
        for d in dims:
            count *= d
        expected = 4 * count
        # Size check before any payload-sized allocation.
        actual = os.fstat(fh.fileno()).st_size - 8 - 4 * ndim
        if actual != expected:
            raise FormatError(
                f"{path}: payload is {actual} bytes, header declares {expected}"
            )
        payload = fh.read(expected)
    if len(payload) != expected:
        raise FormatError(f"{path}: short read ({len(payload)} of {expected} bytes)")
    values = np.frombuffer(payload, dtype="<f4")
    return values.reshape(dims).copy()
