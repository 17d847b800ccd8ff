"""Binary tensor blobs: a small shape header followed by little-endian float64 data.

Layout::

    4 bytes   magic b"ADT1"
    uint32    rank (little-endian)
    uint64    one per dimension (little-endian)
    float64   product(shape) values, row-major, little-endian
"""
import hashlib
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError

MAGIC = b"ADT1"


def dumps(array):
    array = np.ascontiguousarray(array, dtype="<f8")
    header = MAGIC + struct.pack("<I", array.ndim) + struct.pack(f"<{array.ndim}Q", *array.shape)
    return header + array.tobytes(order="C")


def loads(buf):
    buf = bytes(buf)
    if buf[:4] != MAGIC:
        raise DataError("not a tensor blob (bad magic)")
    (rank,) = struct.unpack_from("<I", buf, 4)
    shape = struct.unpack_from(f"<{rank}Q", buf, 8)
    offset = 8 + 8 * rank
    count = int(np.prod(shape, dtype=np.int64))
    if len(buf) - offset != 8 * count:
        raise DataError(
            f"tensor blob for shape {shape} needs {8 * count} data bytes, has {len(buf) - offset}"
        )
    return np.frombuffer(buf, dtype="<f8", offset=offset).astype(np.float64).reshape(shape)


def save(path, array):
    """Write a blob and return its sha256 hex digest."""
    data = dumps(array)
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def load(path):
    return loads(Path(path).read_bytes())
