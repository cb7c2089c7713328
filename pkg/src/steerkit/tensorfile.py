"""Binary tensor format "SFT1".

Layout: magic b"SFT1", rank as uint32 little-endian, then rank uint32
dims, then the payload as float32 little-endian in row-major order.
"""
from __future__ import annotations

import struct

import numpy as np

MAGIC = b"SFT1"


def write_tensor_bytes(array: np.ndarray) -> bytes:
    array = np.asarray(array, dtype="<f4")
    # ascontiguousarray would promote 0-d arrays to 1-d and change the rank
    array = np.ascontiguousarray(array).reshape(array.shape)
    header = MAGIC + struct.pack("<I", array.ndim)
    header += struct.pack(f"<{array.ndim}I", *array.shape)
    return header + array.tobytes()


def write_tensor(path: str, array: np.ndarray):
    with open(path, "wb") as fh:
        fh.write(write_tensor_bytes(array))


def read_tensor_stream(fh) -> np.ndarray:
    magic = fh.read(4)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
    (rank,) = struct.unpack("<I", fh.read(4))
    dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
    count = int(np.prod(dims)) if rank else 1
    payload = fh.read(4 * count)
    if len(payload) != 4 * count:
        raise ValueError("truncated tensor payload")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def read_tensor(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_tensor_stream(fh)
