import io
import struct

import numpy as np
import pytest

from steerkit.tensorfile import (
    MAGIC,
    read_tensor,
    read_tensor_stream,
    write_tensor,
    write_tensor_bytes,
)


def test_header_layout():
    arr = np.arange(6, dtype=np.float32).reshape(2, 3)
    blob = write_tensor_bytes(arr)
    assert blob[:4] == MAGIC
    assert struct.unpack("<I", blob[4:8]) == (2,)
    assert struct.unpack("<2I", blob[8:16]) == (2, 3)
    assert blob[16:] == arr.tobytes()


def test_round_trip_bit_exact_random():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        rank = int(rng.integers(0, 5))
        shape = tuple(int(rng.integers(1, 5)) for _ in range(rank))
        arr = rng.standard_normal(shape).astype(np.float32)
        back = read_tensor_stream(io.BytesIO(write_tensor_bytes(arr)))
        assert back.shape == arr.shape
        assert back.tobytes() == arr.tobytes()


def test_round_trip_special_values():
    arr = np.array([0.0, -0.0, np.inf, -np.inf, np.float32(1e-45)], dtype=np.float32)
    back = read_tensor_stream(io.BytesIO(write_tensor_bytes(arr)))
    assert back.tobytes() == arr.tobytes()


def test_file_round_trip(tmp_path):
    arr = np.random.default_rng(1).standard_normal((3, 4, 5)).astype(np.float32)
    path = tmp_path / "t.sft"
    write_tensor(str(path), arr)
    assert np.array_equal(read_tensor(str(path)), arr)


def test_float64_downcast():
    arr = np.array([1.0, np.pi])
    back = read_tensor_stream(io.BytesIO(write_tensor_bytes(arr)))
    assert back.dtype == np.float32
    assert np.array_equal(back, arr.astype(np.float32))


def test_bad_magic_rejected():
    with pytest.raises(ValueError, match="magic"):
        read_tensor_stream(io.BytesIO(b"NOPE" + b"\x00" * 16))


def test_truncated_payload_rejected():
    blob = write_tensor_bytes(np.ones((4, 4), dtype=np.float32))
    with pytest.raises(ValueError, match="truncated"):
        read_tensor_stream(io.BytesIO(blob[:-3]))


def test_rank_zero_scalar():
    arr = np.float32(2.5)
    back = read_tensor_stream(io.BytesIO(write_tensor_bytes(np.asarray(arr))))
    assert back.shape == ()
    assert back == arr
