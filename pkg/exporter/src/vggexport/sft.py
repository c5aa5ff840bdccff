"""Standalone SFT1 tensor file writer/reader.

The format is the consumer package's wire contract: magic "SFT1", uint32
dtype code (1 = float32, 2 = complex64 as interleaved float32 pairs),
uint32 ndim, ndim uint32 dims, little-endian row-major payload.
Deliberately self-contained so this package touches the consumer only
through files on disk.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SFT1"
_CODES = {1: np.dtype("<f4"), 2: np.dtype("<c8")}


class FormatError(ValueError):
    pass


def write_sft(arr: np.ndarray, path) -> None:
    arr = np.asarray(arr)
    if arr.dtype == np.float32:
        code = 1
    elif arr.dtype == np.complex64:
        code = 2
    else:
        raise FormatError(f"SFT1 stores float32 or complex64, got {arr.dtype}")
    header = MAGIC + struct.pack("<II", code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + np.ascontiguousarray(arr).tobytes())


def read_sft(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic")
    code, ndim = struct.unpack_from("<II", blob, 4)
    if code not in _CODES:
        raise FormatError(f"{path}: unknown dtype code {code}")
    dims = struct.unpack_from(f"<{ndim}I", blob, 12)
    dtype = _CODES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    payload = blob[12 + 4 * ndim :]
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, dims require {expected}")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
