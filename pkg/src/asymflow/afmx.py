"""Binary matrix file format.

Layout: magic ``AFMX``, u32 rows, u32 cols (little-endian), then
rows*cols float64 values, row-major, little-endian. Used to persist
bases, datasets and checkpoint tensors.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

__all__ = ["write_afmx", "read_afmx", "pack_afmx", "unpack_afmx"]

_MAGIC = b"AFMX"
_HEADER = struct.Struct("<4sII")


def pack_afmx(m: np.ndarray) -> bytes:
    a = np.ascontiguousarray(m, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("refusing to write non-finite matrix")
    header = _HEADER.pack(_MAGIC, a.shape[0], a.shape[1])
    return header + a.astype("<f8").tobytes(order="C")


def unpack_afmx(stream: BinaryIO) -> np.ndarray:
    raw = stream.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise ValueError("truncated AFMX header")
    magic, rows, cols = _HEADER.unpack(raw)
    if magic != _MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    nbytes = rows * cols * 8
    payload = stream.read(nbytes)
    if len(payload) != nbytes:
        raise ValueError("truncated AFMX payload")
    a = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(rows, cols)
    if not np.all(np.isfinite(a)):
        raise ValueError("AFMX payload contains non-finite entries")
    return a


def write_afmx(path, m: np.ndarray) -> None:
    Path(path).write_bytes(pack_afmx(m))


def read_afmx(path) -> np.ndarray:
    with open(path, "rb") as fh:
        a = unpack_afmx(fh)
        if fh.read(1):
            raise ValueError("trailing bytes after AFMX payload")
    return a
