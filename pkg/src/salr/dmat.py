"""DMAT: a minimal dense-matrix file format.

Layout (all integers little-endian)::

    magic   4 bytes  b"DMAT"
    version u16      1
    rows    u32
    cols    u32
    dtype   u8       0 = f32, 1 = f64
    payload rows*cols values, row-major, little-endian

Round trips are byte-exact: ``write(read(path))`` reproduces the file, and
``read(write(m))`` reproduces every stored value bit for bit.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .linalg import as_matrix

__all__ = ["DTYPE_F32", "DTYPE_F64", "write_dmat", "read_dmat"]

_MAGIC = b"DMAT"
_VERSION = 1
_HEADER = struct.Struct("<4sHIIB")

DTYPE_F32 = 0
DTYPE_F64 = 1

_NP_DTYPES = {DTYPE_F32: np.dtype("<f4"), DTYPE_F64: np.dtype("<f8")}
_CODES = {"f32": DTYPE_F32, "f64": DTYPE_F64}


def dtype_code(name: str) -> int:
    """Map ``"f32"``/``"f64"`` to the on-disk dtype code."""
    try:
        return _CODES[name]
    except KeyError:
        raise FormatError(f"unknown dtype name: {name!r}") from None


def write_dmat(path, m, dtype: str = "f32") -> None:
    """Serialize ``m`` to ``path``.

    Values are cast to the requested storage dtype; with ``"f32"`` the cast is
    lossy unless entries are already f32-representable.
    """
    a = as_matrix(m, "m")
    code = dtype_code(dtype)
    payload = np.ascontiguousarray(a, dtype=_NP_DTYPES[code]).tobytes()
    header = _HEADER.pack(_MAGIC, _VERSION, a.shape[0], a.shape[1], code)
    Path(path).write_bytes(header + payload)


def read_dmat(path) -> tuple[np.ndarray, str]:
    """Read a DMAT file; returns ``(matrix, dtype_name)`` with float64 entries."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError("dmat header: file truncated")
    magic, version, rows, cols, code = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise FormatError(f"dmat magic: expected {_MAGIC!r}, got {magic!r}")
    if version != _VERSION:
        raise FormatError(f"dmat version: unsupported version {version}")
    if code not in _NP_DTYPES:
        raise FormatError(f"dmat dtype: unknown code {code}")
    if rows < 1 or cols < 1:
        raise FormatError("dmat header: rows and cols must be >= 1")
    np_dtype = _NP_DTYPES[code]
    expected = _HEADER.size + rows * cols * np_dtype.itemsize
    if len(raw) != expected:
        raise FormatError(
            f"dmat payload: expected {expected} bytes total, file has {len(raw)}"
        )
    flat = np.frombuffer(raw, dtype=np_dtype, offset=_HEADER.size, count=rows * cols)
    name = "f32" if code == DTYPE_F32 else "f64"
    return flat.astype(np.float64).reshape(rows, cols), name
