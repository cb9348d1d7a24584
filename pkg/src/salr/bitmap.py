"""Bit-exact bitmap encoding of pruned matrices and the SALR container.

A pruned matrix is stored as a per-entry presence bitmap plus a compact
array of the surviving values in row-major order.  Each row's bitmap is
padded to whole bytes; bit ``t`` of byte ``b`` covers column ``8*b + t``
(little-endian within the byte), so the byte value is ``sum_t bit_t * 2^t``.

Decoding walks bytes, not entries: a 256 x 8 lookup table maps a byte mask
to the local index of each set bit among the byte's survivors (-1 for
cleared bits), and an exclusive running sum of per-byte popcounts supplies
each byte's global offset into the value array.  The same two structures
let :func:`decode_block` materialize any byte-aligned tile directly.

Storage is float32; zeros are canonical (a kept value equal to 0.0 is
re-encoded as a cleared bit, and -0.0 normalizes to +0.0), which makes
encode/decode exact mutual inverses.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, CorruptionError, FormatError, ShapeError
from .linalg import as_matrix
from .prune import kept_count
from .residual import AdapterPair

__all__ = [
    "DTYPE_F32",
    "popcount8",
    "build_lut",
    "BitmapSparseMatrix",
    "encode",
    "decode",
    "decode_block",
    "write_container",
    "read_container",
    "header_bytes",
    "container_size_bytes",
    "compression_ratio",
]

DTYPE_F32 = 0  # the only stored precision; code 1 is reserved for f16

_MAGIC = b"SALR"
_VERSION = 1
_FIXED_HEADER = struct.Struct("<4sHIIBH")  # magic, version, rows, cols, dtype, n
_ADAPTER_HEADER = struct.Struct("<If")  # rank, scale
_OFFSETS = struct.Struct("<QQQ")  # bitmap, values, adapters

_POPCOUNT = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).sum(
    axis=1
).astype(np.int64)


def popcount8(m: int) -> int:
    """Number of set bits in one byte value."""
    if not 0 <= m <= 255:
        raise BoundsError(f"byte value out of range: {m}")
    return int(_POPCOUNT[m])


def build_lut() -> np.ndarray:
    """256 x 8 decode table.

    ``table[m, t]`` is the rank of bit ``t`` among the set bits of mask
    ``m`` (counting from 0 in increasing bit order) when that bit is set,
    and -1 when it is clear.
    """
    table = np.full((256, 8), -1, dtype=np.int8)
    for m in range(256):
        c = 0
        for t in range(8):
            if (m >> t) & 1:
                table[m, t] = c
                c += 1
    return table


_LUT = build_lut()


@dataclass
class BitmapSparseMatrix:
    """Bitmap + compact value array for one pruned matrix.

    ``bitmap`` has shape ``(rows, ceil(cols/8))`` dtype uint8; ``values``
    holds the nonzero entries as float32 in row-major set-bit order.
    Padding bits beyond ``cols`` must be zero.  The per-byte value offsets
    used by block decoding are derived lazily and cached.
    """

    rows: int
    cols: int
    bitmap: np.ndarray
    values: np.ndarray
    dtype_code: int = DTYPE_F32
    _byte_starts: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ShapeError(f"invalid dims {(self.rows, self.cols)}")
        bpr = bytes_per_row(self.cols)
        self.bitmap = np.ascontiguousarray(self.bitmap, dtype=np.uint8)
        if self.bitmap.shape != (self.rows, bpr):
            raise ShapeError(
                f"bitmap shape {self.bitmap.shape} != expected {(self.rows, bpr)}"
            )
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.values.ndim != 1:
            raise ShapeError("values must be one-dimensional")
        if self.dtype_code != DTYPE_F32:
            raise FormatError(f"unsupported dtype code {self.dtype_code}")
        pad = 8 * bpr - self.cols
        if pad and np.any(self.bitmap[:, -1] >> (8 - pad)):
            raise CorruptionError("padding bits beyond cols are not zero")
        total = int(_POPCOUNT[self.bitmap].sum())
        if total != self.values.size:
            raise CorruptionError(
                f"bitmap popcount {total} != values length {self.values.size}"
            )

    @property
    def nnz(self) -> int:
        return self.values.size

    @property
    def bytes_per_row(self) -> int:
        return self.bitmap.shape[1]

    def byte_starts(self) -> np.ndarray:
        """Exclusive running sum of per-byte popcounts, row-major, cached."""
        if self._byte_starts is None:
            counts = _POPCOUNT[self.bitmap].ravel()
            starts = np.zeros(counts.size, dtype=np.int64)
            np.cumsum(counts[:-1], out=starts[1:])
            self._byte_starts = starts.reshape(self.bitmap.shape)
        return self._byte_starts


def bytes_per_row(cols: int) -> int:
    return (cols + 7) // 8


def encode(m) -> BitmapSparseMatrix:
    """Encode a dense matrix; exact zeros (after float32 cast) are pruned.

    The matrix is cast to float32 first so the bitmap always agrees with the
    stored values: an entry that only becomes zero in single precision is
    treated as pruned, and -0.0 normalizes to +0.0.
    """
    dense = as_matrix(m, "m")
    rows, cols = dense.shape
    m32 = dense.astype(np.float32) + np.float32(0.0)
    keep = m32 != np.float32(0.0)
    bpr = bytes_per_row(cols)
    bits = np.zeros((rows, 8 * bpr), dtype=np.uint8)
    bits[:, :cols] = keep
    bitmap = np.packbits(bits, axis=1, bitorder="little")
    return BitmapSparseMatrix(rows=rows, cols=cols, bitmap=bitmap, values=m32[keep])


def decode(s: BitmapSparseMatrix) -> np.ndarray:
    """Exact inverse of :func:`encode` (float64 output holding f32 values).

    Byte-driven: local in-byte indices come from the lookup table and the
    global value offset of every byte from the cached popcount prefix sums;
    set positions gather from ``values`` in one shot.
    """
    local = _LUT[s.bitmap.ravel()]  # (nbytes, 8), -1 where bit clear
    gidx = s.byte_starts().reshape(-1, 1) + local
    set_bits = local >= 0
    padded = np.zeros((s.rows, 8 * s.bytes_per_row), dtype=np.float64)
    padded.reshape(-1, 8)[set_bits] = s.values[gidx[set_bits]]
    return padded[:, : s.cols]


def decode_block(s: BitmapSparseMatrix, row_range, byte_block_range) -> np.ndarray:
    """Dense tile for rows ``[r0, r1)`` and byte blocks ``[b0, b1)``.

    Columns covered are ``8*b0`` up to ``min(8*b1, cols)``; the tile equals
    the same slice of :func:`decode`.  Empty ranges yield empty tiles.

    Raises
    ------
    BoundsError
        If either range runs outside the matrix.
    """
    r0, r1 = row_range
    b0, b1 = byte_block_range
    bpr = s.bytes_per_row
    if not (0 <= r0 <= r1 <= s.rows and 0 <= b0 <= b1 <= bpr):
        raise BoundsError(
            f"block rows {row_range} bytes {byte_block_range} outside "
            f"{(s.rows, bpr)}"
        )
    col_hi = min(8 * b1, s.cols)
    n_cols = max(col_hi - 8 * b0, 0)
    if r1 == r0 or b1 == b0 or n_cols == 0:
        return np.zeros((r1 - r0, n_cols), dtype=np.float64)
    sub = s.bitmap[r0:r1, b0:b1]
    local = _LUT[sub.ravel()]
    gidx = s.byte_starts()[r0:r1, b0:b1].reshape(-1, 1) + local
    set_bits = local >= 0
    padded = np.zeros((r1 - r0, 8 * (b1 - b0)), dtype=np.float64)
    padded.reshape(-1, 8)[set_bits] = s.values[gidx[set_bits]]
    return padded[:, :n_cols]


# ---------------------------------------------------------------------------
# container serialization


def header_bytes(n_adapters: int) -> int:
    """Container header size: fixed fields + per-adapter entries + offsets."""
    return _FIXED_HEADER.size + n_adapters * _ADAPTER_HEADER.size + _OFFSETS.size


def container_size_bytes(rows: int, cols: int, nnz: int, adapter_ranks) -> int:
    """Exact file size of a container with these dims, nnz, and adapter ranks."""
    ranks = list(adapter_ranks)
    adapter_params = sum(r * (rows + cols) for r in ranks)
    return (
        header_bytes(len(ranks))
        + rows * bytes_per_row(cols)
        + 4 * nnz
        + 4 * adapter_params
    )


def write_container(path, s: BitmapSparseMatrix, adapters: list[AdapterPair]) -> int:
    """Serialize matrix plus adapters; returns the byte count written.

    Layout (little-endian throughout): fixed header, per-adapter (rank,
    scale) entries, three u64 section offsets, then the bitmap, value, and
    adapter-factor sections.  Factors are stored as float32 row-major, A
    before B per adapter.  Adapter dims must match the matrix dims.
    """
    for i, ad in enumerate(adapters):
        if ad.d_in != s.rows or ad.d_out != s.cols:
            raise ShapeError(
                f"adapter {i} dims {(ad.d_in, ad.d_out)} != matrix "
                f"{(s.rows, s.cols)}"
            )
    bitmap_off = header_bytes(len(adapters))
    values_off = bitmap_off + s.bitmap.size
    adapters_off = values_off + 4 * s.nnz
    blob = bytearray()
    blob += _FIXED_HEADER.pack(
        _MAGIC, _VERSION, s.rows, s.cols, s.dtype_code, len(adapters)
    )
    for ad in adapters:
        blob += _ADAPTER_HEADER.pack(ad.rank, ad.scale)
    blob += _OFFSETS.pack(bitmap_off, values_off, adapters_off)
    blob += s.bitmap.tobytes()
    blob += s.values.astype("<f4").tobytes()
    for ad in adapters:
        blob += ad.a.astype("<f4").tobytes()
        blob += ad.b.astype("<f4").tobytes()
    expect = container_size_bytes(s.rows, s.cols, s.nnz, [a.rank for a in adapters])
    if len(blob) != expect:
        raise FormatError(f"serialized size {len(blob)} != accounted {expect}")
    with open(path, "wb") as fh:
        fh.write(blob)
    return len(blob)


def _take(blob: bytes, off: int, n: int, section: str) -> bytes:
    if off + n > len(blob):
        raise FormatError(f"{section}: truncated (need {off + n}, have {len(blob)})")
    return blob[off : off + n]


def read_container(path) -> tuple[BitmapSparseMatrix, list[AdapterPair]]:
    """Parse a container; exact inverse of :func:`write_container`.

    Raises
    ------
    FormatError
        Bad magic, version, dtype code, offsets, or truncation; the message
        names the offending section.
    CorruptionError
        Bitmap popcount disagreeing with the value count.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    magic, version, rows, cols, dtype_code, n_adapters = _FIXED_HEADER.unpack(
        _take(blob, 0, _FIXED_HEADER.size, "fixed header")
    )
    if magic != _MAGIC:
        raise FormatError(f"magic: expected {_MAGIC!r}, got {magic!r}")
    if version != _VERSION:
        raise FormatError(f"version: expected {_VERSION}, got {version}")
    if dtype_code != DTYPE_F32:
        raise FormatError(f"dtype: code {dtype_code} not supported (0 = f32 only)")
    if rows < 1 or cols < 1:
        raise FormatError(f"dims: invalid {(rows, cols)}")
    pos = _FIXED_HEADER.size
    meta = []
    for i in range(n_adapters):
        rank, scale = _ADAPTER_HEADER.unpack(
            _take(blob, pos, _ADAPTER_HEADER.size, f"adapter {i} header")
        )
        if not 1 <= rank <= min(rows, cols):
            raise FormatError(f"adapter {i} header: rank {rank} out of range")
        meta.append((rank, scale))
        pos += _ADAPTER_HEADER.size
    bitmap_off, values_off, adapters_off = _OFFSETS.unpack(
        _take(blob, pos, _OFFSETS.size, "section offsets")
    )
    pos += _OFFSETS.size
    if bitmap_off != pos or not bitmap_off <= values_off <= adapters_off:
        raise FormatError(
            f"section offsets: non-monotone or misplaced "
            f"({bitmap_off}, {values_off}, {adapters_off})"
        )
    bpr = bytes_per_row(cols)
    if values_off - bitmap_off != rows * bpr:
        raise FormatError(
            f"bitmap section: size {values_off - bitmap_off} != {rows * bpr}"
        )
    bitmap = np.frombuffer(
        _take(blob, bitmap_off, rows * bpr, "bitmap section"), dtype=np.uint8
    ).reshape(rows, bpr).copy()
    nnz = int(_POPCOUNT[bitmap].sum())
    if values_off + 4 * nnz != adapters_off:
        raise CorruptionError(
            f"values section size {adapters_off - values_off} != 4 * popcount "
            f"{4 * nnz}"
        )
    values = np.frombuffer(
        _take(blob, values_off, 4 * nnz, "values section"), dtype="<f4"
    ).astype(np.float32)
    s = BitmapSparseMatrix(rows=rows, cols=cols, bitmap=bitmap, values=values)
    adapters = []
    pos = adapters_off
    for i, (rank, scale) in enumerate(meta):
        na, nb = 4 * rows * rank, 4 * rank * cols
        a = np.frombuffer(
            _take(blob, pos, na, f"adapter {i} A factor"), dtype="<f4"
        ).astype(np.float64).reshape(rows, rank)
        pos += na
        b = np.frombuffer(
            _take(blob, pos, nb, f"adapter {i} B factor"), dtype="<f4"
        ).astype(np.float64).reshape(rank, cols)
        pos += nb
        adapters.append(AdapterPair(a=a, b=b, rank=rank, scale=scale))
    if pos != len(blob):
        raise FormatError(f"trailing bytes: file has {len(blob) - pos} extra")
    return s, adapters


def compression_ratio(
    d: int, k: int, p: float, bytes_per_value: int, adapter_params: int,
    n_adapters: int = 0,
) -> float:
    """Dense size over compressed size for a d x k matrix at sparsity p.

    Compressed size counts the kept values (exact order-statistics count),
    one bitmap bit per entry rounded up to bytes per row, adapter parameters
    at the same value width, and the container header.
    """
    if d < 1 or k < 1:
        raise ShapeError(f"invalid dims {(d, k)}")
    nnz = kept_count(p, d * k)
    dense = d * k * bytes_per_value
    compressed = (
        nnz * bytes_per_value
        + d * bytes_per_row(k)
        + adapter_params * bytes_per_value
        + header_bytes(n_adapters)
    )
    return dense / compressed
