"""Multi-adapter fusion: n low-rank updates in two matrix products.

Applying n adapters one at a time costs 2n small GEMMs.  Concatenating the
left factors column-wise and the right factors row-wise turns the cumulative
update into a single pair of products:

    delta_y = (x @ a_cat) @ b_cat = sum_i scale_i * (x @ a_i) @ b_i

Per-adapter scales are folded into the right factor at fuse time so the
apply path stays scale-free.  Adapters may have different ranks; ``offsets``
records where each adapter's rank slice begins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .linalg import as_matrix, matmul
from .residual import AdapterPair

__all__ = ["FusedAdapters", "fuse", "apply_fused", "apply_sequential", "forward"]


@dataclass(frozen=True)
class FusedAdapters:
    """Concatenated adapter factors; slice i spans columns/rows
    ``offsets[i] : offsets[i] + ranks[i]`` of ``a_cat`` / ``b_cat``."""

    a_cat: np.ndarray
    b_cat: np.ndarray
    offsets: np.ndarray
    ranks: np.ndarray

    @property
    def d_in(self) -> int:
        return self.a_cat.shape[0]

    @property
    def d_out(self) -> int:
        return self.b_cat.shape[1]

    @property
    def total_rank(self) -> int:
        return self.a_cat.shape[1]

    def extract(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Factor slices of adapter ``i``; the right factor carries its scale."""
        if not 0 <= i < self.offsets.size:
            raise DomainError(f"adapter index {i} out of range")
        lo = int(self.offsets[i])
        hi = lo + int(self.ranks[i])
        return self.a_cat[:, lo:hi], self.b_cat[lo:hi, :]


def fuse(adapters: list[AdapterPair]) -> FusedAdapters:
    """Concatenate adapter pairs along the rank dimension.

    All pairs must share ``d_in`` and ``d_out``; ranks may differ.  Each
    adapter's scale multiplies its rows of ``b_cat``.

    Raises
    ------
    DomainError
        For an empty list.
    ShapeError
        When the adapters disagree on outer dimensions.
    """
    if not adapters:
        raise DomainError("fuse requires at least one adapter")
    d_in = adapters[0].d_in
    d_out = adapters[0].d_out
    for i, ad in enumerate(adapters):
        if ad.d_in != d_in or ad.d_out != d_out:
            raise ShapeError(
                f"adapter {i} dims {(ad.d_in, ad.d_out)} != expected {(d_in, d_out)}"
            )
    ranks = np.array([ad.rank for ad in adapters], dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(ranks)[:-1]))
    a_cat = np.concatenate([ad.a for ad in adapters], axis=1)
    b_cat = np.concatenate([ad.scale * ad.b for ad in adapters], axis=0)
    return FusedAdapters(a_cat=a_cat, b_cat=b_cat, offsets=offsets, ranks=ranks)


def apply_fused(x, fused: FusedAdapters) -> np.ndarray:
    """Cumulative update ``(x @ a_cat) @ b_cat`` in exactly two products."""
    xm = as_matrix(x, "x")
    if xm.shape[1] != fused.d_in:
        raise ShapeError(f"x cols {xm.shape[1]} != adapter d_in {fused.d_in}")
    return matmul(matmul(xm, fused.a_cat), fused.b_cat)


def apply_sequential(x, adapters: list[AdapterPair]) -> np.ndarray:
    """Reference path: sum the per-adapter products one adapter at a time."""
    xm = as_matrix(x, "x")
    if not adapters:
        raise DomainError("apply_sequential requires at least one adapter")
    out = None
    for i, ad in enumerate(adapters):
        if xm.shape[1] != ad.d_in:
            raise ShapeError(f"x cols {xm.shape[1]} != adapter {i} d_in {ad.d_in}")
        term = ad.scale * matmul(matmul(xm, ad.a), ad.b)
        out = term if out is None else out + term
    return out


def forward(x, w_hat_or_dense, adapters: list[AdapterPair]) -> np.ndarray:
    """Full forward pass ``y = x @ W + delta_y`` over dense or encoded weights.

    ``w_hat_or_dense`` may be a dense array or a
    :class:`~salr.bitmap.BitmapSparseMatrix`; encoded weights are routed
    through the two-stage pipeline engine.  An empty adapter list means
    ``y = x @ W``.
    """
    from .bitmap import BitmapSparseMatrix

    xm = as_matrix(x, "x")
    if isinstance(w_hat_or_dense, BitmapSparseMatrix):
        from .pipeline import PipelineConfig, pipelined_forward, pipelined_matmul

        cfg = PipelineConfig()
        if not adapters:
            return pipelined_matmul(xm, w_hat_or_dense, cfg)
        return pipelined_forward(xm, w_hat_or_dense, fuse(adapters), cfg)
    base = matmul(xm, as_matrix(w_hat_or_dense, "w"))
    if not adapters:
        return base
    return base + apply_fused(xm, fuse(adapters))
