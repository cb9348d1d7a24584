"""Two-stage pipelined execution of y = x @ W over bitmap-encoded weights.

Stage 1 decodes byte-aligned tiles of the sparse matrix into dense blocks;
stage 2 multiplies each block into the output.  With overlap enabled the
stages run as two roles on separate threads connected by one bounded ring
buffer, so block b+1 decodes while block b multiplies; adapter updates are
computed on the compute thread while decoding is already in flight.

Numeric results never depend on the schedule: tiles are produced and
consumed in ascending tile index, and every output cell accumulates its
contributions in that fixed order, so serial and overlapped runs are
bit-identical.

Ring protocol: each slot cycles Empty -> Filled (decoder) -> Consumed ->
Empty (compute); the decoder blocks while its next slot is not Empty and
the compute role blocks while its next slot is not Filled.  Capacity of at
least two guarantees progress.  A probe object can inject stage delays and
record every slot transition for protocol audits.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .bitmap import BitmapSparseMatrix, decode_block
from .errors import ConfigError, DomainError, SalrError, ShapeError, VerificationError
from .fusion import FusedAdapters, apply_fused
from .linalg import RngState, as_matrix

__all__ = [
    "SlotState",
    "PipelineConfig",
    "PipelineProbe",
    "BenchResult",
    "pipelined_matmul",
    "pipelined_forward",
    "validate_transitions",
    "bench",
]


class SlotState(Enum):
    EMPTY = "empty"
    FILLED = "filled"
    CONSUMED = "consumed"


_LEGAL = {
    (SlotState.EMPTY, SlotState.FILLED),
    (SlotState.FILLED, SlotState.CONSUMED),
    (SlotState.CONSUMED, SlotState.EMPTY),
}

# A blocked ring wait longer than this is a protocol bug, not backpressure.
_WAIT_TIMEOUT = 120.0


@dataclass(frozen=True)
class PipelineConfig:
    """Tile and ring dimensions for the two-stage engine.

    ``tile_rows`` rows of the sparse matrix and ``tile_col_bytes`` bitmap
    bytes (8 columns each) per tile; ``ring_capacity`` decoded tiles may be
    in flight at once.  Overlap requires capacity of at least two.
    """

    tile_rows: int = 64
    tile_col_bytes: int = 8
    ring_capacity: int = 4
    overlap: bool = True

    def __post_init__(self):
        if self.tile_rows < 1 or self.tile_col_bytes < 1:
            raise ConfigError(
                f"tile dims must be positive, got "
                f"({self.tile_rows}, {self.tile_col_bytes})"
            )
        if self.ring_capacity < 1:
            raise ConfigError(f"ring_capacity must be >= 1, got {self.ring_capacity}")
        if self.overlap and self.ring_capacity < 2:
            raise ConfigError("overlap requires ring_capacity >= 2")


@dataclass
class PipelineProbe:
    """Fault-injection and audit hooks.

    ``decode_delay`` / ``compute_delay`` run once per tile inside the
    respective stage; with ``record`` set, every slot state transition is
    appended to ``transitions`` as ``(slot_index, old, new)``.
    """

    decode_delay: object = None
    compute_delay: object = None
    record: bool = False
    transitions: list = field(default_factory=list)
    produced: int = 0
    consumed: int = 0


class _Cancelled(Exception):
    """Internal: compute role failed; decoder must stop."""


class _Ring:
    """Bounded single-producer single-consumer tile buffer."""

    def __init__(self, capacity: int, probe: PipelineProbe | None):
        self._payload = [None] * capacity
        self._state = [SlotState.EMPTY] * capacity
        self._head = 0  # next slot the decoder fills
        self._tail = 0  # next slot the compute role drains
        self._cond = threading.Condition()
        self._probe = probe
        self._error: BaseException | None = None
        self._cancelled = False

    def _advance(self, idx: int, new: SlotState):
        old = self._state[idx]
        if (old, new) not in _LEGAL:
            raise SalrError(f"internal: illegal slot transition {old} -> {new}")
        self._state[idx] = new
        if self._probe is not None and self._probe.record:
            self._probe.transitions.append((idx, old, new))

    def _wait(self, ready) -> None:
        deadline = time.monotonic() + _WAIT_TIMEOUT
        while not ready():
            remaining = deadline - time.monotonic()
            if remaining <= 0.0 or not self._cond.wait(timeout=remaining):
                raise SalrError("internal: ring wait timed out")

    def put(self, item) -> None:
        with self._cond:
            self._wait(
                lambda: self._cancelled
                or self._state[self._head] is SlotState.EMPTY
            )
            if self._cancelled:
                raise _Cancelled()
            idx = self._head
            self._payload[idx] = item
            self._advance(idx, SlotState.FILLED)
            self._head = (idx + 1) % len(self._state)
            if self._probe is not None:
                self._probe.produced += 1
            self._cond.notify_all()

    def get(self):
        with self._cond:
            self._wait(
                lambda: self._error is not None
                or self._state[self._tail] is SlotState.FILLED
            )
            if self._error is not None and self._state[self._tail] is not SlotState.FILLED:
                raise self._error
            idx = self._tail
            self._advance(idx, SlotState.CONSUMED)
            self._tail = (idx + 1) % len(self._state)
            return idx, self._payload[idx]

    def release(self, idx: int) -> None:
        with self._cond:
            self._advance(idx, SlotState.EMPTY)
            self._payload[idx] = None
            if self._probe is not None:
                self._probe.consumed += 1
            self._cond.notify_all()

    def fail(self, exc: BaseException) -> None:
        with self._cond:
            self._error = exc
            self._cond.notify_all()

    def cancel(self) -> None:
        with self._cond:
            self._cancelled = True
            self._cond.notify_all()


def _tile_plan(s: BitmapSparseMatrix, cfg: PipelineConfig):
    """Tiles in ascending index order: row blocks outer, byte blocks inner."""
    row_edges = list(range(0, s.rows, cfg.tile_rows)) + [s.rows]
    byte_edges = list(range(0, s.bytes_per_row, cfg.tile_col_bytes)) + [
        s.bytes_per_row
    ]
    plan = []
    for r0, r1 in zip(row_edges[:-1], row_edges[1:]):
        for b0, b1 in zip(byte_edges[:-1], byte_edges[1:]):
            plan.append((r0, r1, b0, b1))
    return plan


def _decode_tile(s, r0, r1, b0, b1, probe):
    tile = decode_block(s, (r0, r1), (b0, b1))
    if probe is not None and probe.decode_delay is not None:
        probe.decode_delay()
    return tile


def _multiply_tile(out, x, s, tile, r0, r1, b0, b1, probe):
    c0 = 8 * b0
    c1 = min(8 * b1, s.cols)
    np.add(out[:, c0:c1], x[:, r0:r1] @ tile, out=out[:, c0:c1])
    if probe is not None and probe.compute_delay is not None:
        probe.compute_delay()


def _accumulated_tiles(
    x: np.ndarray,
    s: BitmapSparseMatrix,
    cfg: PipelineConfig,
    probe: PipelineProbe | None,
) -> np.ndarray:
    """Sum of tile products into a fresh output buffer, fixed tile order."""
    out = np.zeros((x.shape[0], s.cols), dtype=np.float64)
    plan = _tile_plan(s, cfg)
    if not cfg.overlap:
        for r0, r1, b0, b1 in plan:
            tile = _decode_tile(s, r0, r1, b0, b1, probe)
            _multiply_tile(out, x, s, tile, r0, r1, b0, b1, probe)
        return out

    ring = _Ring(cfg.ring_capacity, probe)

    def decoder():
        try:
            for t, (r0, r1, b0, b1) in enumerate(plan):
                tile = _decode_tile(s, r0, r1, b0, b1, probe)
                ring.put((t, r0, r1, b0, b1, tile))
        except _Cancelled:
            pass
        except BaseException as exc:  # propagate into the compute role
            ring.fail(exc)

    worker = threading.Thread(target=decoder, name="salr-decoder", daemon=True)
    worker.start()
    try:
        for expected in range(len(plan)):
            idx, (t, r0, r1, b0, b1, tile) = ring.get()
            if t != expected:
                raise SalrError(f"internal: tile {t} arrived out of order")
            _multiply_tile(out, x, s, tile, r0, r1, b0, b1, probe)
            ring.release(idx)
    except BaseException:
        ring.cancel()
        worker.join()
        raise
    worker.join()
    return out


def pipelined_matmul(
    x,
    s: BitmapSparseMatrix,
    cfg: PipelineConfig,
    probe: PipelineProbe | None = None,
) -> np.ndarray:
    """Compute ``x @ decode(s)`` tile by tile through the two-stage engine.

    The result is independent of tile sizes, ring capacity, and the overlap
    flag; serial and overlapped schedules produce bit-identical outputs.
    """
    xm = as_matrix(x, "x")
    if xm.shape[1] != s.rows:
        raise ShapeError(f"x cols {xm.shape[1]} != sparse rows {s.rows}")
    return _accumulated_tiles(xm, s, cfg, probe)


def pipelined_forward(
    x,
    s: BitmapSparseMatrix,
    fused: FusedAdapters,
    cfg: PipelineConfig,
    probe: PipelineProbe | None = None,
) -> np.ndarray:
    """Full forward pass ``y = x @ decode(s) + (x @ a_cat) @ b_cat``.

    In overlap mode the adapter product runs on the compute thread while the
    decoder is already filling the ring.  Both modes form the same final sum
    ``tiles + delta``, so outputs stay bit-identical across schedules and
    equal ``pipelined_matmul(x, s, cfg) + apply_fused(x, fused)`` exactly.
    """
    xm = as_matrix(x, "x")
    if xm.shape[1] != s.rows:
        raise ShapeError(f"x cols {xm.shape[1]} != sparse rows {s.rows}")
    if fused.d_in != s.rows or fused.d_out != s.cols:
        raise ShapeError(
            f"fused adapter dims {(fused.d_in, fused.d_out)} != weight dims "
            f"{(s.rows, s.cols)}"
        )
    if not cfg.overlap:
        delta = apply_fused(xm, fused)
        return _accumulated_tiles(xm, s, cfg, probe) + delta

    ring = _Ring(cfg.ring_capacity, probe)
    plan = _tile_plan(s, cfg)
    out = np.zeros((xm.shape[0], s.cols), dtype=np.float64)

    def decoder():
        try:
            for t, (r0, r1, b0, b1) in enumerate(plan):
                tile = _decode_tile(s, r0, r1, b0, b1, probe)
                ring.put((t, r0, r1, b0, b1, tile))
        except _Cancelled:
            pass
        except BaseException as exc:
            ring.fail(exc)

    worker = threading.Thread(target=decoder, name="salr-decoder", daemon=True)
    worker.start()
    try:
        # Adapter product overlaps with decoding already in flight.
        delta = apply_fused(xm, fused)
        for expected in range(len(plan)):
            idx, (t, r0, r1, b0, b1, tile) = ring.get()
            if t != expected:
                raise SalrError(f"internal: tile {t} arrived out of order")
            _multiply_tile(out, xm, s, tile, r0, r1, b0, b1, probe)
            ring.release(idx)
    except BaseException:
        ring.cancel()
        worker.join()
        raise
    worker.join()
    return out + delta


def validate_transitions(probe: PipelineProbe, capacity: int) -> None:
    """Audit a recorded transition log against the slot protocol.

    Checks that every slot's history cycles Empty -> Filled -> Consumed ->
    Empty with no skipped or repeated states, that no slot history ends
    mid-cycle, and that produced equals consumed.

    Raises
    ------
    VerificationError
        On the first violated rule.
    """
    if probe.produced != probe.consumed:
        raise VerificationError(
            f"produced {probe.produced} != consumed {probe.consumed}"
        )
    states = [SlotState.EMPTY] * capacity
    for step, (idx, old, new) in enumerate(probe.transitions):
        if not 0 <= idx < capacity:
            raise VerificationError(f"step {step}: slot index {idx} out of range")
        if states[idx] is not old:
            raise VerificationError(
                f"step {step}: slot {idx} was {states[idx]}, transition claims {old}"
            )
        if (old, new) not in _LEGAL:
            raise VerificationError(
                f"step {step}: illegal transition {old} -> {new} on slot {idx}"
            )
        states[idx] = new
    for idx, st in enumerate(states):
        if st is not SlotState.EMPTY:
            raise VerificationError(f"slot {idx} left in state {st} at shutdown")
    fills = sum(1 for _, old, _ in probe.transitions if old is SlotState.EMPTY)
    if fills != probe.produced:
        raise VerificationError(
            f"recorded fills {fills} != produced count {probe.produced}"
        )


@dataclass(frozen=True)
class BenchResult:
    serial_s: float
    overlapped_s: float
    speedup: float


def bench(
    x_shape: tuple[int, int],
    s: BitmapSparseMatrix,
    cfg: PipelineConfig,
    repeats: int = 5,
    seed: int = 0,
) -> BenchResult:
    """Median wall times of the serial and overlapped schedules.

    Generates a seeded Gaussian input of ``x_shape``, verifies the two
    schedules produce identical outputs (bit-for-bit), runs one untimed
    warm-up per mode, then times ``repeats`` runs each and reports medians
    and their ratio.  No claim is made about absolute throughput.

    Raises
    ------
    DomainError
        For fewer than 3 repeats.
    VerificationError
        If the correctness gate fails.
    """
    if repeats < 3:
        raise DomainError("repeats must be >= 3")
    x = RngState(seed).gaussian_matrix(x_shape[0], x_shape[1], 1.0)
    serial_cfg = PipelineConfig(
        tile_rows=cfg.tile_rows,
        tile_col_bytes=cfg.tile_col_bytes,
        ring_capacity=cfg.ring_capacity,
        overlap=False,
    )
    overlap_cfg = PipelineConfig(
        tile_rows=cfg.tile_rows,
        tile_col_bytes=cfg.tile_col_bytes,
        ring_capacity=max(cfg.ring_capacity, 2),
        overlap=True,
    )
    gate_serial = pipelined_matmul(x, s, serial_cfg)
    gate_overlap = pipelined_matmul(x, s, overlap_cfg)
    if not np.array_equal(gate_serial, gate_overlap):
        raise VerificationError("serial and overlapped outputs differ")

    def timed(mode_cfg):
        pipelined_matmul(x, s, mode_cfg)  # warm-up, untimed
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            pipelined_matmul(x, s, mode_cfg)
            times.append(time.perf_counter() - t0)
        return float(np.median(times))

    serial_s = timed(serial_cfg)
    overlapped_s = timed(overlap_cfg)
    return BenchResult(
        serial_s=serial_s,
        overlapped_s=overlapped_s,
        speedup=serial_s / overlapped_s,
    )
