"""Low-rank residual adapters for pruned matrices.

After pruning W down to W_hat, the lost information E = W - W_hat can be
partially recovered by a truncated-SVD factor pair (A, B) with A*B the best
rank-r approximation of E.  This module builds those adapters, verifies the
per-entry error bound that motivates them, reports singular-value energy
spectra, and fine-tunes a dense correction M against calibration data
(X, Y) by gradient descent on the quadratic loss

    L(M) = 0.5 * ||X M - R||_F^2,    R = Y - X (W_hat + scale * A B)

whose gradient is X^T (X M - R), Lipschitz constant sigma_max(X)^2, and
optimal fixed step 1 / sigma_max(X)^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, DomainError, ShapeError, VerificationError
from .linalg import SvdResult, as_matrix, matmul, power_iteration_sigma_max, svd

__all__ = [
    "AdapterPair",
    "SpectrumReport",
    "StepSizeMode",
    "ResidualTrainConfig",
    "build_residual_adapter",
    "truncation_error_bound",
    "spectrum",
    "optimal_step_size",
    "lipschitz_constant",
    "residual_loss",
    "residual_gradient",
    "train_residual",
]

# Singular values below this fraction of sigma_max count as numerically zero.
SV_CUTOFF_REL = 1e-12


@dataclass(frozen=True)
class AdapterPair:
    """Low-rank factor pair; the effective update is ``scale * (a @ b)``."""

    a: np.ndarray
    b: np.ndarray
    rank: int
    scale: float = 1.0

    def __post_init__(self):
        a = as_matrix(self.a, "a")
        b = as_matrix(self.b, "b")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if self.rank < 1:
            raise DomainError(f"rank must be >= 1, got {self.rank}")
        if a.shape[1] != self.rank or b.shape[0] != self.rank:
            raise ShapeError(
                f"factor shapes {a.shape} x {b.shape} do not match rank {self.rank}"
            )
        if self.rank > min(a.shape[0], b.shape[1]):
            raise DomainError(
                f"rank {self.rank} exceeds min(d_in, d_out) = "
                f"{min(a.shape[0], b.shape[1])}"
            )

    @property
    def d_in(self) -> int:
        return self.a.shape[0]

    @property
    def d_out(self) -> int:
        return self.b.shape[1]

    def delta(self) -> np.ndarray:
        """Materialize the dense update ``scale * a @ b``."""
        return self.scale * matmul(self.a, self.b)


@dataclass(frozen=True)
class SpectrumReport:
    """Normalized cumulative singular-value energy of a matrix.

    ``cumulative_energy[i]`` is the fraction of squared Frobenius norm carried
    by the ``i + 1`` leading singular values; ``i99`` is the smallest count of
    singular values whose energy fraction reaches at least 0.99.
    """

    singular_values: np.ndarray
    cumulative_energy: np.ndarray
    i99: int


class StepSizeMode(Enum):
    AUTO = "auto"
    AUTO_HALF = "auto-half"
    FIXED = "fixed"


@dataclass(frozen=True)
class ResidualTrainConfig:
    """Gradient-descent settings for :func:`train_residual`.

    ``AUTO`` uses the optimal step ``1/sigma_max(X)^2`` estimated by power
    iteration, ``AUTO_HALF`` (the default) uses half of it, and ``FIXED``
    uses ``step_size`` verbatim after checking it sits strictly below the
    divergence threshold ``2/sigma_max(X)^2``.
    """

    step_size_mode: StepSizeMode = StepSizeMode.AUTO_HALF
    step_size: float | None = None
    max_iters: int = 500
    grad_tol: float = 1e-8
    power_iters: int = 50

    def __post_init__(self):
        if self.step_size_mode is StepSizeMode.FIXED:
            if self.step_size is None or self.step_size <= 0.0:
                raise ConfigError("FIXED mode requires step_size > 0")
        elif self.step_size is not None:
            raise ConfigError("step_size is only meaningful in FIXED mode")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be >= 0")
        if self.grad_tol < 0.0:
            raise ConfigError("grad_tol must be >= 0")
        if self.power_iters < 1:
            raise ConfigError("power_iters must be >= 1")


# ---------------------------------------------------------------------------
# truncated-SVD adapters


def _checked_svd(e: np.ndarray, svd_result: SvdResult | None) -> SvdResult:
    if svd_result is None:
        return svd(e)
    q = min(e.shape)
    if svd_result.u.shape != (e.shape[0], q) or svd_result.vt.shape != (q, e.shape[1]):
        raise ShapeError("supplied svd_result does not match the matrix shape")
    return svd_result


def build_residual_adapter(
    w, w_hat, rank: int, *, svd_result: SvdResult | None = None
) -> AdapterPair:
    """Best rank-``rank`` factorization of the residual ``E = w - w_hat``.

    Returns ``AdapterPair(a, b)`` with ``a = U_r diag(s_r)`` and ``b = Vt_r``
    so that ``a @ b`` is the closest rank-``rank`` matrix to E in Frobenius
    norm.  Singular values below ``1e-12 * sigma_max`` are zeroed for
    numerical-rank stability.  ``svd_result`` may carry a precomputed SVD of
    E to avoid refactorizing; it is shape-checked, trusted otherwise.
    """
    wm = as_matrix(w, "w")
    wh = as_matrix(w_hat, "w_hat")
    if wm.shape != wh.shape:
        raise ShapeError(f"w shape {wm.shape} != w_hat shape {wh.shape}")
    q = min(wm.shape)
    if not 1 <= rank <= q:
        raise DomainError(f"rank must be in [1, {q}], got {rank}")
    e = wm - wh
    res = _checked_svd(e, svd_result)
    s = res.s[:rank].copy()
    cutoff = SV_CUTOFF_REL * (res.s[0] if res.s.size else 0.0)
    s[s < cutoff] = 0.0
    a = res.u[:, :rank] * s
    b = res.vt[:rank, :].copy()
    b[s == 0.0, :] = 0.0
    return AdapterPair(a=a, b=b, rank=rank)


def truncation_error_bound(
    e, rank: int, *, svd_result: SvdResult | None = None
) -> tuple[float, float]:
    """Per-entry error of the best rank-``rank`` approximation and its bound.

    Returns ``(lhs, rhs)`` where ``lhs = ||E - E_r||_F^2 / (d k)`` (the tail
    sum of squared singular values divided by the entry count) and
    ``rhs = (1 - rank/q) * ||E||_F^2 / (d k)`` with ``q = min(d, k)``.  The
    bound holds deterministically: the ``q - rank`` smallest squared singular
    values are each at most their own mean, hence at most the global mean.

    Raises
    ------
    VerificationError
        If ``lhs`` exceeds ``rhs`` beyond float rounding slack.
    """
    em = as_matrix(e, "e")
    q = min(em.shape)
    if not 1 <= rank <= q:
        raise DomainError(f"rank must be in [1, {q}], got {rank}")
    res = _checked_svd(em, svd_result)
    sq = res.s * res.s
    n = em.shape[0] * em.shape[1]
    lhs = float(sq[rank:].sum()) / n
    rhs = (1.0 - rank / q) * float(sq.sum()) / n
    if lhs > rhs * (1.0 + 1e-12) + 1e-300:
        raise VerificationError(
            f"rank-{rank} truncation error {lhs} exceeds bound {rhs}"
        )
    return lhs, rhs


def spectrum(e, *, svd_result: SvdResult | None = None) -> SpectrumReport:
    """Cumulative singular-value energy fractions of a nonzero matrix.

    Raises
    ------
    DomainError
        For an all-zero matrix (the normalization is undefined).
    """
    em = as_matrix(e, "e")
    res = _checked_svd(em, svd_result)
    sq = res.s * res.s
    total = float(sq.sum())
    if total == 0.0:
        raise DomainError("spectrum is undefined for a zero matrix")
    cum = np.cumsum(sq) / total
    i99 = int(np.searchsorted(cum, 0.99, side="left")) + 1
    return SpectrumReport(singular_values=res.s.copy(), cumulative_energy=cum, i99=i99)


# ---------------------------------------------------------------------------
# gradient descent on the calibration loss


def lipschitz_constant(x) -> float:
    """Gradient Lipschitz constant of the loss: ``sigma_max(X)^2`` via full SVD."""
    xm = as_matrix(x, "x")
    s = svd(xm).s
    return float(s[0] * s[0])


def optimal_step_size(x, power_iters: int = 50) -> float:
    """Optimal fixed step ``1 / sigma_max(X)^2`` using power iteration.

    Raises
    ------
    DomainError
        For a zero matrix (no finite step exists).
    """
    if power_iters < 1:
        raise DomainError("power_iters must be >= 1")
    xm = as_matrix(x, "x")
    smax = power_iteration_sigma_max(xm, iters=power_iters)
    if smax == 0.0:
        raise DomainError("step size undefined for zero X")
    return 1.0 / (smax * smax)


def _check_train_shapes(x, m, r_target):
    xm = as_matrix(x, "x")
    mm = as_matrix(m, "m")
    rm = as_matrix(r_target, "r_target")
    if xm.shape[1] != mm.shape[0]:
        raise ShapeError(f"x cols {xm.shape[1]} != m rows {mm.shape[0]}")
    if rm.shape != (xm.shape[0], mm.shape[1]):
        raise ShapeError(
            f"r_target shape {rm.shape} != expected {(xm.shape[0], mm.shape[1])}"
        )
    return xm, mm, rm


def residual_loss(x, m, r_target) -> float:
    """Quadratic calibration loss ``0.5 * ||X M - R||_F^2``."""
    xm, mm, rm = _check_train_shapes(x, m, r_target)
    diff = matmul(xm, mm) - rm
    return 0.5 * float(np.sum(diff * diff))


def residual_gradient(x, m, r_target) -> np.ndarray:
    """Gradient of the calibration loss: ``X^T (X M - R)``."""
    xm, mm, rm = _check_train_shapes(x, m, r_target)
    return matmul(xm.T, matmul(xm, mm) - rm)


def train_residual(
    x,
    y,
    w_hat_dense,
    lora: AdapterPair,
    m0,
    cfg: ResidualTrainConfig,
    final_rank: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Fit a dense correction M by gradient descent on the calibration loss.

    The regression target is ``R = y - x @ (w_hat_dense + lora.delta())``:
    whatever the pruned weights plus the adapter cannot explain.  Starting
    from ``m0``, iterates ``M <- M - eta * X^T (X M - R)`` until the gradient
    Frobenius norm drops to ``cfg.grad_tol`` or ``cfg.max_iters`` steps.

    Returns ``(m, loss_trace)``; the trace holds the loss before the first
    step and after each step, and is nonincreasing whenever the step stays
    at or below the optimal ``1/sigma_max(X)^2``.  If ``final_rank`` is set,
    the returned M is re-truncated to that rank through the adapter build
    path (its loss is not re-evaluated in the trace).

    Raises
    ------
    ConfigError
        Before iterating, if a FIXED step is not strictly below the
        divergence threshold ``2 / sigma_max(X)^2``.
    """
    xm = as_matrix(x, "x")
    ym = as_matrix(y, "y")
    wh = as_matrix(w_hat_dense, "w_hat_dense")
    if lora.d_in != wh.shape[0] or lora.d_out != wh.shape[1]:
        raise ShapeError(
            f"adapter dims {(lora.d_in, lora.d_out)} != weight shape {wh.shape}"
        )
    r_target = ym - matmul(xm, wh + lora.delta())
    m = as_matrix(m0, "m0").copy()
    _check_train_shapes(xm, m, r_target)

    # Step size is resolved once per call, never per step.
    if cfg.step_size_mode is StepSizeMode.FIXED:
        # The divergence gate needs sigma_max exactly, so it goes through the
        # full factorization instead of the power-iteration estimate.
        lip = lipschitz_constant(xm)
        if lip > 0.0 and cfg.step_size >= 2.0 / lip:
            raise ConfigError(
                f"fixed step {cfg.step_size} >= divergence threshold {2.0 / lip}"
            )
        eta = cfg.step_size
    else:
        smax = power_iteration_sigma_max(xm, iters=cfg.power_iters)
        if smax == 0.0:
            raise DomainError("step size undefined for zero X")
        eta = 1.0 / (smax * smax)
        if cfg.step_size_mode is StepSizeMode.AUTO_HALF:
            eta *= 0.5

    trace = [residual_loss(xm, m, r_target)]
    for _ in range(cfg.max_iters):
        grad = residual_gradient(xm, m, r_target)
        if float(np.sqrt(np.sum(grad * grad))) <= cfg.grad_tol:
            break
        m -= eta * grad
        trace.append(residual_loss(xm, m, r_target))

    if final_rank is not None:
        pair = build_residual_adapter(m, np.zeros_like(m), final_rank)
        m = matmul(pair.a, pair.b)
    return m, np.asarray(trace)
