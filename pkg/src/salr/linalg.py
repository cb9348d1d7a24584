"""Dense linear algebra kernels: matmul, one-sided Jacobi SVD, power iteration,
standard-normal distribution functions, and a deterministic Gaussian sampler.

All public operations accept and return 2-D ``float64`` arrays in row-major
order.  Accumulation is always performed in double precision.  The module also
keeps a thread-safe counter of matrix products so callers can assert how many
GEMMs a code path issued.

Determinism notes
-----------------
* :func:`svd` is a cyclic one-sided Jacobi with a fixed round-robin rotation
  schedule, so the result depends only on the input bytes.
* :class:`RngState` draws from a counter-based Philox stream and maps uniforms
  through the Box-Muller transform; an identical seed therefore reproduces an
  identical sample stream.
* :func:`power_iteration_sigma_max` starts from a fixed seeded vector.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SalrError, ShapeError

__all__ = [
    "as_matrix",
    "matmul",
    "matmul_call_count",
    "reset_matmul_count",
    "SvdResult",
    "svd",
    "power_iteration_sigma_max",
    "normal_pdf",
    "normal_cdf",
    "normal_quantile",
    "RngState",
    "sample_gaussian_matrix",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# validation


def as_matrix(x, name: str = "matrix", require_finite: bool = True) -> np.ndarray:
    """Coerce ``x`` to a C-contiguous 2-D float64 array.

    Raises
    ------
    ShapeError
        If ``x`` is not two-dimensional.
    DomainError
        If ``require_finite`` and any entry is NaN or infinite.
    """
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"{name} must have at least one row and one column")
    if require_finite and not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains non-finite entries")
    return a


# ---------------------------------------------------------------------------
# matmul with an instrumentation counter

_matmul_lock = threading.Lock()
_matmul_calls = 0


def matmul(a, b) -> np.ndarray:
    """Matrix product with double-precision accumulation.

    Increments the module-level product counter; use
    :func:`matmul_call_count` / :func:`reset_matmul_count` to observe how many
    products a code path issued.
    """
    global _matmul_calls
    am = as_matrix(a, "a")
    bm = as_matrix(b, "b")
    if am.shape[1] != bm.shape[0]:
        raise ShapeError(
            f"inner dimensions differ: a is {am.shape[0]}x{am.shape[1]}, "
            f"b is {bm.shape[0]}x{bm.shape[1]}"
        )
    with _matmul_lock:
        _matmul_calls += 1
    return am @ bm


def matmul_call_count() -> int:
    """Number of products issued through :func:`matmul` since the last reset."""
    with _matmul_lock:
        return _matmul_calls


def reset_matmul_count() -> None:
    global _matmul_calls
    with _matmul_lock:
        _matmul_calls = 0


# ---------------------------------------------------------------------------
# SVD


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``m = u @ diag(s) @ vt`` with ``q = min(rows, cols)`` factors.

    ``u`` is ``rows x q`` with orthonormal columns, ``s`` is nonincreasing and
    nonnegative, ``vt`` is ``q x cols`` with orthonormal rows.
    """

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


def _rotation_schedule(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    # Round-robin tournament: each round pairs all columns disjointly, so one
    # vectorized update per round touches every pair exactly once per sweep.
    if n < 2:
        return []
    m = n if n % 2 == 0 else n + 1
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ii, jj = [], []
        for k in range(m // 2):
            a, b = players[k], players[m - 1 - k]
            if a < n and b < n:
                ii.append(min(a, b))
                jj.append(max(a, b))
        rounds.append((np.asarray(ii), np.asarray(jj)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _complete_orthonormal(u_good: np.ndarray, n_needed: int) -> np.ndarray:
    # Deterministically extend the columns of u_good to an orthonormal set by
    # repeatedly taking the canonical basis vector with the largest residual.
    n = u_good.shape[0]
    cols = [u_good[:, i] for i in range(u_good.shape[1])]
    added = []
    for _ in range(n_needed):
        resid = np.eye(n)
        for w in cols + added:
            resid -= np.outer(w, w @ resid)
        norms = np.linalg.norm(resid, axis=0)
        k = int(np.argmax(norms))
        v = resid[:, k]
        for w in cols + added:  # second pass keeps orthogonality at eps level
            v = v - (w @ v) * w
        added.append(v / np.linalg.norm(v))
    return np.column_stack(added) if added else np.empty((n, 0))


def svd(m, tol: float = 1e-12, max_sweeps: int = 100) -> SvdResult:
    """One-sided Jacobi SVD.

    Columns of the working matrix are orthogonalized by plane rotations until
    every column pair satisfies ``|a_i . a_j| <= tol * |a_i| * |a_j|``.  The
    rotation schedule is fixed, so results are reproducible for fixed input.

    Raises
    ------
    DomainError
        If the input contains non-finite entries.
    SalrError
        If the sweep limit is exhausted before convergence.
    """
    a = as_matrix(m, "m")
    rows, cols = a.shape
    transposed = rows < cols
    # Work on the transpose so each column being orthogonalized is a
    # contiguous row: row gathers/scatters dominate the runtime.
    work = a.copy() if transposed else a.T.copy()
    q = work.shape[0]  # number of columns being orthogonalized
    vecdim = work.shape[1]

    v_accum = np.eye(q)
    schedule = _rotation_schedule(q)

    converged = q < 2
    for _ in range(max_sweeps):
        rotated = False
        for ii, jj in schedule:
            wi = work[ii]
            wj = work[jj]
            alpha = np.einsum("ij,ij->i", wi, wi)
            beta = np.einsum("ij,ij->i", wj, wj)
            gamma = np.einsum("ij,ij->i", wi, wj)
            need = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if not need.any():
                continue
            rotated = True
            ii = ii[need]
            jj = jj[need]
            zeta = (beta[need] - alpha[need]) / (2.0 * gamma[need])
            t = np.where(
                zeta == 0.0,
                1.0,
                np.sign(zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta)),
            )
            c = (1.0 / np.sqrt(1.0 + t * t))[:, None]
            s = c * t[:, None]
            wi = wi[need]
            wj = wj[need]
            work[ii] = wi * c - wj * s
            work[jj] = wi * s + wj * c
            vi = v_accum[ii]
            vj = v_accum[jj]
            v_accum[ii] = vi * c - vj * s
            v_accum[jj] = vi * s + vj * c
        if not rotated:
            converged = True
            break
    if not converged:
        raise SalrError(f"svd did not converge within {max_sweeps} sweeps")

    sigma = np.linalg.norm(work, axis=1)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    work = work[order]
    v_accum = v_accum[order]

    cut = sigma[0] * max(q, vecdim) * np.finfo(np.float64).eps
    left = np.zeros((q, vecdim))
    good = sigma > cut
    left[good] = work[good] / sigma[good, None]
    n_bad = int(q - good.sum())
    if n_bad:
        left[~good] = _complete_orthonormal(left[good].T, n_bad).T
        sigma = np.where(good, sigma, 0.0)

    # Rotations compose on the left in this layout: work_final = R @ work_0,
    # v_accum = R, so a = left.T @ diag(sigma) @ v_accum (untransposed case).
    if transposed:
        return SvdResult(u=v_accum.T, s=sigma, vt=left)
    return SvdResult(u=left.T, s=sigma, vt=v_accum)


def power_iteration_sigma_max(x, iters: int = 500, tol: float = 1e-13) -> float:
    """Largest singular value of ``x`` estimated by power iteration on ``X^T X``.

    The start vector is drawn from a fixed seeded stream, so the estimate is
    deterministic for fixed input.  The Rayleigh-quotient estimate never
    exceeds the true ``sigma_max`` beyond roundoff.
    """
    a = as_matrix(x, "x")
    if iters < 1:
        raise DomainError("iters must be >= 1")
    v = RngState(0x5EED).normal(a.shape[1])
    nv = np.linalg.norm(v)
    v = v / nv
    sigma2 = 0.0
    for _ in range(iters):
        w = a.T @ (a @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        sigma2_new = float(v @ w)
        v = w / nw
        if abs(sigma2_new - sigma2) <= tol * abs(sigma2_new):
            sigma2 = sigma2_new
            break
        sigma2 = sigma2_new
    return math.sqrt(max(sigma2, 0.0))


# ---------------------------------------------------------------------------
# standard-normal distribution functions


def normal_pdf(t):
    """Standard normal density ``phi(t)``."""
    t = np.asarray(t, dtype=np.float64)
    out = _INV_SQRT_2PI * np.exp(-0.5 * t * t)
    return float(out) if out.ndim == 0 else out


def normal_cdf(t):
    """Standard normal CDF ``Phi(t)`` via the complementary error function.

    ``math.erfc`` keeps full relative accuracy in the lower tail, which the
    quantile refinement below relies on.
    """
    arr = np.asarray(t, dtype=np.float64)
    if arr.ndim == 0:
        return 0.5 * math.erfc(-float(arr) / _SQRT2)
    flat = arr.ravel()
    out = np.fromiter(
        (0.5 * math.erfc(-v / _SQRT2) for v in flat), dtype=np.float64, count=flat.size
    )
    return out.reshape(arr.shape)


# Rational quantile approximation coefficients (central and tail regions).
_QA = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
       1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_QB = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
       6.680131188771972e01, -1.328068155288572e01)
_QC = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
       -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_QD = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
       3.754408661907416e00)
_Q_SPLIT = 0.02425


def _quantile_lower_half(u: float) -> float:
    # u in (0, 0.5]; rational initial guess plus one Newton refinement.
    if u < _Q_SPLIT:
        r = math.sqrt(-2.0 * math.log(u))
        x = ((((((_QC[0] * r + _QC[1]) * r + _QC[2]) * r + _QC[3]) * r + _QC[4]) * r + _QC[5])
             / ((((_QD[0] * r + _QD[1]) * r + _QD[2]) * r + _QD[3]) * r + 1.0))
    else:
        r = u - 0.5
        s = r * r
        x = ((((((_QA[0] * s + _QA[1]) * s + _QA[2]) * s + _QA[3]) * s + _QA[4]) * s + _QA[5]) * r
             / (((((_QB[0] * s + _QB[1]) * s + _QB[2]) * s + _QB[3]) * s + _QB[4]) * s + 1.0))
    # For x <= 0 the CDF is evaluated through erfc with full relative accuracy,
    # so one Newton step lands well inside 1e-10 relative error.
    f = 0.5 * math.erfc(-x / _SQRT2) - u
    d = _INV_SQRT_2PI * math.exp(-0.5 * x * x)
    if d > 0.0:
        x -= f / d
    return x


def normal_quantile(u):
    """Inverse standard normal CDF.

    Parameters must lie strictly inside ``(0, 1)``; values at or beyond the
    endpoints raise :class:`DomainError`.
    """
    arr = np.asarray(u, dtype=np.float64)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("normal_quantile requires 0 < u < 1")
    if arr.ndim == 0:
        v = float(arr)
        return _quantile_lower_half(v) if v <= 0.5 else -_quantile_lower_half(1.0 - v)
    flat = arr.ravel()
    out = np.fromiter(
        (_quantile_lower_half(v) if v <= 0.5 else -_quantile_lower_half(1.0 - v) for v in flat),
        dtype=np.float64,
        count=flat.size,
    )
    return out.reshape(arr.shape)


# ---------------------------------------------------------------------------
# deterministic Gaussian sampling


class RngState:
    """Deterministic random stream: Philox counters mapped through Box-Muller.

    The same seed yields the same stream on every platform.  ``spawn`` derives
    independent child streams for fan-out (e.g. Monte-Carlo sweeps) without
    overlapping the parent.
    """

    def __init__(self, seed: int):
        if not isinstance(seed, (int, np.integer)):
            raise DomainError("seed must be an integer")
        self.seed = int(seed)
        self._seq = np.random.SeedSequence(self.seed)
        self._gen = np.random.Generator(np.random.Philox(self._seq))

    @classmethod
    def _from_seq(cls, seq: np.random.SeedSequence) -> "RngState":
        obj = cls.__new__(cls)
        obj.seed = None
        obj._seq = seq
        obj._gen = np.random.Generator(np.random.Philox(seq))
        return obj

    def spawn(self, n: int) -> list["RngState"]:
        """Derive ``n`` independent child streams."""
        if n < 0:
            raise DomainError("n must be >= 0")
        return [RngState._from_seq(s) for s in self._seq.spawn(n)]

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles uniform on [0, 1)."""
        if n < 0:
            raise DomainError("n must be >= 0")
        return self._gen.random(n)

    def normal(self, n: int) -> np.ndarray:
        """``n`` standard normal doubles via Box-Muller over the uniform stream."""
        if n < 0:
            raise DomainError("n must be >= 0")
        if n == 0:
            return np.empty(0)
        pairs = (n + 1) // 2
        u1 = 1.0 - self._gen.random(pairs)  # (0, 1]: keeps log() finite
        u2 = self._gen.random(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        ang = 2.0 * math.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(ang)
        out[1::2] = r * np.sin(ang)
        return out[:n]

    def gaussian_matrix(self, rows: int, cols: int, sigma: float) -> np.ndarray:
        """``rows x cols`` matrix of i.i.d. ``N(0, sigma^2)`` entries."""
        if rows < 0 or cols < 0:
            raise DomainError("rows and cols must be >= 0")
        if sigma < 0:
            raise DomainError("sigma must be >= 0")
        if sigma == 0.0:
            return np.zeros((rows, cols))
        return sigma * self.normal(rows * cols).reshape(rows, cols)


def sample_gaussian_matrix(seed: int, rows: int, cols: int, sigma: float) -> np.ndarray:
    """Convenience wrapper: fresh :class:`RngState` from ``seed``, one matrix."""
    return RngState(seed).gaussian_matrix(rows, cols, sigma)
