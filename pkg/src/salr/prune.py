"""Magnitude pruning and its error theory.

Implements global magnitude masks, dynamic (merged-weight) masks, N:M
semi-structured masks, closed-form per-entry MSE expressions for pruning
Gaussian weights, and Monte-Carlo estimators that validate the closed forms.

Model: base weights ``W0 ~ N(0, sigma^2)``, adapter update ``Delta ~ N(0,
tau^2)`` entrywise independent, merged weights ``U = W0 + Delta``.  Three
masking strategies are analyzed:

* method 1 (``static``): rank by ``|W0|``, zero the smallest entries of W0;
* method 2 (``dynamic-w0``): rank by ``|U|`` but zero only W0's entries;
* method 3 (``dynamic-u``): rank by ``|U|`` and zero entries of U itself.

Errors are always measured against the merged weights U.  Masks keep exactly
``ceil((1-p) * d * k)`` entries (order statistics, not the distributional
threshold), with magnitude ties broken toward the lower row-major index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, DomainError, ShapeError, VerificationError
from .linalg import RngState, as_matrix, normal_pdf, normal_quantile

__all__ = [
    "PruneMethod",
    "PruneConfig",
    "TheoryReport",
    "q_function",
    "prune_threshold",
    "mse_closed_form",
    "e1_closed",
    "e2_closed",
    "e3_closed",
    "mask_error_ordering_holds",
    "kept_count",
    "build_mask",
    "apply_mask_and_measure",
    "run_theory_report",
]


class PruneMethod(Enum):
    """Masking strategy; values double as CLI spellings."""

    STATIC_ON_W0 = "static"
    DYNAMIC_MASK_PRUNE_W0 = "dynamic-w0"
    DYNAMIC_ON_U = "dynamic-u"
    SEMI_STRUCTURED_NM = "nm"


@dataclass(frozen=True)
class PruneConfig:
    """Pruning parameters.

    ``sparsity`` is the fraction of entries to zero, in ``[0, 1)``.  For
    :attr:`PruneMethod.SEMI_STRUCTURED_NM` the pair ``nm = (n, m)`` keeps the
    ``n`` largest magnitudes in every contiguous group of ``m`` columns and
    the global ``sparsity`` field is ignored (the pattern implies ``1 - n/m``).
    ``sigma`` and ``tau`` are the model standard deviations used by the
    closed-form evaluators.
    """

    sparsity: float
    method: PruneMethod = PruneMethod.STATIC_ON_W0
    nm: tuple[int, int] | None = None
    sigma: float = 1.0
    tau: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.sparsity < 1.0:
            raise DomainError(f"sparsity must be in [0, 1), got {self.sparsity}")
        if self.sigma <= 0.0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")
        if self.tau < 0.0:
            raise DomainError(f"tau must be >= 0, got {self.tau}")
        if self.method is PruneMethod.SEMI_STRUCTURED_NM:
            if self.nm is None:
                raise ConfigError("SEMI_STRUCTURED_NM requires nm=(n, m)")
            n, m = self.nm
            if not 0 < n < m:
                raise ConfigError(f"nm requires 0 < n < m, got {self.nm}")
        elif self.nm is not None:
            raise ConfigError("nm is only meaningful with SEMI_STRUCTURED_NM")


@dataclass(frozen=True)
class TheoryReport:
    """Closed-form and Monte-Carlo per-entry MSE values for the three methods."""

    p: float
    sigma: float
    tau: float
    samples: int
    mse_closed: float
    e1_closed: float
    e2_closed: float
    e3_closed: float
    e1_mc: float
    e2_mc: float
    e3_mc: float
    e1_se: float
    e2_se: float
    e3_se: float


# ---------------------------------------------------------------------------
# closed forms


def q_function(t):
    """Truncated second moment of the standard normal: ``Phi(t) - 1/2 - t*phi(t)``.

    Equals ``integral_0^t u^2 phi(u) du``; nondecreasing from 0 to 1/2.

    Raises
    ------
    DomainError
        For negative ``t``.
    """
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < 0.0):
        raise DomainError("q_function requires t >= 0")
    from .linalg import normal_cdf

    out = normal_cdf(arr) - 0.5 - arr * normal_pdf(arr)
    return float(out) if np.ndim(out) == 0 else out


def _t_p(p: float) -> float:
    if not 0.0 <= p < 1.0:
        raise DomainError(f"sparsity p must be in [0, 1), got {p}")
    if p == 0.0:
        return 0.0
    return normal_quantile((1.0 + p) / 2.0)


def prune_threshold(p: float, sigma: float) -> float:
    """Magnitude threshold with ``P(|W| <= T) = p`` for ``W ~ N(0, sigma^2)``."""
    if sigma <= 0.0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    return sigma * _t_p(p)


def mse_closed_form(p: float, sigma: float) -> float:
    """Per-entry MSE of magnitude pruning at rate ``p``: ``2 sigma^2 Q(t_p)``."""
    if sigma <= 0.0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    return 2.0 * sigma * sigma * q_function(_t_p(p))


def e1_closed(p: float, sigma: float) -> float:
    """Per-entry MSE of the static mask on W0 (method 1)."""
    return mse_closed_form(p, sigma)


def e2_closed(p: float, sigma: float, tau: float) -> float:
    """Per-entry MSE of the dynamic mask that prunes only W0 (method 2)."""
    if sigma <= 0.0 or tau < 0.0:
        raise DomainError("require sigma > 0 and tau >= 0")
    v2 = sigma * sigma + tau * tau
    q = q_function(_t_p(p))
    return (sigma * sigma * tau * tau / v2) * p + (2.0 * sigma**4 / v2) * q


def e3_closed(p: float, sigma: float, tau: float) -> float:
    """Per-entry MSE of the dynamic mask applied to the merged weights (method 3)."""
    if sigma <= 0.0 or tau < 0.0:
        raise DomainError("require sigma > 0 and tau >= 0")
    return 2.0 * (sigma * sigma + tau * tau) * q_function(_t_p(p))


def mask_error_ordering_holds(p: float, sigma: float, tau: float) -> bool:
    """True when the closed forms satisfy ``e1 <= e3 <= e2`` at these parameters.

    ``e3 - e1 = 2 tau^2 Q(t_p)`` is nonnegative everywhere, so the binding
    condition is ``e3 <= e2``, equivalent to::

        (sigma^2 + tau^2) * Q(t_p) <= sigma^2 * t_p * phi(t_p)

    The left side grows faster in ``p``, so at high sparsity (around
    ``p > 0.83`` even as ``tau -> 0``) the merged-weight mask's error
    overtakes method 2 and the ordering reverses.
    """
    if tau == 0.0:
        return True
    tp = _t_p(p)
    v2 = sigma * sigma + tau * tau
    return v2 * q_function(tp) <= sigma * sigma * tp * normal_pdf(tp) * (1.0 + 1e-12)


# ---------------------------------------------------------------------------
# masks


def kept_count(p: float, total: int) -> int:
    """Exact number of kept entries: ``ceil((1 - p) * total)``.

    The product is nudged one ulp toward zero first so a float value that
    mathematically equals an integer cannot round its ceiling up.
    """
    if not 0.0 <= p < 1.0:
        raise DomainError(f"sparsity p must be in [0, 1), got {p}")
    if total < 1:
        raise DomainError("total must be >= 1")
    return int(math.ceil(np.nextafter((1.0 - p) * total, 0.0)))


def _largest_mask_flat(scores: np.ndarray, keep: int) -> np.ndarray:
    # Keep the `keep` largest scores; ties go to the lower flat index.
    # Stable argsort on negated scores realizes exactly that rule.
    order = np.argsort(-scores, kind="stable")
    mask = np.zeros(scores.size, dtype=bool)
    mask[order[:keep]] = True
    return mask


def build_mask(w0, delta, cfg: PruneConfig) -> np.ndarray:
    """Boolean keep-mask (True = kept) for the configured method.

    Global methods keep exactly ``ceil((1 - sparsity) * d * k)`` entries.
    Ranking scores are ``|W0|`` for the static method and ``|W0 + Delta|``
    for both dynamic methods.  The N:M method keeps the ``n`` largest
    magnitudes of ``|W0|`` in each contiguous group of ``m`` columns.
    """
    w0m = as_matrix(w0, "w0")
    dm = as_matrix(delta, "delta")
    if w0m.shape != dm.shape:
        raise ShapeError(f"w0 shape {w0m.shape} != delta shape {dm.shape}")
    rows, cols = w0m.shape

    if cfg.method is PruneMethod.SEMI_STRUCTURED_NM:
        n, m = cfg.nm
        if cols % m != 0:
            raise ConfigError(f"group size m={m} must divide cols={cols}")
        groups = np.abs(w0m).reshape(rows, cols // m, m)
        # Stable sort on negated magnitudes: equal values keep the lower
        # column offset within the group.
        order = np.argsort(-groups, axis=2, kind="stable")
        mask3 = np.zeros_like(groups, dtype=bool)
        np.put_along_axis(mask3, order[:, :, :n], True, axis=2)
        return mask3.reshape(rows, cols)

    if cfg.method is PruneMethod.STATIC_ON_W0:
        scores = np.abs(w0m)
    else:
        scores = np.abs(w0m + dm)
    keep = kept_count(cfg.sparsity, rows * cols)
    return _largest_mask_flat(scores.ravel(), keep).reshape(rows, cols)


def apply_mask_and_measure(w0, delta, mask, method: PruneMethod) -> tuple[np.ndarray, float]:
    """Deploy the mask per the method's semantics and measure the damage.

    Methods that prune only W0 (1, 2, and N:M) deploy ``mask*W0 + Delta``;
    method 3 deploys ``mask*(W0 + Delta)``.  Returns the deployed matrix and
    the per-entry mean squared error against the merged weights ``U``.
    """
    w0m = as_matrix(w0, "w0")
    dm = as_matrix(delta, "delta")
    maskm = np.asarray(mask, dtype=bool)
    if w0m.shape != dm.shape or w0m.shape != maskm.shape:
        raise ShapeError("w0, delta, and mask must share one shape")
    u = w0m + dm
    if method is PruneMethod.DYNAMIC_ON_U:
        deployed = np.where(maskm, u, 0.0)
    else:
        deployed = np.where(maskm, w0m, 0.0) + dm
    err = u - deployed
    return deployed, float(np.mean(err * err))


# ---------------------------------------------------------------------------
# Monte Carlo


def _dropped_moments(values_sq: np.ndarray, scores: np.ndarray, drop: int, n: int):
    # Mean and standard error of the per-entry squared error when the `drop`
    # smallest scores are pruned.  Ties at the cut contribute equal squared
    # values either way, so argpartition matches the stable-order rule here.
    if drop == 0:
        return 0.0, 0.0
    idx = np.argpartition(scores, drop - 1)[:drop]
    d = values_sq[idx]
    s1 = float(d.sum())
    s2 = float((d * d).sum())
    mean = s1 / n
    # Per-entry sample variance over all n entries (zeros included).
    var = (s2 / n - mean * mean) * (n / (n - 1.0))
    return mean, math.sqrt(max(var, 0.0) / n)


def run_theory_report(
    p: float, sigma: float, tau: float, samples: int, seed: int
) -> TheoryReport:
    """Validate the closed forms by simulation.

    Draws ``samples`` i.i.d. entries of W0 and Delta, applies each masking
    method by exact order statistics, and reports per-entry MSE estimates
    with standard errors alongside the closed forms.

    Raises
    ------
    VerificationError
        If the closed forms violate ``e1 <= e3 <= e2`` at these parameters
        (see :func:`mask_error_ordering_holds` for the validity condition).
    """
    if samples < 10_000:
        raise DomainError("samples must be >= 10^4")
    c1 = e1_closed(p, sigma)
    c2 = e2_closed(p, sigma, tau)
    c3 = e3_closed(p, sigma, tau)
    slack = 1e-12 * max(1.0, c1, c2, c3)
    if not c1 <= c3 + slack:
        raise VerificationError(f"closed-form ordering violated: e1={c1} > e3={c3}")
    if not c3 <= c2 + slack:
        raise VerificationError(
            f"closed-form ordering violated: e3={c3} > e2={c2} "
            f"(p={p}, sigma={sigma}, tau={tau} lie outside the ordering's validity region)"
        )

    rng = RngState(seed)
    w0 = sigma * rng.normal(samples)
    delta = tau * rng.normal(samples) if tau > 0.0 else np.zeros(samples)
    u = w0 + delta
    drop = samples - kept_count(p, samples)

    w0_sq = w0 * w0
    u_sq = u * u
    abs_w0 = np.abs(w0)
    abs_u = np.abs(u)

    e1_mc, e1_se = _dropped_moments(w0_sq, abs_w0, drop, samples)
    e2_mc, e2_se = _dropped_moments(w0_sq, abs_u, drop, samples)
    e3_mc, e3_se = _dropped_moments(u_sq, abs_u, drop, samples)

    return TheoryReport(
        p=p,
        sigma=sigma,
        tau=tau,
        samples=samples,
        mse_closed=mse_closed_form(p, sigma),
        e1_closed=c1,
        e2_closed=c2,
        e3_closed=c3,
        e1_mc=e1_mc,
        e2_mc=e2_mc,
        e3_mc=e3_mc,
        e1_se=e1_se,
        e2_se=e2_se,
        e3_se=e3_se,
    )
