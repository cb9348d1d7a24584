"""Magnitude pruning: thresholds, closed-form error values, mask builders,
and the Monte-Carlo cross-check harness."""

import math

import numpy as np
import pytest
import scipy.special

from salr.errors import ConfigError, DomainError, VerificationError
from salr.prune import (
    PruneConfig,
    PruneMethod,
    apply_mask_and_measure,
    build_mask,
    e1_closed,
    e2_closed,
    e3_closed,
    kept_count,
    mask_error_ordering_holds,
    mse_closed_form,
    prune_threshold,
    q_function,
    run_theory_report,
)


def oracle_q(t):
    """Independent tail-mass functional via scipy."""
    return scipy.special.ndtr(t) - 0.5 - t * np.exp(-t * t / 2) / math.sqrt(2 * math.pi)


def oracle_threshold(p, sigma):
    return sigma * scipy.special.ndtri((1.0 + p) / 2.0)


class TestClosedForms:
    def test_q_at_zero(self):
        assert q_function(0.0) == 0.0

    def test_q_limit(self):
        assert q_function(40.0) == pytest.approx(0.5, abs=1e-15)

    def test_q_against_oracle(self):
        ts = np.linspace(0.0, 6.0, 301)
        np.testing.assert_allclose(q_function(ts), oracle_q(ts), atol=1e-12)

    def test_q_rejects_negative(self):
        with pytest.raises(DomainError):
            q_function(-0.1)

    def test_q_monotone(self):
        ts = np.linspace(0.0, 8.0, 400)
        qs = q_function(ts)
        assert np.all(np.diff(qs) > 0)

    def test_threshold_against_oracle(self):
        for p in np.linspace(0.01, 0.99, 25):
            for sigma in (0.5, 1.0, 3.0):
                got = prune_threshold(float(p), sigma)
                ref = oracle_threshold(float(p), sigma)
                assert got == pytest.approx(ref, rel=1e-10)

    def test_threshold_half(self):
        # Median |N(0,1)| sits at the 75th percentile of N(0,1).
        assert prune_threshold(0.5, 1.0) == pytest.approx(0.6744897501960817, rel=1e-10)

    def test_threshold_zero(self):
        assert prune_threshold(0.0, 2.0) == 0.0

    def test_mse_frozen_value(self):
        # Exact value of the closed form at p=1/2, sigma=1, computed
        # independently as 2*(0.25 - ndtri(0.75)*pdf(ndtri(0.75))).
        assert mse_closed_form(0.5, 1.0) == pytest.approx(
            0.07132591774425923, rel=1e-12
        )

    def test_mse_scales_with_variance(self):
        base = mse_closed_form(0.3, 1.0)
        assert mse_closed_form(0.3, 2.0) == pytest.approx(4.0 * base, rel=1e-12)

    def test_mse_limits(self):
        assert mse_closed_form(0.0, 1.0) == 0.0
        assert mse_closed_form(1.0 - 1e-9, 2.0) == pytest.approx(4.0, rel=1e-3)

    def test_mse_monotone_in_p(self):
        ps = np.linspace(0.0, 0.999, 200)
        vals = [mse_closed_form(float(p), 1.0) for p in ps]
        assert np.all(np.diff(vals) > 0)

    def test_e_values_frozen(self):
        # p=1/2, sigma=tau=1: e1 = 2Q, e3 = 4Q, e2 = 1/4 + Q.
        q = oracle_q(oracle_threshold(0.5, 1.0))
        assert e1_closed(0.5, 1.0) == pytest.approx(2 * q, rel=1e-12)
        assert e3_closed(0.5, 1.0, 1.0) == pytest.approx(4 * q, rel=1e-12)
        assert e2_closed(0.5, 1.0, 1.0) == pytest.approx(0.25 + q, rel=1e-12)
        assert e1_closed(0.5, 1.0) == pytest.approx(0.07132591774425923, rel=1e-12)
        assert e3_closed(0.5, 1.0, 1.0) == pytest.approx(0.14265183548851846, rel=1e-12)
        assert e2_closed(0.5, 1.0, 1.0) == pytest.approx(0.2856629588721296, rel=1e-12)

    def test_tau_zero_collapses(self):
        for p in (0.1, 0.5, 0.8):
            e1 = e1_closed(p, 1.3)
            assert e2_closed(p, 1.3, 0.0) == pytest.approx(e1, rel=1e-14)
            assert e3_closed(p, 1.3, 0.0) == pytest.approx(e1, rel=1e-14)


class TestGapIdentities:
    """Exact algebraic gaps between the three deployment-error values.

    With t the threshold at sparsity p, Q the tail functional, phi the
    standard normal density, and V^2 = sigma^2 + tau^2:

        e3 - e1 = 2 tau^2 Q(t)
        e2 - e1 = 2 sigma^2 tau^2 t phi(t) / V^2
        e2 - e3 = 2 sigma^2 tau^2 t phi(t) / V^2 - 2 tau^2 Q(t)

    The third line is the direct difference of the first two; any other
    pairing of these terms is inconsistent unless sigma = 0 or tau = 0.
    """

    GRID = [
        (p, s, r * s)
        for p in (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
        for s in (0.5, 1.0, 2.0)
        for r in (0.1, 0.5, 1.0)
    ]

    @pytest.mark.parametrize("p,sigma,tau", GRID)
    def test_gap_e3_e1(self, p, sigma, tau):
        t = prune_threshold(p, 1.0)
        q = q_function(t)
        gap = e3_closed(p, sigma, tau) - e1_closed(p, sigma)
        assert gap == pytest.approx(2 * tau**2 * q, rel=1e-12, abs=1e-15)

    @pytest.mark.parametrize("p,sigma,tau", GRID)
    def test_gap_e2_e1(self, p, sigma, tau):
        t = prune_threshold(p, 1.0)
        phi = math.exp(-t * t / 2) / math.sqrt(2 * math.pi)
        v2 = sigma**2 + tau**2
        gap = e2_closed(p, sigma, tau) - e1_closed(p, sigma)
        assert gap == pytest.approx(
            2 * sigma**2 * tau**2 * t * phi / v2, rel=1e-12, abs=1e-15
        )

    @pytest.mark.parametrize("p,sigma,tau", GRID)
    def test_gap_e2_e3(self, p, sigma, tau):
        t = prune_threshold(p, 1.0)
        phi = math.exp(-t * t / 2) / math.sqrt(2 * math.pi)
        q = q_function(t)
        v2 = sigma**2 + tau**2
        gap = e2_closed(p, sigma, tau) - e3_closed(p, sigma, tau)
        expected = 2 * sigma**2 * tau**2 * t * phi / v2 - 2 * tau**2 * q
        assert gap == pytest.approx(expected, rel=1e-12, abs=1e-15)

    def test_ordering_region(self):
        # e1 <= e3 always (tau^2 Q >= 0); e3 <= e2 exactly when
        # (sigma^2 + tau^2) Q(t) <= sigma^2 t phi(t), which holds for
        # moderate sparsity and breaks as p -> 1.
        count = 0
        for p in np.linspace(0.05, 0.70, 14):
            for sigma in (0.5, 1.0, 2.0):
                for ratio in (0.1, 0.25, 0.5, 0.75, 1.0):
                    tau = ratio * sigma
                    p = float(p)
                    assert mask_error_ordering_holds(p, sigma, tau)
                    e1 = e1_closed(p, sigma)
                    e3 = e3_closed(p, sigma, tau)
                    e2 = e2_closed(p, sigma, tau)
                    assert e1 < e3 < e2
                    count += 1
        assert count == 210

    def test_ordering_breaks_at_high_sparsity(self):
        assert not mask_error_ordering_holds(0.9, 1.0, 1.0)
        assert e2_closed(0.9, 1.0, 1.0) < e3_closed(0.9, 1.0, 1.0)


class TestKeptCount:
    def test_simple(self):
        assert kept_count(0.5, 100) == 50
        assert kept_count(0.0, 10) == 10

    def test_rounds_up_fraction(self):
        assert kept_count(0.5, 7) == 4

    def test_float_representation_artifact(self):
        # (1 - 0.7) * 100 evaluates to 30.000000000000004 in binary
        # floating point; the count must still be exactly 30.
        assert kept_count(0.7, 100) == 30

    def test_near_one(self):
        assert kept_count(0.999, 10) == 1

    def test_rejects_out_of_range(self):
        with pytest.raises(DomainError):
            kept_count(1.0, 10)
        with pytest.raises(DomainError):
            kept_count(-0.1, 10)

    @pytest.mark.parametrize("p", [0.1, 0.25, 0.4, 0.6, 0.75, 0.9])
    @pytest.mark.parametrize("total", [1, 7, 64, 1000, 4096 * 4096])
    def test_matches_exact_fraction(self, p, total):
        from fractions import Fraction

        exact = Fraction(str(p)) * total * -1 + total
        expected = math.ceil(exact)
        assert kept_count(p, total) == expected


class TestConfig:
    def test_defaults(self):
        cfg = PruneConfig(0.5)
        assert cfg.method is PruneMethod.STATIC_ON_W0
        assert cfg.nm is None

    def test_rejects_bad_sparsity(self):
        with pytest.raises(DomainError):
            PruneConfig(1.2)
        with pytest.raises(DomainError):
            PruneConfig(-0.1)

    def test_nm_requires_pattern(self):
        with pytest.raises(ConfigError):
            PruneConfig(0.5, PruneMethod.SEMI_STRUCTURED_NM)

    def test_nm_pattern_validated(self):
        with pytest.raises(ConfigError):
            PruneConfig(0.5, PruneMethod.SEMI_STRUCTURED_NM, nm=(4, 2))

    def test_rejects_negative_scales(self):
        with pytest.raises(DomainError):
            PruneConfig(0.5, sigma=-1.0)
        with pytest.raises(DomainError):
            PruneConfig(0.5, tau=-0.5)


class TestBuildMask:
    def test_keeps_largest_magnitudes(self):
        w0 = np.array([[0.1, -5.0, 0.2, 3.0]])
        mask = build_mask(w0, np.zeros_like(w0), PruneConfig(0.5))
        np.testing.assert_array_equal(mask, [[0, 1, 0, 1]])

    def test_static_matches_sort_oracle(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            w0 = rng.normal(size=(rng.integers(2, 20), rng.integers(2, 20)))
            p = float(rng.uniform(0.0, 0.95))
            mask = build_mask(w0, np.zeros_like(w0), PruneConfig(p))
            keep = kept_count(p, w0.size)
            assert int(mask.sum()) == keep
            # Every kept magnitude >= every dropped magnitude.
            kept_vals = np.abs(w0)[mask.astype(bool)]
            dropped = np.abs(w0)[~mask.astype(bool)]
            if kept_vals.size and dropped.size:
                assert kept_vals.min() >= dropped.max()

    def test_dynamic_scores_merged_matrix(self):
        w0 = np.array([[1.0, 0.0], [0.0, 1.0]])
        delta = np.array([[0.0, 10.0], [10.0, 0.0]])
        cfg = PruneConfig(0.5, PruneMethod.DYNAMIC_ON_U)
        mask = build_mask(w0, delta, cfg)
        np.testing.assert_array_equal(mask, [[0, 1], [1, 0]])

    def test_dynamic_w0_same_scores_as_dynamic_u(self):
        rng = np.random.default_rng(5)
        w0 = rng.normal(size=(10, 10))
        delta = rng.normal(size=(10, 10))
        m1 = build_mask(w0, delta, PruneConfig(0.4, PruneMethod.DYNAMIC_MASK_PRUNE_W0))
        m2 = build_mask(w0, delta, PruneConfig(0.4, PruneMethod.DYNAMIC_ON_U))
        np.testing.assert_array_equal(m1, m2)

    def test_nm_two_of_four(self):
        w0 = np.array([[0.1, -0.5, 0.3, 0.2]])
        cfg = PruneConfig(0.5, PruneMethod.SEMI_STRUCTURED_NM, nm=(2, 4))
        mask = build_mask(w0, np.zeros_like(w0), cfg)
        np.testing.assert_array_equal(mask, [[0, 1, 1, 0]])

    def test_nm_group_structure(self):
        rng = np.random.default_rng(13)
        w0 = rng.normal(size=(16, 32))
        cfg = PruneConfig(0.5, PruneMethod.SEMI_STRUCTURED_NM, nm=(2, 4))
        mask = build_mask(w0, np.zeros_like(w0), cfg)
        groups = mask.reshape(16, 8, 4)
        np.testing.assert_array_equal(groups.sum(axis=2), np.full((16, 8), 2))

    def test_nm_rejects_indivisible_width(self):
        cfg = PruneConfig(0.5, PruneMethod.SEMI_STRUCTURED_NM, nm=(2, 4))
        with pytest.raises(ConfigError):
            build_mask(np.zeros((3, 6)), np.zeros((3, 6)), cfg)

    def test_mask_is_binary(self):
        rng = np.random.default_rng(3)
        w0 = rng.normal(size=(8, 8))
        mask = build_mask(w0, np.zeros_like(w0), PruneConfig(0.3))
        assert set(np.unique(mask)) <= {0.0, 1.0}


class TestApplyMask:
    def test_static_deploys_masked_base_plus_delta(self):
        w0 = np.array([[1.0, 2.0], [3.0, 4.0]])
        delta = np.array([[0.5, 0.5], [0.5, 0.5]])
        mask = np.array([[0.0, 1.0], [1.0, 1.0]])
        deployed, err = apply_mask_and_measure(
            w0, delta, mask, PruneMethod.STATIC_ON_W0
        )
        np.testing.assert_array_equal(deployed, [[0.5, 2.5], [3.5, 4.5]])
        # Error vs merged: only the dropped (0,0) entry differs, by w0[0,0].
        assert err == pytest.approx(1.0 / 4.0)

    def test_dynamic_u_deploys_masked_merged(self):
        w0 = np.array([[1.0, 2.0]])
        delta = np.array([[0.5, -0.5]])
        mask = np.array([[0.0, 1.0]])
        deployed, err = apply_mask_and_measure(w0, delta, mask, PruneMethod.DYNAMIC_ON_U)
        np.testing.assert_array_equal(deployed, [[0.0, 1.5]])
        assert err == pytest.approx(1.5**2 / 2)

    def test_zero_delta_all_methods_agree(self):
        rng = np.random.default_rng(2)
        w0 = rng.normal(size=(6, 6))
        delta = np.zeros((6, 6))
        mask = build_mask(w0, delta, PruneConfig(0.5))
        outs = [
            apply_mask_and_measure(w0, delta, mask, m)
            for m in (
                PruneMethod.STATIC_ON_W0,
                PruneMethod.DYNAMIC_MASK_PRUNE_W0,
                PruneMethod.DYNAMIC_ON_U,
            )
        ]
        for deployed, err in outs[1:]:
            np.testing.assert_array_equal(deployed, outs[0][0])
            assert err == pytest.approx(outs[0][1], rel=1e-14)

    def test_mse_matches_closed_form(self):
        # Per-entry squared error of static pruning on a Gaussian matrix
        # concentrates at the closed-form value; allow 3 standard errors.
        rng = np.random.default_rng(100)
        n = 600
        w0 = rng.normal(0.0, 1.0, size=(n, n))
        mask = build_mask(w0, np.zeros((n, n)), PruneConfig(0.5))
        _, err = apply_mask_and_measure(
            w0, np.zeros((n, n)), mask, PruneMethod.STATIC_ON_W0
        )
        closed = mse_closed_form(0.5, 1.0)
        # SE of the mean of n^2 per-entry squared errors, measured empirically.
        per_entry = (w0 * (1 - mask)) ** 2
        se = float(per_entry.std()) / n
        assert abs(err - closed) <= 3 * se


class TestTheoryReport:
    def test_deterministic(self):
        r1 = run_theory_report(0.5, 1.0, 0.5, 20000, 42)
        r2 = run_theory_report(0.5, 1.0, 0.5, 20000, 42)
        assert r1 == r2

    def test_seed_changes_mc(self):
        r1 = run_theory_report(0.5, 1.0, 0.5, 20000, 1)
        r2 = run_theory_report(0.5, 1.0, 0.5, 20000, 2)
        assert r1.e1_mc != r2.e1_mc

    def test_mc_within_three_se(self):
        r = run_theory_report(0.4, 1.0, 0.7, 200000, 0)
        assert abs(r.e1_mc - r.e1_closed) <= 3 * r.e1_se
        assert abs(r.e2_mc - r.e2_closed) <= 3 * r.e2_se
        assert abs(r.e3_mc - r.e3_closed) <= 3 * r.e3_se

    def test_rejects_small_sample(self):
        with pytest.raises(DomainError):
            run_theory_report(0.5, 1.0, 0.0, 9999, 0)

    def test_rejects_out_of_regime(self):
        # At p=0.9, tau=sigma the closed forms order e2 < e3; the harness
        # treats the inverted ordering as a verification failure.
        with pytest.raises(VerificationError):
            run_theory_report(0.9, 1.0, 1.0, 10000, 0)

    def test_closed_fields_match_functions(self):
        r = run_theory_report(0.3, 2.0, 1.0, 10000, 7)
        assert r.mse_closed == pytest.approx(mse_closed_form(0.3, 2.0), rel=1e-14)
        assert r.e1_closed == pytest.approx(e1_closed(0.3, 2.0), rel=1e-14)
        assert r.e2_closed == pytest.approx(e2_closed(0.3, 2.0, 1.0), rel=1e-14)
        assert r.e3_closed == pytest.approx(e3_closed(0.3, 2.0, 1.0), rel=1e-14)
