"""Tests for the conditional-coverage functionals and rate coverage."""

import numpy as np
import pytest
from scipy import integrate

from hetnet_nulling.config import (
    MACRO,
    PICO,
    NetworkConfig,
    TierParams,
    UserClass,
    db_to_linear,
)
from hetnet_nulling.analytics import (
    asymptotic_order_slopes,
    conditional_coverage,
    delta_rate_coverage,
    rate_coverage_exact,
    rate_coverage_mla,
    sir_threshold,
)
from hetnet_nulling.association import serving_distance_density
from hetnet_nulling.special_math import laplace_interference
from netconfigs import optimization_config, validation_config

ALL_CLASSES = list(UserClass)


class TestConditionalCoverage:
    def test_zero_threshold_is_certain(self):
        cfg = validation_config(5.0)
        for cls in ALL_CLASSES:
            assert conditional_coverage(cls, 0.0, 4, cfg) == 1.0

    @pytest.mark.parametrize("cls", ALL_CLASSES)
    def test_in_unit_interval_and_nonincreasing(self, cls):
        cfg = validation_config(5.0)
        beta = np.logspace(-3, 3, 9)
        vals = conditional_coverage(cls, beta, 4, cfg)
        assert np.all((vals >= 0.0) & (vals <= 1.0))
        assert np.all(np.diff(vals) <= 1e-9)

    def test_single_antenna_pico_degenerate_oracle(self):
        # with one pico antenna the unoffloaded functional collapses to a
        # plain product of the two transforms against the distance law
        cfg = NetworkConfig(
            macro=TierParams(density=1e-4, pathloss=4.0, power=10.0, antennas=4),
            pico=TierParams(density=5e-4, pathloss=4.0, power=1.0, antennas=1),
            user_density=1e-3,
            bias=db_to_linear(5.0),
            bandwidth=10e6,
            in_dof=2,
        )
        a1, a2 = cfg.macro.pathloss, cfg.pico.pathloss
        rho_ratio = cfg.macro.tx_snr / cfg.pico.tx_snr

        def integrand(y, beta):
            r1 = (cfg.macro.power / cfg.pico.power) ** (1.0 / a1) * y ** (a2 / a1)
            l1 = laplace_interference(beta * y**a2 * rho_ratio, r1, cfg.macro)
            l2 = laplace_interference(beta * y**a2, y, cfg.pico)
            f = serving_distance_density(UserClass.PICO_UNOFFLOADED, y, cfg)
            return l1 * l2 * f

        for beta in (0.3, 2.0, 15.0):
            want, err = integrate.quad(integrand, 0.0, np.inf, args=(beta,), limit=300)
            got = conditional_coverage(UserClass.PICO_UNOFFLOADED, beta, 2, cfg)
            assert got == pytest.approx(want, abs=5e-6)

    def test_more_nulling_budget_helps_offloaded_hurts_macro(self):
        cfg = validation_config(5.0)
        beta = 2.0
        macro = [conditional_coverage(UserClass.MACRO, beta, u, cfg) for u in (0, 3, 6)]
        assert macro[0] >= macro[1] >= macro[2]
        # offloaded-class conditionals do not depend on the budget; the
        # nulled class must dominate the non-nulled one
        s_in = conditional_coverage(UserClass.OFFLOADED_IN, beta, 4, cfg)
        s_non = conditional_coverage(UserClass.OFFLOADED_NON_IN, beta, 4, cfg)
        assert s_in > s_non

    def test_rejects_bad_arguments(self):
        cfg = validation_config(5.0)
        with pytest.raises(ValueError):
            conditional_coverage(UserClass.MACRO, -1.0, 4, cfg)
        with pytest.raises(ValueError):
            conditional_coverage(UserClass.MACRO, 1.0, 99, cfg)


class TestRateCoverage:
    def test_zero_threshold(self):
        cfg = validation_config(5.0)
        assert rate_coverage_mla(0.0, 4, cfg).total == pytest.approx(1.0, abs=1e-12)
        assert rate_coverage_exact(0.0, 4, cfg).total == pytest.approx(1.0, abs=2e-6)

    def test_total_is_weighted_class_sum(self):
        cfg = validation_config(5.0)
        bk = rate_coverage_mla(8e5, 4, cfg)
        rebuilt = sum(bk.weights[k] * bk.per_class[k] for k in UserClass)
        assert bk.total == pytest.approx(rebuilt, abs=1e-12)
        assert sum(bk.weights.values()) == pytest.approx(1.0, abs=1e-9)

    def test_nonincreasing_in_threshold(self):
        cfg = validation_config(5.0)
        taus = np.logspace(5, 6.7, 6)
        totals = [b.total for b in rate_coverage_mla(taus, 4, cfg)]
        assert all(x >= y - 1e-9 for x, y in zip(totals, totals[1:]))
        exact = [b.total for b in rate_coverage_exact(taus[::2], 4, cfg)]
        assert all(x >= y - 1e-9 for x, y in zip(exact, exact[1:]))

    def test_grid_matches_scalar_calls(self):
        cfg = validation_config(5.0)
        taus = np.array([2e5, 2e6])
        grid = rate_coverage_mla(taus, 4, cfg)
        for tau, bk in zip(taus, grid):
            assert rate_coverage_mla(float(tau), 4, cfg).total == pytest.approx(
                bk.total, abs=1e-12
            )

    def test_load_truncation_knob(self):
        cfg = validation_config(5.0)
        bk = rate_coverage_exact(1e6, 4, cfg, n_max=3)
        assert bk.load_tail_mass > 1e-4
        full = rate_coverage_exact(1e6, 4, cfg)
        assert full.load_tail_mass < 2e-6
        assert abs(bk.total - full.total) <= bk.load_tail_mass + 1e-6

    def test_mla_equals_exact_for_sparse_users(self):
        base = validation_config(5.0)
        sparse = NetworkConfig(
            macro=base.macro, pico=base.pico, user_density=1e-10,
            bias=base.bias, bandwidth=base.bandwidth, in_dof=4,
        )
        tau = 1e6
        mla = rate_coverage_mla(tau, 4, sparse).total
        exact = rate_coverage_exact(tau, 4, sparse).total
        assert mla == pytest.approx(exact, abs=2e-6)

    def test_mla_tracks_exact_at_moderate_threshold(self):
        cfg = validation_config(5.0)
        for tau in (5e5, 2e6):
            mla = rate_coverage_mla(tau, 4, cfg).total
            exact = rate_coverage_exact(tau, 4, cfg).total
            assert abs(mla - exact) <= 0.05

    def test_zero_budget_weights(self):
        cfg = validation_config(5.0)
        bk = rate_coverage_mla(1e6, 0, cfg)
        assert bk.weights[UserClass.OFFLOADED_IN] == 0.0
        assert bk.per_class[UserClass.OFFLOADED_NON_IN] < 1.0


class TestDeltaDecomposition:
    def test_gain_minus_penalty_identity(self):
        cfg = optimization_config(4.6)
        for u in (1, 2, 3, 4):
            delta, gain, penalty = delta_rate_coverage(u, 5e3, cfg)
            assert delta == pytest.approx(gain - penalty, abs=1e-15)
            assert gain >= 0.0 and penalty >= 0.0

    def test_matches_direct_difference(self):
        cfg = optimization_config(4.6)
        tau = 2e5
        for u in (1, 3):
            delta, _, _ = delta_rate_coverage(u, tau, cfg)
            direct = (
                rate_coverage_mla(tau, u, cfg).total
                - rate_coverage_mla(tau, u - 1, cfg).total
            )
            assert delta == pytest.approx(direct, abs=3e-6)

    def test_rejects_zero_budget(self):
        with pytest.raises(ValueError):
            delta_rate_coverage(0, 1e5, optimization_config(4.6))


class TestAsymptoticSlopes:
    def test_order_behavior_small_thresholds(self):
        cfg = optimization_config(4.6)
        taus = np.logspace(2, 4, 5)
        slope_gain, slope_penalty = asymptotic_order_slopes(2, cfg, taus)
        assert slope_gain == pytest.approx(cfg.pico.antennas, abs=0.2)
        assert slope_penalty == pytest.approx(cfg.macro.antennas - 2, abs=0.2)

    def test_slopes_stable_under_grid_shift(self):
        cfg = optimization_config(4.6)
        s1 = asymptotic_order_slopes(2, cfg, np.logspace(2, 4, 5))
        s2 = asymptotic_order_slopes(2, cfg, np.logspace(2, 4, 5) / 2.0)
        assert s1[0] == pytest.approx(s2[0], abs=0.05)
        assert s1[1] == pytest.approx(s2[1], abs=0.05)

    def test_rejects_narrow_grid(self):
        with pytest.raises(ValueError):
            asymptotic_order_slopes(2, optimization_config(4.6), [1e3, 2e3])


def test_sir_threshold_small_argument_precision():
    assert sir_threshold(1e-12) == pytest.approx(1e-12 * np.log(2.0), rel=1e-9)
    assert sir_threshold(1.0) == pytest.approx(1.0)
    assert sir_threshold(0.0) == 0.0
