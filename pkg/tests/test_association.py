"""Tests for association probabilities, distance densities, and load pmfs."""

import numpy as np
import pytest
from scipy import integrate

from hetnet_nulling.config import MACRO, PICO, NetworkConfig, TierParams, UserClass, db_to_linear
from hetnet_nulling.association import (
    active_offloaded_pmf,
    active_offloaded_seen_pmf,
    association_probabilities,
    association_stats,
    in_dof_pmf,
    in_selection_probability,
    joint_distance_density,
    load_pmf,
    mean_load,
    offloading_strip,
    pmf_tail_sum,
    serving_distance_density,
)
from netconfigs import comparison_config, optimization_config, validation_config

ALL_CONFIGS = [
    validation_config(5.0),
    validation_config(10.0),
    optimization_config(2.5),
    optimization_config(4.6),
    comparison_config(False, 7.0),
    comparison_config(True, 10.0),
]


def symmetric_config(bias_db=0.0):
    # equal tiers except a formally larger macro power to satisfy validation
    return NetworkConfig(
        macro=TierParams(density=3e-4, pathloss=3.5, power=1.0 + 1e-12, antennas=4),
        pico=TierParams(density=3e-4, pathloss=3.5, power=1.0, antennas=4),
        user_density=1e-3,
        bias=db_to_linear(bias_db),
        bandwidth=10e6,
    )


class TestAssociationProbabilities:
    def test_symmetric_tiers_split_evenly(self):
        A1, A2_unoff, A2_off = association_probabilities(symmetric_config())
        assert A1 == pytest.approx(0.5, abs=1e-9)
        assert A2_off == pytest.approx(0.0, abs=1e-9)

    def test_huge_bias_offloads_everything(self):
        cfg = validation_config().with_bias(db_to_linear(90.0))
        A1, _, _ = association_probabilities(cfg)
        assert A1 < 1e-3

    @pytest.mark.parametrize("cfg", ALL_CONFIGS)
    def test_probabilities_sum_to_one(self, cfg):
        A1, A2_unoff, A2_off = association_probabilities(cfg)
        assert A1 + A2_unoff + A2_off == pytest.approx(1.0, abs=1e-9)
        assert min(A1, A2_unoff, A2_off) >= 0.0

    def test_monotone_in_bias(self):
        biases = [1.0, 2.0, 4.0, 8.0, 16.0]
        probs = [association_probabilities(validation_config().with_bias(b)) for b in biases]
        a1 = [p[0] for p in probs]
        off = [p[2] for p in probs]
        assert all(x >= y - 1e-12 for x, y in zip(a1, a1[1:]))
        assert all(x <= y + 1e-12 for x, y in zip(off, off[1:]))

    def test_equal_pathloss_closed_form(self):
        # with a1 == a2 the biased comparison integrates in closed form
        cfg = validation_config(5.0)
        lam1, lam2 = cfg.macro.density, cfg.pico.density
        want = lam1 / (lam1 + lam2 * (cfg.bias * cfg.pico.power / cfg.macro.power) ** 0.5)
        A1, _, _ = association_probabilities(cfg)
        assert A1 == pytest.approx(want, rel=1e-9)


class TestDistanceDensities:
    @pytest.mark.parametrize("cfg", [validation_config(5.0), optimization_config(4.6),
                                     comparison_config(False, 7.0)])
    def test_marginals_normalize(self, cfg):
        for cls in (UserClass.MACRO, UserClass.PICO_UNOFFLOADED):
            total, err = integrate.quad(
                lambda y: serving_distance_density(cls, y, cfg), 0.0, np.inf, limit=200
            )
            assert total == pytest.approx(1.0, abs=1e-6)

    def test_joint_normalizes(self):
        cfg = validation_config(5.0)
        def inner(x):
            y_lo, y_hi = offloading_strip(x, cfg)
            v, _ = integrate.quad(lambda y: joint_distance_density(x, y, cfg), y_lo, y_hi)
            return v
        total, err = integrate.quad(inner, 0.0, np.inf, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_joint_zero_outside_strip(self):
        cfg = validation_config(5.0)
        x = 200.0
        y_lo, y_hi = offloading_strip(x, cfg)
        assert joint_distance_density(x, 1.0001 * y_hi, cfg) == 0.0
        assert joint_distance_density(x, 0.9999 * y_lo, cfg) == 0.0
        assert joint_distance_density(x, 0.5 * (y_lo + y_hi), cfg) > 0.0

    def test_rejects_offloaded_class(self):
        with pytest.raises(ValueError):
            serving_distance_density(UserClass.OFFLOADED_IN, 10.0, validation_config())


class TestLoadPmf:
    def test_sparse_users_degenerate_load(self):
        cfg = validation_config()
        sparse = NetworkConfig(
            macro=cfg.macro, pico=cfg.pico, user_density=1e-12,
            bias=cfg.bias, bandwidth=cfg.bandwidth, in_dof=cfg.in_dof,
        )
        assert load_pmf(MACRO, 1, sparse) == pytest.approx(1.0, abs=1e-7)
        assert mean_load(MACRO, sparse) == pytest.approx(1.0, abs=1e-7)

    @pytest.mark.parametrize("cfg", ALL_CONFIGS)
    @pytest.mark.parametrize("tier", [MACRO, PICO])
    def test_sums_to_one(self, cfg, tier):
        vals, _ = pmf_tail_sum(lambda n: load_pmf(tier, n, cfg), start=1)
        assert float(vals.sum()) == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("tier", [MACRO, PICO])
    def test_mean_consistent_with_fitted_slope(self, tier):
        # the 1.28 slope is a fit, not an identity: agree within 2%
        cfg = validation_config(5.0)
        vals, n_max = pmf_tail_sum(lambda n: load_pmf(tier, n, cfg), start=1)
        mean_from_pmf = float(np.sum(np.arange(1, n_max + 1) * vals))
        assert mean_from_pmf == pytest.approx(mean_load(tier, cfg), rel=0.02)


class TestActiveOffloadedPmfs:
    def test_no_bias_means_no_offloading(self):
        cfg = validation_config().with_bias(1.0)
        assert active_offloaded_pmf(0, cfg) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("cfg", ALL_CONFIGS)
    def test_both_pmfs_sum_to_one(self, cfg):
        vals, _ = pmf_tail_sum(lambda n: active_offloaded_pmf(n, cfg), start=0)
        assert float(vals.sum()) == pytest.approx(1.0, abs=1e-6)
        vals, _ = pmf_tail_sum(lambda n: active_offloaded_seen_pmf(n, cfg), start=1)
        assert float(vals.sum()) == pytest.approx(1.0, abs=1e-6)

    def test_pmfs_nonnegative(self):
        cfg = validation_config(10.0)
        n = np.arange(0, 50)
        assert np.all(active_offloaded_pmf(n, cfg) >= 0.0)
        assert np.all(active_offloaded_seen_pmf(n[1:], cfg) >= 0.0)


class TestInDofPmf:
    def test_zero_budget_point_mass(self):
        cfg = validation_config()
        assert in_dof_pmf(0, 0, cfg) == 1.0

    @pytest.mark.parametrize("budget", [0, 1, 2, 4, 7])
    def test_sums_to_one_exactly(self, budget):
        cfg = validation_config(5.0)
        total = float(np.sum(in_dof_pmf(np.arange(budget + 1), budget, cfg)))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_tail_aggregation_matches_direct_summation(self):
        cfg = validation_config(5.0)
        budget = 2
        tail_vals, n_max = pmf_tail_sum(lambda n: active_offloaded_pmf(n, cfg), start=budget)
        assert in_dof_pmf(budget, budget, cfg) == pytest.approx(
            float(tail_vals.sum()), abs=1e-6
        )
        assert in_dof_pmf(1, budget, cfg) == pytest.approx(
            active_offloaded_pmf(1, cfg), abs=1e-12
        )

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            in_dof_pmf(3, 2, validation_config())


class TestInSelectionProbability:
    def test_zero_budget(self):
        assert in_selection_probability(0, validation_config()) == 0.0

    def test_monotone_in_budget(self):
        cfg = validation_config(5.0)
        vals = [in_selection_probability(u, cfg) for u in range(8)]
        assert all(0.0 <= v <= 1.0 for v in vals)
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_matches_expectation_over_seen_pmf(self):
        # independent route: E[min(U, K)/K] over the seen-count pmf
        cfg = validation_config(10.0)
        for budget in (1, 3, 6):
            vals, n_max = pmf_tail_sum(lambda n: active_offloaded_seen_pmf(n, cfg), start=1)
            n = np.arange(1, n_max + 1)
            want = float(np.sum(np.minimum(budget, n) / n * vals))
            assert in_selection_probability(budget, cfg) == pytest.approx(want, abs=1e-6)

    def test_no_offloading_selects_lone_user(self):
        cfg = validation_config().with_bias(1.0)
        assert in_selection_probability(3, cfg) == 1.0


class TestAssociationStats:
    def test_bundle_consistency(self):
        cfg = validation_config(5.0, in_dof=4)
        stats = association_stats(cfg)
        assert stats.A1 + stats.A2_unoff + stats.A2_off == pytest.approx(1.0, abs=1e-9)
        assert stats.A2 == pytest.approx(stats.A2_unoff + stats.A2_off)
        assert stats.pr_in_selected == pytest.approx(in_selection_probability(4, cfg))
        assert stats.mean_load_macro >= 1.0 and stats.mean_load_pico >= 1.0
