"""Tests for the incomplete-beta / partition / Laplace-transform primitives.

Expected values tagged as frozen below were produced once with mpmath at
50 significant digits (mp.betainc, which evaluates the defining integral
through its hypergeometric representation) and pasted in as literals; the
quadrature oracles defined here are independent re-derivations used for
grid checks.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from hetnet_nulling.config import TierParams
from hetnet_nulling.special_math import (
    compositions3,
    incomplete_beta,
    integer_partitions,
    laplace_derivative_scaled,
    laplace_derivative_stack,
    laplace_interference,
)


def bprime_oracle(a, b, z):
    """Adaptive quadrature of u^(a-1) (1-u)^(b-1) on [z, 1].

    Uses QUADPACK's algebraic-endpoint weighting for the (1-u)^(b-1)
    factor, so the b < 1 singularity is handled exactly; independent of
    the regularized-incomplete-beta route the implementation takes.
    """
    val, err = quad(
        lambda u: u ** (a - 1.0),
        z,
        1.0,
        weight="alg",
        wvar=(0.0, b - 1.0),
        epsabs=1e-13,
        epsrel=1e-12,
        limit=300,
    )
    assert err < 1e-9 * max(abs(val), 1.0)
    return val


def laplace_oracle(s, r, tier):
    """Direct integral form of the tier interference Laplace transform."""
    alpha = tier.pathloss
    if s == 0:
        return 1.0
    integrand = lambda v: (s * v ** -alpha) / (1.0 + s * v ** -alpha) * v
    knee = s ** (1.0 / alpha)  # where the fading factor crosses 1/2
    pieces = [r, knee, np.inf] if knee > r else [r, np.inf]
    val = err = 0.0
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        v, e = quad(integrand, lo, hi, limit=400, epsabs=1e-12, epsrel=1e-12)
        val += v
        err += e
    # the transform's relative error is the exponent's absolute error
    assert 2.0 * math.pi * tier.density * err < 3e-9
    return math.exp(-2.0 * math.pi * tier.density * val)


def partition_count_oracle(m):
    """Partition function via Euler's pentagonal-number recurrence."""
    counts = [1]
    for n in range(1, m + 1):
        total, k = 0, 1
        while True:
            g1 = k * (3 * k - 1) // 2
            g2 = k * (3 * k + 1) // 2
            if g1 > n and g2 > n:
                break
            sign = -1 if k % 2 == 0 else 1
            if g1 <= n:
                total += sign * counts[n - g1]
            if g2 <= n:
                total += sign * counts[n - g2]
            k += 1
        counts.append(total)
    return counts[m]


class TestIncompleteBeta:
    def test_unit_integrand(self):
        assert incomplete_beta(1.0, 1.0, 0.3) == pytest.approx(0.7, abs=1e-12)

    def test_vanishes_as_z_approaches_one(self):
        assert incomplete_beta(1.5, 0.5, 1.0 - 1e-12) == pytest.approx(0.0, abs=1e-5)

    @pytest.mark.parametrize(
        "a, b, z, expected",
        [
            # frozen mpmath (dps=50) values of the defining integral
            (1.5, 0.5, 0.5, 1.2853981633974483),
            (0.5, 0.5, 0.25, 2.0943951023931955),
            (1.5, 0.5, 0.9, 0.62175055439664213),
            (2.0 / 3.0, 1.0 / 3.0, 1e-6, 3.6274487284284357),
            (1.5, 2.5, 0.2, 0.14706025639092798),
            (3.0, 0.1, 0.7, 8.4200946559524737),
        ],
    )
    def test_frozen_values(self, a, b, z, expected):
        assert incomplete_beta(a, b, z) == pytest.approx(expected, rel=1e-10)
        # the in-file quadrature oracle must reproduce the frozen constants;
        # QUADPACK's own error estimate is unreliable below b ~ 0.25, which
        # is far outside the operating regime b = 1 - 2/alpha > 1/3
        if b >= 0.25:
            assert bprime_oracle(a, b, z) == pytest.approx(expected, rel=2e-9)

    def test_oracle_grid(self):
        for alpha in (3.0, 4.0, 4.5):
            for a in (2.0 / alpha, 1.0 + 2.0 / alpha, 2.0 - 2.0 / alpha):
                for z in (1e-4, 0.2, 0.6, 0.99):
                    b = 1.0 - 2.0 / alpha
                    assert incomplete_beta(a, b, z) == pytest.approx(
                        bprime_oracle(a, b, z), rel=1e-10
                    )

    def test_additivity(self):
        a, b, z1, z2 = 1.5, 0.5, 0.2, 0.7
        segment, _ = quad(lambda u: u ** (a - 1) * (1 - u) ** (b - 1), z1, z2)
        assert incomplete_beta(a, b, z1) == pytest.approx(
            incomplete_beta(a, b, z2) + segment, rel=1e-10
        )

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            incomplete_beta(1.5, 0.5, 0.0)
        with pytest.raises(ValueError):
            incomplete_beta(1.5, 0.5, 1.0)
        with pytest.raises(ValueError):
            incomplete_beta(1.5, -0.5, 0.5)
        with pytest.raises(ValueError):
            incomplete_beta(1.5, 0.0, 0.5)

    @given(
        a=st.floats(0.3, 5.0),
        b=st.floats(0.05, 3.0),
        z1=st.floats(0.01, 0.97),
        dz=st.floats(0.001, 0.02),
    )
    @settings(max_examples=60, deadline=None)
    def test_strictly_decreasing_in_z(self, a, b, z1, dz):
        assert incomplete_beta(a, b, z1) > incomplete_beta(a, b, z1 + dz)

    def test_vectorized(self):
        z = np.array([0.2, 0.5, 0.8])
        out = incomplete_beta(1.5, 0.5, z)
        assert out.shape == (3,)
        assert out[0] > out[1] > out[2]


class TestIntegerPartitions:
    def test_base_cases(self):
        assert integer_partitions(0) == ((),)
        assert integer_partitions(1) == ((1,),)
        assert set(integer_partitions(2)) == {(2, 0), (0, 1)}

    def test_count_m4(self):
        assert len(integer_partitions(4)) == 5

    @pytest.mark.parametrize("m", list(range(21)))
    def test_counts_match_pentagonal_recurrence(self, m):
        assert len(integer_partitions(m)) == partition_count_oracle(m)

    @pytest.mark.parametrize("m", [1, 3, 7, 12])
    def test_partitions_valid_and_unique(self, m):
        parts = integer_partitions(m)
        assert len(set(parts)) == len(parts)
        for mult in parts:
            assert len(mult) == m
            assert sum((a + 1) * p for a, p in enumerate(mult)) == m
            assert all(p >= 0 for p in mult)


class TestCompositions3:
    def test_base_cases(self):
        assert compositions3(0) == ((0, 0, 0),)
        assert len(compositions3(1)) == 3

    @pytest.mark.parametrize("n", [2, 5, 9])
    def test_stars_and_bars_count(self, n):
        triples = compositions3(n)
        assert len(triples) == (n + 1) * (n + 2) // 2
        assert len(set(triples)) == len(triples)
        assert all(sum(t) == n and min(t) >= 0 for t in triples)


MACRO_TIER = TierParams(density=1e-4, pathloss=4.0, power=10.0, antennas=8)


class TestLaplaceInterference:
    def test_s_zero_is_one(self):
        assert laplace_interference(0.0, 123.0, MACRO_TIER) == 1.0

    @pytest.mark.parametrize("alpha", [3.0, 4.0, 4.5])
    def test_matches_integral_oracle(self, alpha):
        tier = TierParams(density=5e-4, pathloss=alpha, power=1.0, antennas=4)
        for r in (0.0, 20.0, 80.0, 300.0):
            for beta in (0.05, 1.0, 20.0):
                s = beta * max(r, 30.0) ** alpha
                got = laplace_interference(s, r, tier)
                want = laplace_oracle(s, r, tier)
                assert got == pytest.approx(want, rel=1e-8)

    def test_range_and_monotonicity(self):
        r = 150.0
        s_grid = np.array([1e3, 1e5, 1e7, 1e9, 1e11])
        vals = laplace_interference(s_grid, r, MACRO_TIER)
        assert np.all(vals > 0) and np.all(vals <= 1)
        assert np.all(np.diff(vals) < 0)
        r_grid = np.array([10.0, 50.0, 200.0, 500.0])
        vals_r = laplace_interference(1e8, r_grid, MACRO_TIER)
        assert np.all(np.diff(vals_r) > 0)

    def test_rejects_negative_arguments(self):
        with pytest.raises(ValueError):
            laplace_interference(-1.0, 10.0, MACRO_TIER)
        with pytest.raises(ValueError):
            laplace_interference(1.0, -10.0, MACRO_TIER)


def finite_difference_scaled(m, s, r, tier, rel_step):
    """(-s)^m times the m-th s-derivative, by central differences."""
    h = s * rel_step
    f = lambda x: laplace_interference(x, r, tier)
    if m == 1:
        d = (f(s + h) - f(s - h)) / (2 * h)
    elif m == 2:
        d = (f(s + h) - 2 * f(s) + f(s - h)) / h**2
    else:
        raise ValueError(m)
    return (-s) ** m * d


class TestLaplaceDerivativeScaled:
    # well-conditioned point: transform well away from both 0 and 1
    TIER = TierParams(density=1e-3, pathloss=4.0, power=1.0, antennas=4)
    S, R = 2.0 * 50.0**4, 50.0

    def test_m0_equals_transform(self):
        assert laplace_derivative_scaled(0, self.S, self.R, self.TIER) == pytest.approx(
            laplace_interference(self.S, self.R, self.TIER), rel=1e-14
        )

    def test_m1_matches_finite_difference(self):
        got = laplace_derivative_scaled(1, self.S, self.R, self.TIER)
        want = finite_difference_scaled(1, self.S, self.R, self.TIER, 1e-5)
        assert got == pytest.approx(want, rel=1e-5)

    def test_m2_matches_finite_difference(self):
        got = laplace_derivative_scaled(2, self.S, self.R, self.TIER)
        want = finite_difference_scaled(2, self.S, self.R, self.TIER, 5e-4)
        assert got == pytest.approx(want, rel=1e-4)

    @pytest.mark.parametrize("alpha", [3.0, 4.5])
    def test_finite_difference_on_second_config(self, alpha):
        tier = TierParams(density=2e-4, pathloss=alpha, power=1.0, antennas=4)
        s, r = 5.0 * 100.0**alpha, 100.0
        for m, step, tol in ((1, 1e-5, 1e-5), (2, 5e-4, 1e-4)):
            got = laplace_derivative_scaled(m, s, r, tier)
            want = finite_difference_scaled(m, s, r, tier, step)
            assert got == pytest.approx(want, rel=tol)

    @pytest.mark.parametrize("m", list(range(7)))
    def test_nonnegative(self, m):
        val = laplace_derivative_scaled(m, self.S, self.R, self.TIER)
        assert val >= 0.0

    def test_rejects_nonpositive_s_for_positive_order(self):
        with pytest.raises(ValueError):
            laplace_derivative_scaled(1, 0.0, 10.0, self.TIER)

    def test_stack_matches_literal_partition_sum(self):
        s = np.array([0.5 * 40.0**4, 3.0 * 80.0**4])
        r = np.array([40.0, 80.0])
        stack = laplace_derivative_stack(6, s, r, self.TIER)
        for m in range(6):
            literal = laplace_derivative_scaled(m, s, r, self.TIER) / math.factorial(m)
            np.testing.assert_allclose(stack[m], literal, rtol=1e-12)
