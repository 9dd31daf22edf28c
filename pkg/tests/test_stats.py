"""Quantile functions, summary statistics, and random streams.

Every derived expectation below is checked against the independent
reference implementations in oracles.py (series/continued-fraction CDFs
with bisection, exact rational binomial enumeration), so the package and
the tests never share a numerical code path.
"""

import math
import statistics
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

import oracles
from shortchain import (
    RandomStream,
    binomial_quantile,
    chi_square_quantile,
    pearson_correlation_squared,
    sample_quantile,
    student_t_quantile,
    summary_stats,
)


class TestStudentTQuantile:
    def test_median_is_zero(self):
        assert student_t_quantile(0.5, 7) == pytest.approx(0.0, abs=1e-12)

    def test_matches_cauchy_closed_form(self):
        # df=1 is Cauchy: quantile = tan(pi (p - 1/2)).
        for p in (0.6, 0.8, 0.975, 0.999):
            assert student_t_quantile(p, 1) == pytest.approx(
                math.tan(math.pi * (p - 0.5)), rel=1e-8)

    def test_p975_df1_frozen(self):
        assert student_t_quantile(0.975, 1) == pytest.approx(12.7062047364, rel=1e-9)

    def test_matches_bisection_oracle_large_df(self):
        assert student_t_quantile(0.975, 385) == pytest.approx(
            oracles.t_quantile(0.975, 385), abs=1e-8)
        assert student_t_quantile(0.975, 385) == pytest.approx(1.96614481, rel=1e-8)

    def test_matches_bisection_oracle_assorted(self):
        for p, df in ((0.1, 3), (0.42, 11), (0.9, 2), (0.99, 60)):
            assert student_t_quantile(p, df) == pytest.approx(
                oracles.t_quantile(p, df), abs=1e-8)

    @given(st.floats(0.01, 0.99), st.integers(1, 50))
    def test_symmetry(self, p, df):
        total = student_t_quantile(p, df) + student_t_quantile(1.0 - p, df)
        assert abs(total) < 1e-10

    def test_monotone_in_p(self):
        qs = [student_t_quantile(p, 9) for p in np.linspace(0.05, 0.95, 19)]
        assert all(a <= b for a, b in zip(qs, qs[1:]))

    @pytest.mark.parametrize("p,df", [(0.0, 5), (1.0, 5), (-0.1, 5), (0.5, 0)])
    def test_domain_errors(self, p, df):
        with pytest.raises(ValueError):
            student_t_quantile(p, df)


class TestChiSquareQuantile:
    def test_df2_closed_form(self):
        # df=2 is Exponential(1/2): quantile = -2 ln(1 - p).
        for p in (0.3, 0.5, 0.9, 0.975):
            assert chi_square_quantile(p, 2) == pytest.approx(
                -2.0 * math.log1p(-p), rel=1e-9)

    def test_median_df2_frozen(self):
        assert chi_square_quantile(0.5, 2) == pytest.approx(1.3862943611, rel=1e-9)

    def test_matches_incomplete_gamma_oracle(self):
        assert chi_square_quantile(0.975, 9) == pytest.approx(
            oracles.chi2_quantile(0.975, 9), abs=1e-8)
        assert chi_square_quantile(0.975, 9) == pytest.approx(19.0227678, rel=1e-8)
        for p, df in ((0.025, 9), (0.6, 1), (0.99, 386)):
            assert chi_square_quantile(p, df) == pytest.approx(
                oracles.chi2_quantile(p, df), rel=1e-8)

    def test_small_p_approaches_zero(self):
        assert 0.0 <= chi_square_quantile(1e-12, 4) < 1e-5

    def test_monotone_in_p(self):
        qs = [chi_square_quantile(p, 5) for p in np.linspace(0.05, 0.95, 19)]
        assert all(a <= b for a, b in zip(qs, qs[1:]))

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            chi_square_quantile(0.0, 3)
        with pytest.raises(ValueError):
            chi_square_quantile(0.5, -1)


class TestBinomialQuantile:
    def test_enumerated_pmf_example(self):
        # n=4, p=1/2: pmf {1,4,6,4,1}/16, CDF(1)=0.3125 < 0.5 <= CDF(2)=0.6875.
        assert binomial_quantile(0.5, 4, 0.5) == 2

    def test_upper_tail_example(self):
        # CDF(3) = 0.9375 < 0.99 so the 0.99 quantile is 4.
        assert binomial_quantile(0.99, 4, 0.5) == 4

    def test_point_mass_at_zero(self):
        for q in (0.001, 0.5, 0.999):
            assert binomial_quantile(q, 12, 0.0) == 0

    def test_point_mass_at_n(self):
        assert binomial_quantile(0.7, 12, 1.0) == 12

    def test_order_statistic_indices_for_median(self):
        # The order-statistic pair used by median intervals at N=386 and 387.
        assert binomial_quantile(0.025, 386, 0.5) == 174
        assert binomial_quantile(0.975, 386, 0.5) + 1 == 213
        assert binomial_quantile(0.025, 387, 0.5) == 174
        assert binomial_quantile(0.975, 387, 0.5) + 1 == 214
        assert binomial_quantile(0.025, 386, 0.5) == oracles.binom_quantile_exact(0.025, 386, 0.5)
        assert binomial_quantile(0.975, 386, 0.5) == oracles.binom_quantile_exact(0.975, 386, 0.5)

    @given(st.floats(0.001, 0.999), st.integers(1, 50),
           st.floats(0.05, 0.95))
    def test_minimality_against_exact_enumeration(self, q, n, p):
        # Defining property: CDF(k-1) < q <= CDF(k), in exact arithmetic.
        # Skip draws sitting within float noise of a CDF step.
        qf = Fraction(q)
        near_tie = any(abs(oracles.binom_cdf_exact(j, n, p) - qf) < Fraction(1, 10**9)
                       for j in range(n + 1))
        assume(not near_tie)
        k = binomial_quantile(q, n, p)
        assert 0 <= k <= n
        assert oracles.binom_cdf_exact(k, n, p) >= qf
        if k > 0:
            assert oracles.binom_cdf_exact(k - 1, n, p) < qf

    def test_monotone_in_q(self):
        ks = [binomial_quantile(q, 30, 0.4) for q in np.linspace(0.01, 0.99, 25)]
        assert all(a <= b for a, b in zip(ks, ks[1:]))

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            binomial_quantile(0.0, 10, 0.5)
        with pytest.raises(ValueError):
            binomial_quantile(0.5, 10, 1.5)


class TestSummaryStats:
    def test_constant_rows(self):
        samples = np.full((6, 2), 3.25)
        means, sds = summary_stats(samples)
        assert np.allclose(means, 3.25)
        assert np.allclose(sds, 0.0)

    def test_two_point_example(self):
        means, sds = summary_stats(np.array([[-1.0], [1.0]]))
        assert means[0] == pytest.approx(0.0)
        assert sds[0] == pytest.approx(math.sqrt(2.0))

    def test_gaussian_draws(self):
        x = RandomStream(11, 0).standard_normal(1000)[:, None]
        means, sds = summary_stats(x)
        assert abs(means[0]) < 0.1
        assert 0.9 < sds[0] < 1.1

    def test_matches_stdlib_statistics(self):
        x = RandomStream(4, 2).standard_normal(37 * 3).reshape(37, 3)
        means, sds = summary_stats(x)
        for i in range(3):
            col = [float(v) for v in x[:, i]]
            assert means[i] == pytest.approx(statistics.fmean(col), rel=1e-12)
            assert sds[i] == pytest.approx(statistics.stdev(col), rel=1e-10)

    def test_requires_two_rows(self):
        with pytest.raises(ValueError):
            summary_stats(np.ones((1, 3)))


class TestSampleQuantile:
    def test_even_count_median(self):
        assert sample_quantile(np.array([1.0, 2.0, 3.0, 4.0]), 0.5) == 2.0

    def test_upper_limit_is_maximum(self):
        vals = np.array([0.4, -1.0, 2.5, 0.9])
        assert sample_quantile(vals, 0.999999) == 2.5

    def test_single_sample(self):
        assert sample_quantile(np.array([5.0]), 0.37) == 5.0

    def test_coordinate_selection(self):
        mat = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]])
        assert sample_quantile(mat, 0.5, coordinate=1) == 20.0

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60),
           st.floats(0.01, 0.999))
    def test_matches_order_statistic_oracle(self, values, p):
        expected = sorted(values)[max(1, math.ceil(len(values) * p)) - 1]
        assert sample_quantile(np.array(values), p) == expected


class TestPearsonCorrelationSquared:
    def test_identical_vectors(self):
        a = np.array([0.3, -1.2, 4.0, 2.2])
        assert pearson_correlation_squared(a, a) == pytest.approx(1.0)

    def test_negated_vectors(self):
        a = np.array([0.3, -1.2, 4.0, 2.2])
        assert pearson_correlation_squared(a, -a) == pytest.approx(1.0)

    def test_affine_invariance(self):
        s = RandomStream(8, 0)
        a = s.standard_normal(50)
        b = 0.4 * a + s.standard_normal(50)
        r2 = pearson_correlation_squared(a, b)
        assert pearson_correlation_squared(3.0 * a - 7.0, 0.5 * b + 2.0) == pytest.approx(r2)

    def test_independent_vectors_small(self):
        s = RandomStream(12, 0)
        r2 = pearson_correlation_squared(s.standard_normal(386), s.standard_normal(386))
        assert r2 < 0.05

    def test_constant_vector_degenerate(self):
        r2 = pearson_correlation_squared(np.ones(10), np.arange(10.0))
        assert math.isnan(r2)

    def test_bounded_by_one(self):
        s = RandomStream(3, 1)
        for _ in range(20):
            a = s.standard_normal(8)
            b = s.standard_normal(8)
            assert 0.0 <= pearson_correlation_squared(a, b) <= 1.0


class TestRandomStream:
    def test_reproducible(self):
        a = RandomStream(42, 3).standard_normal(16)
        b = RandomStream(42, 3).standard_normal(16)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RandomStream(42, 0).standard_normal(16)
        b = RandomStream(42, 1).standard_normal(16)
        assert not np.array_equal(a, b)

    def test_distinct_seeds_differ(self):
        a = RandomStream(1, 0).standard_normal(16)
        b = RandomStream(2, 0).standard_normal(16)
        assert not np.array_equal(a, b)

    def test_batched_normals_equal_sequential(self):
        # Batch draws must consume the stream exactly like repeated singles,
        # otherwise ensemble and single-chain code paths would diverge.
        batched = RandomStream(7, 2).standard_normal(12)
        s = RandomStream(7, 2)
        singles = np.array([s.standard_normal(1)[0] for _ in range(12)])
        assert np.array_equal(batched, singles)

    def test_batched_uniforms_equal_sequential(self):
        batched = RandomStream(7, 2).random(9)
        s = RandomStream(7, 2)
        singles = np.array([s.random() for _ in range(9)])
        assert np.array_equal(batched, singles)

    def test_validation(self):
        with pytest.raises(ValueError):
            RandomStream(-1, 0)
        with pytest.raises(ValueError):
            RandomStream(1, -2)
