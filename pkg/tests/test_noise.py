"""Noise families: densities, distribution functions, inverse-CDF sampling."""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import kstest

from cinest.errors import ParameterError
from cinest.noise import NoiseModel


@pytest.fixture(scope="module")
def heavy():
    return NoiseModel.heavy_tail(2.05)


class TestConstruction:
    def test_beta_at_most_two_rejected(self):
        # first absolute moment must stay finite
        for beta in (2.0, 1.5, 0.3, -1.0):
            with pytest.raises(ParameterError, match="first absolute moment"):
                NoiseModel.heavy_tail(beta)

    def test_gaussian_needs_positive_sigma(self):
        with pytest.raises(ParameterError):
            NoiseModel.gaussian(0.0)

    def test_unknown_family(self):
        with pytest.raises(ParameterError):
            NoiseModel(family="cauchy")


class TestPdf:
    def test_value_at_zero(self, heavy):
        assert heavy.pdf(0.0) == pytest.approx(0.525, abs=1e-12)

    def test_value_at_one(self, heavy):
        # direct evaluation of (beta-1) / (2 (1+|w|)^beta)
        assert heavy.pdf(1.0) == pytest.approx(1.05 / (2 * 2 ** 2.05), rel=1e-14)
        assert heavy.pdf(1.0) == pytest.approx(0.12677914317138597, rel=1e-12)

    def test_symmetry(self, heavy):
        w = np.linspace(0.0, 50.0, 501)
        np.testing.assert_array_equal(heavy.pdf(w), heavy.pdf(-w))

    def test_integrates_to_one(self, heavy):
        # adaptive quadrature over the bulk plus the exact analytic tail
        w_max = 1e4
        core, _ = quad(heavy.pdf, 0, w_max, epsabs=1e-12, limit=300)
        tail = 1.0 - heavy.cdf(w_max)
        assert 2.0 * (core + tail) == pytest.approx(1.0, abs=1e-6)

    def test_gaussian_integrates_to_one(self):
        m = NoiseModel.gaussian(2.5)
        core, _ = quad(m.pdf, 0, 60.0, epsabs=1e-12, limit=300)
        assert 2.0 * core == pytest.approx(1.0, abs=1e-9)


class TestCdf:
    def test_median_at_zero(self, heavy):
        assert heavy.cdf(0.0) == pytest.approx(0.5, abs=0)

    def test_normalization_limits(self, heavy):
        assert heavy.cdf(1e300) == pytest.approx(1.0, abs=1e-12)
        assert heavy.cdf(-1e300) == pytest.approx(0.0, abs=1e-12)

    def test_value_at_one(self, heavy):
        # frozen from the quadrature oracle: 0.5 + int_0^1 pdf
        oracle, err = quad(heavy.pdf, 0.0, 1.0, epsabs=1e-14)
        assert err < 1e-12
        assert heavy.cdf(1.0) == pytest.approx(0.5 + oracle, abs=1e-12)
        assert heavy.cdf(1.0) == pytest.approx(0.7585159177687886, rel=1e-14)

    def test_reflection(self, heavy):
        w = np.linspace(0.0, 30.0, 301)
        np.testing.assert_allclose(heavy.cdf(-w), 1.0 - heavy.cdf(w),
                                   rtol=0, atol=1e-15)

    def test_monotone(self, heavy):
        w = np.linspace(-100, 100, 2001)
        assert np.all(np.diff(heavy.cdf(w)) >= 0)

    def test_derivative_matches_pdf(self, heavy):
        w = np.linspace(-5.0, 5.0, 41)
        h = 1e-6
        numeric = (heavy.cdf(w + h) - heavy.cdf(w - h)) / (2 * h)
        np.testing.assert_allclose(numeric, heavy.pdf(w), atol=1e-5)


class TestSampling:
    def test_median_uniform_maps_to_zero(self, heavy):
        assert heavy.ppf(0.5) == 0.0

    def test_inverse_transform_round_trip(self, heavy):
        u = np.linspace(1e-6, 1 - 1e-6, 2001)
        np.testing.assert_allclose(heavy.cdf(heavy.ppf(u)), u,
                                   rtol=0, atol=1e-10)

    def test_ks_distance(self, heavy):
        draws = heavy.sample(np.random.default_rng(20240915), 100_000)
        assert kstest(draws, heavy.cdf).statistic < 0.01

    def test_gaussian_ks(self):
        m = NoiseModel.gaussian(1.7)
        draws = m.sample(np.random.default_rng(5), 100_000)
        assert kstest(draws, m.cdf).statistic < 0.01

    def test_symmetric_centering(self, heavy):
        # the tail index beta-1 = 1.05 makes the sample mean nearly
        # useless as a location estimate (it wanders at n^(1/1.05 - 1));
        # the median and the sign balance do concentrate
        draws = heavy.sample(np.random.default_rng(11), 1_000_000)
        assert abs(np.median(draws)) < 0.01
        assert abs(np.mean(draws > 0) - 0.5) < 0.002

    def test_sample_vector_reduces_to_scalar(self, heavy):
        a = heavy.sample_vector(1, np.random.default_rng(3))
        b = heavy.sample(np.random.default_rng(3), 1)
        np.testing.assert_array_equal(a, b)

    def test_vector_entries_independent(self, heavy):
        draws = heavy.sample(np.random.default_rng(17), (100_000, 3))
        raw = np.corrcoef(draws, rowvar=False)
        assert np.max(np.abs(raw[~np.eye(3, dtype=bool)])) < 0.02
        # and the tail-robust variant of the same check
        signs = np.corrcoef(np.sign(draws), rowvar=False)
        assert np.max(np.abs(signs[~np.eye(3, dtype=bool)])) < 0.02

    def test_vector_entries_each_well_distributed(self, heavy):
        draws = heavy.sample(np.random.default_rng(23), (100_000, 2))
        for col in range(2):
            assert kstest(draws[:, col], heavy.cdf).statistic < 0.01


class TestMoments:
    def test_mean_abs_closed_form(self, heavy):
        assert heavy.mean_abs() == pytest.approx(20.0, rel=1e-12)
        oracle, _ = quad(lambda w: w * heavy.pdf(w), 0, np.inf, limit=400)
        assert heavy.mean_abs() == pytest.approx(2 * oracle, rel=1e-8)

    def test_second_moment_diverges_below_three(self, heavy):
        assert heavy.second_moment() == np.inf
        # truncated second moment grows without bound
        assert heavy.truncated_second_moment(1e40) > 10.0
        small = heavy.truncated_second_moment(10.0)
        assert heavy.truncated_second_moment(1e6) > small

    def test_truncated_matches_quadrature(self, heavy):
        oracle, _ = quad(lambda w: w * w * heavy.pdf(w), -8.0, 8.0,
                         epsabs=1e-12)
        assert heavy.truncated_second_moment(8.0) == pytest.approx(oracle, rel=1e-9)

    def test_finite_variance_above_three(self):
        m = NoiseModel.heavy_tail(4.0)
        assert m.second_moment() == pytest.approx(1.0, rel=1e-12)
        oracle, _ = quad(lambda w: w * w * m.pdf(w), 0, np.inf, limit=400)
        assert m.second_moment() == pytest.approx(2 * oracle, rel=1e-7)

    def test_gaussian_moments(self):
        m = NoiseModel.gaussian(3.0)
        assert m.second_moment() == pytest.approx(9.0)
        assert m.truncated_second_moment(np.inf if False else 1e3) == pytest.approx(9.0)
        assert m.mean_abs() == pytest.approx(3.0 * np.sqrt(2 / np.pi), rel=1e-12)


class TestZeroFamily:
    def test_samples_are_zero(self):
        m = NoiseModel.zero()
        np.testing.assert_array_equal(
            m.sample(np.random.default_rng(0), 100), np.zeros(100))
        assert m.second_moment() == 0.0
