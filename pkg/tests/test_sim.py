import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtr, ndtri

from dcp import (Dgp, InvalidArgumentError, generate, normal_cdf, normal_quantile,
                 oracle_dcp_interval, oracle_mean_conditional_coverage,
                 oracle_mean_halfwidth, oracle_mean_interval, realized_volatility)
from dcp.rng import DeterministicRng


class TestDeterministicRng:
    def test_reproducible_streams(self):
        a = DeterministicRng(7).uniforms(1000)
        b = DeterministicRng(7).uniforms(1000)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = DeterministicRng(7, stream=0).uniforms(1000)
        b = DeterministicRng(7, stream=1).uniforms(1000)
        assert not np.array_equal(a, b)

    def test_supports_open_unit_interval(self):
        u = DeterministicRng(3).uniforms(200000)
        assert u.min() > 0.0 and u.max() < 1.0

    def test_uniform_moments(self):
        u = DeterministicRng(11).uniforms(200000)
        assert abs(u.mean() - 0.5) < 0.005
        assert abs(u.var() - 1.0 / 12.0) < 0.002

    def test_normal_moments(self):
        z = DeterministicRng(13).normals(200000)
        assert abs(z.mean()) < 0.01
        assert abs(z.std() - 1.0) < 0.01

    def test_permutation_is_permutation(self):
        p = DeterministicRng(5).permutation(257)
        np.testing.assert_array_equal(np.sort(p), np.arange(257))


class TestNormalQuantile:
    def test_against_independent_implementation(self):
        ps = np.concatenate([[1e-12, 1e-9, 1e-4], np.linspace(0.001, 0.999, 997),
                             [1 - 1e-9]])
        ours = normal_quantile(ps)
        theirs = ndtri(ps)
        assert np.max(np.abs(ours - theirs)) < 1e-12

    def test_endpoints(self):
        assert normal_quantile(0.0) == -math.inf
        assert normal_quantile(1.0) == math.inf

    def test_round_trip(self):
        zs = np.linspace(-6, 6, 101)
        np.testing.assert_allclose(normal_quantile(normal_cdf(zs)), zs, atol=1e-9)

    def test_rejects_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            normal_quantile(1.5)


class TestGenerate:
    def test_location_scale_moments(self):
        data = generate(Dgp("location_scale", seed=1), 10000)
        x = data.x[:, 0]
        ratio = data.y / x
        assert abs(np.mean(ratio - 1.0)) < 0.05
        assert abs(np.std((data.y - x) / x) - 1.0) < 0.05
        assert x.min() > 0.0 and x.max() < 1.0

    def test_skewed_exponential_moments(self):
        data = generate(Dgp("skewed_exponential", seed=2), 20000)
        x = data.x[:, 0]
        assert x.min() > 0.5 and x.max() < 1.5
        draws = data.y / x
        assert abs(np.mean(draws) - 1.0) < 0.05
        assert np.all(data.y >= 0.0)

    def test_seed_determinism(self):
        d1 = generate(Dgp("location_scale", seed=42), 500)
        d2 = generate(Dgp("location_scale", seed=42), 500)
        np.testing.assert_array_equal(d1.y, d2.y)
        np.testing.assert_array_equal(d1.x, d2.x)

    def test_seeds_differ(self):
        d1 = generate(Dgp("location_scale", seed=1), 100)
        d2 = generate(Dgp("location_scale", seed=2), 100)
        assert not np.array_equal(d1.y, d2.y)

    def test_garch_like_shape(self):
        data = generate(Dgp("ar_garch_like", seed=3), 600)
        assert data.time_ordered
        assert data.n_obs == 600
        assert np.all(data.x[:, 0] > 0.0)
        # volatility clustering: squared returns correlate with lagged rv
        corr = np.corrcoef(data.x[:, 0], np.abs(data.y))[0, 1]
        assert corr > 0.1

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgumentError):
            Dgp("garch", seed=0)


class TestRealizedVolatility:
    def test_constant_returns_value(self):
        rv = realized_volatility(np.full(23, 0.01), window=22)
        assert np.isnan(rv[:22]).all()
        assert rv[22] == pytest.approx(math.sqrt(22.0) * 0.01)

    def test_zero_returns(self):
        rv = realized_volatility(np.zeros(30), window=22)
        assert np.all(rv[22:] == 0.0)

    def test_scaling_homogeneity(self, rng):
        r = rng.normal(size=60)
        rv1 = realized_volatility(r)
        rv2 = realized_volatility(-2.5 * r)
        np.testing.assert_allclose(rv2[22:], 2.5 * rv1[22:], rtol=1e-12)

    def test_past_only_window(self, rng):
        r = rng.normal(size=40)
        rv = realized_volatility(r, window=22)
        expected = math.sqrt(np.sum(r[8:30] ** 2))
        assert rv[30] == pytest.approx(expected, rel=1e-12)

    def test_too_short_rejected(self):
        with pytest.raises(InvalidArgumentError):
            realized_volatility(np.ones(22), window=22)


class TestOracleDcpInterval:
    def test_frozen_values(self):
        iv = oracle_dcp_interval(0.5, 0.1)
        assert iv.lower == pytest.approx(-0.3224268134757358, abs=1e-10)
        assert iv.upper == pytest.approx(1.3224268134757358, abs=1e-10)

    def test_length_collapses_at_zero(self):
        iv = oracle_dcp_interval(1e-9, 0.1)
        assert iv.length < 1e-8

    def test_conditional_coverage_monte_carlo(self):
        rng_ = DeterministicRng(99)
        eps = rng_.normals(20000)
        for x in (0.1, 0.5, 0.9):
            iv = oracle_dcp_interval(x, 0.1)
            y = x + x * eps
            cov = np.mean((y >= iv.lower) & (y <= iv.upper))
            se = math.sqrt(0.09 / eps.size)
            assert abs(cov - 0.9) < 3 * se


class TestOracleMeanInterval:
    def test_halfwidth_solves_integral(self):
        q = oracle_mean_halfwidth(0.1)
        target, _ = quad(lambda x: 2.0 * ndtr(q / x) - 1.0, 0.0, 1.0, limit=200)
        assert target == pytest.approx(0.9, abs=1e-6)

    def test_constant_length(self):
        q = oracle_mean_halfwidth(0.1)
        for x in (0.1, 0.5, 0.9):
            iv = oracle_mean_interval(x, 0.1)
            assert iv.length == pytest.approx(2.0 * q, rel=1e-12)

    def test_over_and_under_coverage_pattern(self):
        assert oracle_mean_conditional_coverage(0.2, 0.1) > 0.9
        assert oracle_mean_conditional_coverage(1.0, 0.1) < 0.9

    def test_high_alpha_limit(self):
        assert oracle_mean_halfwidth(0.999) < 0.01
