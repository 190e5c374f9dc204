import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dcp import (Dataset, InvalidArgumentError, SingularDesignError, TauGrid,
                 TrialGrid, default_dr_thresholds, dr_cdf, fit_dr, fit_ols, fit_qr,
                 fit_qr_process, invert_cdf, pinball_loss, qr_cdf,
                 qr_subgradient_check, rearrange)
from dcp.regress import DrCdfModel, GaussianCdfModel, QrCdfModel

from .oracles import enumeration_qr_objective, intercept_qr_vertex

ONES3 = np.ones((3, 1))
Y129 = np.array([1.0, 2.0, 9.0])


def intercept_data(y):
    y = np.asarray(y, dtype=float)
    return Dataset(y, np.ones((y.size, 1)))


class TestFitQr:
    def test_median_intercept_only(self):
        assert fit_qr(ONES3, Y129, 0.5)[0] == 2.0

    def test_tau09_vertex_and_objective(self):
        beta = fit_qr(ONES3, Y129, 0.9)
        assert beta[0] == 9.0
        # enumeration over the three data-point candidates gives 0.8+0.7+0 = 1.5
        assert pinball_loss(Y129, ONES3, beta, 0.9) == pytest.approx(1.5, abs=1e-12)

    def test_perfect_fit_any_tau(self):
        rng = np.random.default_rng(0)
        x = np.hstack([np.ones((12, 1)), rng.normal(size=(12, 2))])
        coef = np.array([0.5, -1.0, 2.0])
        y = x @ coef
        for tau in (0.2, 0.5, 0.8):
            beta = fit_qr(x, y, tau)
            np.testing.assert_allclose(beta, coef, atol=1e-9)
            assert pinball_loss(y, x, beta, tau) <= 1e-9

    def test_singular_design_rejected(self):
        x = np.hstack([np.ones((6, 1)), np.full((6, 1), 2.0)])
        with pytest.raises(SingularDesignError):
            fit_qr(x, np.arange(6.0), 0.5)

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidArgumentError):
            fit_qr(ONES3, np.array([1.0, np.nan, 2.0]), 0.5)

    def test_matches_enumeration_oracle(self, rng):
        for _ in range(40):
            n = int(rng.integers(3, 25))
            p = min(int(rng.integers(1, 4)), n)
            x = rng.normal(size=(n, p))
            x[:, 0] = 1.0
            y = rng.normal(size=n)
            tau = float(rng.uniform(0.05, 0.95))
            beta = fit_qr(x, y, tau)
            gap = pinball_loss(y, x, beta, tau) - enumeration_qr_objective(x, y, tau)
            assert gap <= 1e-8
            assert qr_subgradient_check(x, y, tau, beta)

    def test_permutation_invariance_bitexact(self, rng):
        x = np.hstack([np.ones((20, 1)), rng.normal(size=(20, 1))])
        y = rng.normal(size=20)
        perm = rng.permutation(20)
        b1 = fit_qr(x, y, 0.3)
        b2 = fit_qr(x[perm], y[perm], 0.3)
        np.testing.assert_array_equal(b1, b2)


class TestFitQrProcess:
    def test_one_two_three_four(self):
        fit = fit_qr_process(intercept_data([1.0, 2.0, 3.0, 4.0]),
                             TauGrid(np.array([0.25, 0.5, 0.75])))
        np.testing.assert_array_equal(fit.betas.ravel(), [1.0, 2.0, 3.0])
        assert fit.certified.all()

    def test_single_tau_reduces_to_fit_qr(self):
        data = intercept_data([3.0, 1.0, 4.0, 1.0, 5.0])
        fit = fit_qr_process(data, TauGrid(np.array([0.5])))
        np.testing.assert_array_equal(fit.betas[0], fit_qr(data.x, data.y, 0.5))

    def test_matches_per_tau_vertex_oracle(self, rng):
        y = rng.normal(size=15)
        data = intercept_data(y)
        grid = TauGrid.make(0.05, 19)
        fit = fit_qr_process(data, grid)
        expected = [intercept_qr_vertex(y, t) for t in grid.taus]
        np.testing.assert_array_equal(fit.betas.ravel(), expected)


class TestQrCdf:
    def setup_method(self):
        self.fit = fit_qr_process(intercept_data([1.0, 2.0, 3.0, 4.0]), TauGrid.make())

    def test_midpoint_half(self):
        val = qr_cdf(self.fit, np.array([1.0]), 2.5)
        assert val == pytest.approx(0.5, abs=2e-3)

    def test_below_support_trim(self):
        assert qr_cdf(self.fit, np.array([1.0]), -10.0) == pytest.approx(0.001)

    def test_above_support_one(self):
        assert qr_cdf(self.fit, np.array([1.0]), 10.0) == pytest.approx(1.0, abs=2e-3)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            qr_cdf(self.fit, np.array([1.0, 2.0]), 0.5)

    def test_monotone_in_y(self):
        model = QrCdfModel(self.fit)
        ys = np.linspace(-5, 5, 400)
        vals = model.cdf_values(np.array([1.0]), ys)
        assert np.all(np.diff(vals) >= 0.0)
        assert vals.min() >= 0.0 and vals.max() <= 1.0


class TestRearrange:
    def test_sorts(self):
        np.testing.assert_array_equal(rearrange([0.1, 0.3, 0.2]), [0.1, 0.2, 0.3])

    def test_idempotent_on_sorted(self):
        v = np.array([0.0, 0.5, 1.0])
        np.testing.assert_array_equal(rearrange(v), v)

    def test_constant_unchanged(self):
        np.testing.assert_array_equal(rearrange([2.0, 2.0]), [2.0, 2.0])

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=40))
    def test_idempotent_and_multiset_preserving(self, values):
        once = rearrange(values)
        np.testing.assert_array_equal(rearrange(once), once)
        np.testing.assert_array_equal(np.sort(values), once)

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidArgumentError):
            rearrange([0.1, np.inf])


class TestFitDr:
    def test_half_below_gives_zero_logit(self):
        data = intercept_data([0.0, 1.0, 2.0, 3.0])
        fit = fit_dr(data, np.array([1.5]))
        assert fit.betas[0, 0] == pytest.approx(0.0, abs=1e-4)
        assert dr_cdf(fit, np.array([1.0]), 1.5) == pytest.approx(0.5, abs=1e-4)

    def test_quarter_below_log_odds(self):
        data = intercept_data(np.arange(8.0))
        fit = fit_dr(data, np.array([1.5]))
        assert fit.betas[0, 0] == pytest.approx(np.log(1.0 / 3.0), abs=1e-4)

    def test_threshold_below_min_degenerate(self):
        data = intercept_data([1.0, 2.0, 3.0])
        fit = fit_dr(data, np.array([0.0, 2.5]))
        assert fit.degenerate[0] and not fit.degenerate[1]
        assert dr_cdf(fit, np.array([1.0]), 0.0) == pytest.approx(0.0, abs=1e-6)

    def test_monotone_after_rearrangement(self, rng):
        y = rng.normal(size=60)
        x = np.hstack([np.ones((60, 1)), rng.normal(size=(60, 1))])
        fit = fit_dr(Dataset(y, x), default_dr_thresholds(y, 25))
        model = DrCdfModel(fit)
        for _ in range(20):
            xv = np.array([1.0, rng.normal()])
            vals = model.cdf_values(xv, np.linspace(-4, 4, 300))
            assert np.all(np.diff(vals) >= 0.0)
            assert vals.min() >= 0.0 and vals.max() <= 1.0

    def test_grid_hit_exact_link_value(self):
        data = intercept_data([0.0, 1.0, 2.0, 3.0])
        fit = fit_dr(data, np.array([0.5, 1.5, 2.5]))
        model = DrCdfModel(fit)
        from scipy.special import expit
        levels = np.sort(expit(fit.betas[:, 0]))
        assert model.cdf(np.array([1.0]), 1.5) == levels[1]

    def test_below_first_threshold_zero(self):
        data = intercept_data([0.0, 1.0, 2.0, 3.0])
        fit = fit_dr(data, np.array([0.5, 1.5]))
        assert dr_cdf(fit, np.array([1.0]), -1.0) == 0.0

    def test_newton_gradient_at_convergence(self, rng):
        from scipy.special import expit

        from dcp.regress import canonical_order

        y = rng.normal(size=80)
        x = np.hstack([np.ones((80, 1)), rng.normal(size=(80, 1))])
        fit = fit_dr(Dataset(y, x), default_dr_thresholds(y, 15))
        assert fit.converged[~fit.degenerate].all()
        order = canonical_order(y, x)
        xs, ys = x[order], y[order]
        for i in np.flatnonzero(fit.converged):
            labels = (ys <= fit.threshold_grid[i]).astype(float)
            mu = expit(xs @ fit.betas[i])
            grad = xs.T @ (mu - labels) / len(ys) + 1e-6 * fit.betas[i]
            assert np.max(np.abs(grad)) < 1e-8

    def test_probit_link(self):
        data = intercept_data([0.0, 1.0, 2.0, 3.0])
        fit = fit_dr(data, np.array([1.5]), link="probit")
        from scipy.special import ndtr
        assert ndtr(fit.betas[0, 0]) == pytest.approx(0.5, abs=1e-4)

    def test_permutation_invariance(self, rng):
        y = rng.normal(size=40)
        x = np.hstack([np.ones((40, 1)), rng.normal(size=(40, 1))])
        perm = rng.permutation(40)
        f1 = fit_dr(Dataset(y, x), np.array([-0.5, 0.0, 0.5]))
        f2 = fit_dr(Dataset(y[perm], x[perm]), np.array([-0.5, 0.0, 0.5]))
        np.testing.assert_array_equal(f1.betas, f2.betas)


class TestFitOls:
    def test_exact_fit_floors_sd(self):
        x = np.linspace(1.0, 2.0, 10)[:, None]
        data = Dataset(2.0 * x[:, 0], x)
        fit = fit_ols(data)
        assert fit.beta[0] == pytest.approx(2.0, abs=1e-12)
        assert fit.residual_sd == 1e-6

    def test_intercept_only_mean(self):
        fit = fit_ols(intercept_data([1.0, 2.0, 9.0]))
        assert fit.beta[0] == pytest.approx(4.0)

    def test_zero_two_hand_arithmetic(self):
        fit = fit_ols(intercept_data([0.0, 2.0]))
        assert fit.beta[0] == pytest.approx(1.0)
        assert fit.residual_sd == pytest.approx(1.0)

    def test_scale_fit(self, rng):
        x = np.hstack([np.ones((200, 1)), rng.uniform(0.5, 1.5, size=(200, 1))])
        y = x[:, 1] * rng.normal(size=200)
        fit = fit_ols(Dataset(y, x), fit_scale=True)
        assert fit.scale_beta is not None and fit.scale_beta.shape == (2,)

    def test_rank_deficient(self):
        x = np.hstack([np.ones((5, 1)), np.ones((5, 1))])
        with pytest.raises(SingularDesignError):
            fit_ols(Dataset(np.arange(5.0), x))


class TestInvertCdf:
    def setup_method(self):
        self.fit = fit_qr_process(intercept_data([1.0, 2.0, 3.0, 4.0]), TauGrid.make())
        self.model = QrCdfModel(self.fit)
        self.grid = TrialGrid(np.linspace(-5.0, 5.0, 2001))

    def test_median_hits_two(self):
        val = invert_cdf(self.model, np.array([1.0]), 0.5, self.grid)
        assert val == pytest.approx(2.0, abs=self.grid.values[1] - self.grid.values[0])

    def test_tiny_tau_maps_to_fitted_support_edge(self):
        # below the trimmed model's rank floor, inversion lands at the first
        # grid point past the plateau (the smallest fitted quantile), not at
        # the grid edge
        val = invert_cdf(self.model, np.array([1.0]), 1e-9, self.grid)
        step = self.grid.values[1] - self.grid.values[0]
        assert val == pytest.approx(1.0, abs=2 * step)

    def test_low_tau_left_end_for_untrimmed_model(self):
        # a model whose CDF is positive everywhere still inverts low (but
        # above-floor) levels to the grid minimum when the quantile lies
        # left of the grid
        model = GaussianCdfModel(np.array([0.0]), 1.0)
        grid = TrialGrid(np.linspace(-1.0, 1.0, 101))
        assert invert_cdf(model, np.array([1.0]), 0.01, grid) == grid.min

    def test_saturation_flag(self):
        tight = TrialGrid(np.linspace(-5.0, 0.0, 50))
        val, saturated = invert_cdf(self.model, np.array([1.0]), 0.99, tight,
                                    return_flag=True)
        assert saturated and val == tight.max

    def test_round_trip(self):
        for tau in np.linspace(0.05, 0.95, 19):
            y = invert_cdf(self.model, np.array([1.0]), tau, self.grid)
            assert self.model.cdf(np.array([1.0]), y) >= tau


class TestGaussianModel:
    def test_cdf_quantile_consistency(self):
        model = GaussianCdfModel(np.array([1.0]), 2.0)
        x = np.array([1.0])
        for tau in (0.1, 0.5, 0.9):
            assert model.cdf(x, model.quantile(x, tau)) == pytest.approx(tau, abs=1e-12)
