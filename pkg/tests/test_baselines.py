import math

import numpy as np
import pytest

from dcp import (Dataset, Dgp, InvalidArgumentError, cp_mean_fit, cp_mean_predict,
                 cqr_fit, cqr_predict, conformal_quantile, fit_qr, generate)
from dcp.baselines import BaselineModel
from dcp.regress import _with_intercept, fit_ols


def design_data(t=120, seed=0, hetero=True):
    raw = generate(Dgp("location_scale", seed=seed), t)
    return Dataset(raw.y, _with_intercept(raw.x), time_ordered=False)


class TestCqrFit:
    def test_scores_negative_inside_band(self):
        data = design_data(200, seed=1)
        model = cqr_fit(data, 0.5, 0.1)
        beta_lo = fit_qr(data.x[:100], data.y[:100], 0.05)
        beta_hi = fit_qr(data.x[:100], data.y[:100], 0.95)
        q_lo = data.x[100:] @ beta_lo
        q_hi = data.x[100:] @ beta_hi
        y2 = data.y[100:]
        inside = (y2 > q_lo) & (y2 < q_hi)
        scores = np.maximum(q_lo - y2, y2 - q_hi)
        assert np.all(scores[inside] < 0.0)
        assert model.threshold == conformal_quantile(scores, 0.1)

    def test_boundary_score_zero(self):
        q_lo, q_hi, y = 1.0, 3.0, 3.0
        assert max(q_lo - y, y - q_hi) == 0.0

    def test_all_inside_negative_threshold_narrows(self):
        # calibration outcomes pinned strictly inside the fitted band
        rng = np.random.default_rng(3)
        y1 = np.concatenate([rng.uniform(0, 10, 48), [20.0, -20.0]])
        x1 = np.ones((50, 1))
        y2 = np.full(50, 5.0) + rng.uniform(-0.5, 0.5, 50)
        data = Dataset(np.concatenate([y1, y2]), np.ones((100, 1)))
        model = cqr_fit(data, 0.5, 0.1)
        assert model.threshold < 0.0
        iv = cqr_predict(model, np.array([1.0]))
        q_lo = float(model.beta_lo[0])
        q_hi = float(model.beta_hi[0])
        assert iv.lower > q_lo and iv.upper < q_hi

    def test_unknown_variant(self):
        with pytest.raises(InvalidArgumentError):
            cqr_fit(design_data(), 0.5, 0.1, variant="cqr_x")


class TestCqrPredict:
    def make_model(self, variant, threshold):
        return BaselineModel(variant, 0.1, threshold, (10, 10),
                             beta_lo=np.array([1.0, 0.0]),
                             beta_hi=np.array([3.0, 0.0]),
                             beta_mid=np.array([1.5, 0.0]))

    def test_zero_threshold_recovers_raw_band(self):
        iv = cqr_predict(self.make_model("cqr", 0.0), np.array([1.0, 0.3]))
        assert (iv.lower, iv.upper) == (1.0, 3.0)

    def test_positive_threshold_widens_both_ends(self):
        iv = cqr_predict(self.make_model("cqr", 0.25), np.array([1.0, 0.0]))
        assert (iv.lower, iv.upper) == (0.75, 3.25)

    def test_cqr_r_scales_by_width(self):
        # width 2, t = 0.1 -> each side widens by 0.2
        iv = cqr_predict(self.make_model("cqr_r", 0.1), np.array([1.0, 0.0]))
        assert iv.lower == pytest.approx(0.8)
        assert iv.upper == pytest.approx(3.2)

    def test_cqr_m_per_side_scaling(self):
        # lower distance to median 0.5, upper 1.5
        iv = cqr_predict(self.make_model("cqr_m", 0.2), np.array([1.0, 0.0]))
        assert iv.lower == pytest.approx(1.0 - 0.2 * 0.5)
        assert iv.upper == pytest.approx(3.0 + 0.2 * 1.5)

    def test_infinite_threshold(self):
        iv = cqr_predict(self.make_model("cqr", math.inf), np.array([1.0, 0.0]))
        assert iv.infinite


class TestCpMean:
    def test_exact_fit_degenerate_point_interval(self):
        x = _with_intercept(np.linspace(1.0, 2.0, 40)[:, None])
        data = Dataset(2.0 * x[:, 1], x)
        model = cp_mean_fit(data, 0.5, 0.1, weighted=False)
        assert model.threshold == 0.0
        iv = cp_mean_predict(model, np.array([1.0, 1.5]))
        assert iv.lower == iv.upper == pytest.approx(3.0)

    def test_constant_length_across_x(self):
        data = design_data(300, seed=2)
        model = cp_mean_fit(data, 0.5, 0.1, weighted=False)
        xs = np.hstack([np.ones((50, 1)), np.linspace(0.05, 0.95, 50)[:, None]])
        ivs = [cp_mean_predict(model, xs[i]) for i in range(50)]
        lengths = np.array([iv.upper - iv.lower for iv in ivs])
        # half-width is the same float for every x (scale is identically 1.0);
        # realized endpoint differences agree to IEEE cancellation noise
        expected = 2.0 * model.threshold
        tol = 4 * np.finfo(float).eps * (np.abs([iv.upper for iv in ivs]) + expected).max()
        assert np.all(np.abs(lengths - expected) <= tol)

    def test_cp_loc_length_tracks_scale(self):
        data = design_data(2000, seed=5)
        model = cp_mean_fit(data, 0.5, 0.1, weighted=True)
        x_small = np.array([1.0, 0.1])
        x_large = np.array([1.0, 0.9])
        iv_small = cp_mean_predict(model, x_small)
        iv_large = cp_mean_predict(model, x_large)
        s_small = max(float(x_small @ model.ols.scale_beta), 1e-6)
        s_large = max(float(x_large @ model.ols.scale_beta), 1e-6)
        ratio = (iv_large.upper - iv_large.lower) / (iv_small.upper - iv_small.lower)
        assert ratio == pytest.approx(s_large / s_small, rel=1e-9)
        # the location-scale DGP has sd proportional to x, so the fitted scale grows
        assert s_large > s_small

    def test_point_interval_at_zero_threshold(self):
        model = BaselineModel("cp_ols", 0.1, 0.0, (10, 10),
                              ols=fit_ols(Dataset(np.array([0.0, 2.0]), np.ones((2, 1)))))
        iv = cp_mean_predict(model, np.array([1.0]))
        assert iv.lower == iv.upper
        assert iv.lower == pytest.approx(1.0, abs=1e-12)


class TestCoverageOfAllFiveMethods:
    def test_monte_carlo_unconditional_coverage(self):
        # Theorem-1-style guarantee applies to every split-conformal score
        from dcp import MethodConfig, fit_method

        n_rep = 120
        t = 120
        methods = ("cqr", "cqr-m", "cqr-r", "cp-ols", "cp-loc")
        hits = {m: 0 for m in methods}
        for rep in range(n_rep):
            train = generate(Dgp("location_scale", seed=rep), t)
            test = generate(Dgp("location_scale", seed=100000 + rep), 2)
            for m in methods:
                cfg = MethodConfig(m, alpha=0.1, tau_points=25, tau_trim=0.01,
                                   trial_points=200)
                fitted = fit_method(cfg, train)
                iv = fitted.predict(test.x[:1])[0]
                hits[m] += iv.contains(float(test.y[0]))
        se = math.sqrt(0.1 * 0.9 / n_rep)
        for m in methods:
            cov = hits[m] / n_rep
            assert cov >= 0.9 - 3 * se, (m, cov)
