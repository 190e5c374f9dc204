"""Conditional prediction intervals from conditional-distribution models.

The package builds prediction intervals by permuting estimated conditional
ranks (probability integral transforms), which adapt to heteroskedasticity
and skewness where residual-based intervals cannot.  It ships the full and
split rank-based methods, an optimal shape-adjusted variant, five comparator
split-conformal methods, simulation DGPs with analytic oracles, and a
coverage evaluation harness, all behind a FastAPI service and a CLI.
"""

__version__ = "0.1.0"

from .baselines import BaselineModel, cp_mean_fit, cp_mean_predict, cqr_fit, cqr_predict
from .conformal import (ConformityScore, FullDcpResult, SplitModel, estimate_b,
                        estimate_b_batch, full_dcp, p_value, score_baseline,
                        score_optimal, split_dcp_fit, split_dcp_predict)
from .core import (Dataset, IntervalSet, TauGrid, TrialGrid, conformal_quantile,
                   make_trial_grid, split_indices, validate_alpha)
from .errors import (DataFormatError, DcpError, InvalidArgumentError, NumericError,
                     SingularDesignError)
from .evaluate import (BinStat, CoverageReport, CoverageStats, binned_coverage,
                       coverage_dispersion, coverage_metrics, evaluate_predictions,
                       holdout_eval, rolling_ts_eval, rolling_windows)
from .methods import METHOD_NAMES, FittedMethod, MethodConfig, fit_method
from .regress import (CdfModel, DrCdfModel, DrFit, EstimatorConfig, GaussianCdfModel,
                      OlsFit, QrCdfModel, QrFit, default_dr_thresholds, dr_cdf,
                      fit_dr, fit_ols, fit_qr, fit_qr_process, invert_cdf,
                      invert_cdf_upper, pinball_loss, qr_cdf, qr_subgradient_check,
                      rearrange)
from .rng import DeterministicRng, normal_cdf, normal_quantile
from .sim import (DGP_KINDS, Dgp, generate, oracle_dcp_interval,
                  oracle_mean_conditional_coverage, oracle_mean_halfwidth,
                  oracle_mean_interval, realized_volatility)

__all__ = [name for name in dir() if not name.startswith("_")]
