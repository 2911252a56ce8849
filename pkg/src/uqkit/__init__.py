"""uqkit: per-prediction uncertainty for tabular regression.

Builds prediction intervals three ways (quantile-loss boosted trees, direct
machine-learned error models, and Gaussian-process posteriors), measures
their in-bounds coverage, and calibrates interval widths to a target
coverage.
"""

from .boosting import GbdtConfig, GbdtModel, feature_importance, fit_gbdt, predict_gbdt
from .data import Dataset, SplitPlan, load_dataset, make_split
from .forest import ForestConfig, ForestModel, fit_forest, predict_forest
from .gp import GpModel, fit_gp, gp_posterior, log_marginal_likelihood
from .kernels import KernelExpr, Param, default_kernel, kernel_eval
from .loss import Objective, loss_grad_hess, loss_value
from .optimize import lbfgsb_minimize
from .uq import (
    CalibrationResult,
    Histogram,
    PredictionInterval,
    calibrate_scale,
    gp_intervals,
    inbounds_percentage,
    quantile_intervals,
    residual_histogram,
    select_descriptors,
    threesplit_intervals,
)

__version__ = "0.1.0"
