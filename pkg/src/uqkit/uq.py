"""Prediction intervals, coverage metrics, calibration, and residual binning.

Three interval constructions share one currency, PredictionInterval:

* quantile triad - LOWER/MID/UPPER boosted models; the interval half-width
  is half the |UPPER - LOWER| span, centered on the MID (MSE) prediction.
* 3split - a base model and a second regressor trained to predict the base
  model's own error, either |residual| (L1) or residual^2 (L2), on a
  45/45/10 partition.
* gp - posterior mean +/- one posterior standard deviation.

Coverage is the in-bounds percentage: how often the observed value falls
inside its interval on data disjoint from all training partitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boosting import GbdtConfig, GbdtModel, feature_importance, fit_gbdt, predict_gbdt
from .data import Dataset, SplitPlan
from .errors import (
    EmptyInput,
    EmptyIntersection,
    LengthMismatch,
    MissingRawBounds,
)
from .forest import ForestConfig, fit_forest, predict_forest
from .gp import GpModel, gp_posterior
from .loss import Objective

L1 = "l1"
L2 = "l2"

SYMMETRIC = "symmetric"
RAW_BOUNDS = "raw_bounds"


@dataclass(frozen=True)
class PredictionInterval:
    """Center +/- half_width in target units, tagged with its method."""

    center: float
    half_width: float
    method: str
    raw_lower: float | None = None
    raw_upper: float | None = None

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("half_width must be >= 0")


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    n_clamped: int = 0


@dataclass
class CalibrationResult:
    scale: float
    coverage_pct: float
    all_zero: bool = False  # set when every half-width is zero (scale is moot)


# ---------------------------------------------------------------- quantile --


def fit_quantile_triad(train: Dataset, alpha_lo: float, alpha_hi: float, configs):
    """Fit LOWER / MID / UPPER models independently on identical data.

    ``configs`` is a (lower, mid, upper) triple of GbdtConfig; objectives are
    overridden to Quantile(alpha_lo), MSE and Quantile(alpha_hi).
    """
    if not (0.0 < alpha_lo < alpha_hi < 1.0):
        raise ValueError(f"need 0 < alpha_lo < alpha_hi < 1, got ({alpha_lo}, {alpha_hi})")
    lo_cfg, mid_cfg, hi_cfg = configs
    from dataclasses import replace

    lower = fit_gbdt(train, replace(lo_cfg, objective=Objective.quantile(alpha_lo)))
    mid = fit_gbdt(train, replace(mid_cfg, objective=Objective.mse()))
    upper = fit_gbdt(train, replace(hi_cfg, objective=Objective.quantile(alpha_hi)))
    return lower, mid, upper


def triad_intervals(models, features):
    """Intervals from a fitted (lower, mid, upper) triad.

    Raw bound crossing (upper < lower) is permitted; the absolute span
    handles it and callers can count crossings from the raw bounds.
    """
    lower, mid, upper = models
    lo = predict_gbdt(lower, features)
    center = predict_gbdt(mid, features)
    hi = predict_gbdt(upper, features)
    return [
        PredictionInterval(
            center=float(c),
            half_width=float(abs(u - l) / 2.0),
            method="quantile",
            raw_lower=float(l),
            raw_upper=float(u),
        )
        for c, l, u in zip(center, lo, hi)
    ]


def quantile_intervals(train: Dataset, test: Dataset, alpha_lo: float, alpha_hi: float, configs):
    models = fit_quantile_triad(train, alpha_lo, alpha_hi, configs)
    return triad_intervals(models, test.features)


# ----------------------------------------------------------------- 3split --


def _fit_engine(train: Dataset, engine):
    if isinstance(engine, GbdtConfig):
        model = fit_gbdt(train, engine)
        return model, lambda X: predict_gbdt(model, X)
    if isinstance(engine, ForestConfig):
        model = fit_forest(train, engine)
        return model, lambda X: predict_forest(model, X)
    raise TypeError(f"engine must be a GbdtConfig or ForestConfig, got {type(engine)}")


def threesplit_intervals(
    data: Dataset,
    plan: SplitPlan,
    kind: str,
    engine,
    return_models: bool = False,
):
    """Base model on partition 1, error model on partition 2, intervals on 3.

    ``kind`` selects the error target: "l1" learns |residual|, "l2" learns
    residual^2 (the half-width then takes the square root to restore target
    units). Negative error predictions are clipped to zero and counted.
    """
    if plan.kind != "threeway":
        raise ValueError("threesplit needs a threeway split plan")
    if kind not in (L1, L2):
        raise ValueError(f"kind must be 'l1' or 'l2', got {kind!r}")
    p1, p2, p3 = (data.subset(p) for p in plan.partitions)

    base_model, base_predict = _fit_engine(p1, engine)
    residuals = p2.targets - base_predict(p2.features)
    error_targets = np.abs(residuals) if kind == L1 else residuals**2
    error_train = Dataset(
        ids=p2.ids,
        feature_names=p2.feature_names,
        features=p2.features,
        targets=error_targets,
        unit=p2.unit,
    )
    error_model, error_predict = _fit_engine(error_train, engine)

    base_preds = base_predict(p3.features)
    raw_err = error_predict(p3.features)
    n_clipped = int(np.sum(raw_err < 0))
    err = np.clip(raw_err, 0.0, None)
    widths = err if kind == L1 else np.sqrt(err)
    intervals = [
        PredictionInterval(center=float(c), half_width=float(w), method=f"threesplit-{kind}")
        for c, w in zip(base_preds, widths)
    ]
    if return_models:
        return base_preds, intervals, (base_model, error_model), n_clipped
    return base_preds, intervals


# --------------------------------------------------------------------- gp --


def gp_intervals(model: GpModel, test: Dataset):
    """One-sigma posterior intervals, matching the 68 % coverage convention."""
    means, stds = gp_posterior(model, test.features)
    return [
        PredictionInterval(center=float(m), half_width=float(s), method="gp")
        for m, s in zip(means, stds)
    ]


# ---------------------------------------------------------------- metrics --


def _interval_arrays(intervals):
    center = np.array([iv.center for iv in intervals])
    half = np.array([iv.half_width for iv in intervals])
    return center, half


def inbounds_percentage(intervals, observed, mode: str = SYMMETRIC) -> float:
    """Percent of observed values inside their intervals (boundary inclusive)."""
    observed = np.asarray(observed, dtype=np.float64)
    if len(intervals) != len(observed):
        raise LengthMismatch(f"{len(intervals)} intervals vs {len(observed)} observations")
    if len(intervals) == 0:
        raise EmptyInput("no intervals to score")
    if mode == SYMMETRIC:
        center, half = _interval_arrays(intervals)
        inside = np.abs(observed - center) <= half
    elif mode == RAW_BOUNDS:
        if any(iv.raw_lower is None or iv.raw_upper is None for iv in intervals):
            raise MissingRawBounds("raw bounds are only available for quantile intervals")
        lo = np.array([min(iv.raw_lower, iv.raw_upper) for iv in intervals])
        hi = np.array([max(iv.raw_lower, iv.raw_upper) for iv in intervals])
        inside = (observed >= lo) & (observed <= hi)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return float(100.0 * np.mean(inside))


def inbounds_flags(intervals, observed) -> np.ndarray:
    observed = np.asarray(observed, dtype=np.float64)
    center, half = _interval_arrays(intervals)
    return np.abs(observed - center) <= half


def calibrate_scale(intervals, observed, target_pct: float = 68.0) -> CalibrationResult:
    """Scale factor s > 0 whose coverage is as close as possible to target.

    Coverage as a function of s is a right-continuous step function with
    breakpoints at |obs - center| / half_width; s = 1 is returned whenever it
    already attains the optimum, otherwise the smallest breakpoint that does.
    """
    observed = np.asarray(observed, dtype=np.float64)
    if len(intervals) != len(observed):
        raise LengthMismatch(f"{len(intervals)} intervals vs {len(observed)} observations")
    center, half = _interval_arrays(intervals)
    n = len(observed)
    dev = np.abs(observed - center)

    def coverage(s: float) -> float:
        return float(100.0 * np.mean(dev <= s * half))

    if np.all(half == 0.0):
        return CalibrationResult(scale=1.0, coverage_pct=coverage(1.0), all_zero=True)

    positive = half > 0
    base_covered = int(np.sum(~positive & (dev == 0.0)))  # covered at any s
    ratios = dev[positive] / half[positive]
    order = np.sort(np.unique(ratios))

    # Candidate coverages: just below the first breakpoint, then at each one.
    candidates = []  # (|coverage - target|, s, coverage)
    cov_floor = 100.0 * base_covered / n
    candidates.append((abs(cov_floor - target_pct), None, cov_floor))
    for r in order:
        cov = 100.0 * (base_covered + int(np.sum(ratios <= r))) / n
        candidates.append((abs(cov - target_pct), float(r), cov))

    best_dist = min(c[0] for c in candidates)
    cov_at_one = coverage(1.0)
    if abs(cov_at_one - target_pct) <= best_dist + 1e-12:
        return CalibrationResult(scale=1.0, coverage_pct=cov_at_one)
    for dist, s, cov in candidates:
        if dist <= best_dist + 1e-12:
            if s is None or s <= 0.0:
                # Optimum sits below every breakpoint; any s under the first
                # positive ratio attains it.
                first = order[order > 0]
                s = float(first[0] / 2.0) if len(first) else 1.0
                if s <= 0.0:
                    s = 1.0
            return CalibrationResult(scale=float(s), coverage_pct=cov)
    raise AssertionError("unreachable")


# ---------------------------------------------------- descriptor selection --


def select_descriptors(models, top_k: int = 50):
    """Features in every model's top-k by gain, ordered by mean gain."""
    if len(models) != 3:
        raise ValueError(f"expected exactly 3 models, got {len(models)}")
    names = models[0].feature_names
    for m in models[1:]:
        if m.feature_names != names:
            raise ValueError("models must share feature_names")
    tops = []
    gains = []
    for m in models:
        ranked = feature_importance(m)
        tops.append({name for name, _ in ranked[:top_k]})
        gains.append(dict(ranked))
    shared = tops[0] & tops[1] & tops[2]
    if not shared:
        raise EmptyIntersection(f"no shared features in the top {top_k}; raise top_k")
    mean_gain = {name: np.mean([g[name] for g in gains]) for name in shared}
    index = {name: i for i, name in enumerate(names)}
    return sorted(shared, key=lambda name: (-mean_gain[name], index[name]))


# ------------------------------------------------------------- histograms --


def residual_histogram(predicted, reference, n_bins: int, value_range=None) -> Histogram:
    """Uniform-bin histogram of (predicted - reference) residuals.

    With an explicit range, out-of-range residuals are clamped into the edge
    bins and counted, so the bin counts always sum to n.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if predicted.shape != reference.shape:
        raise LengthMismatch(f"{predicted.shape} vs {reference.shape}")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if predicted.size == 0:
        raise EmptyInput("no residuals to bin")
    residuals = predicted - reference
    if value_range is None:
        lo, hi = float(residuals.min()), float(residuals.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        n_clamped = 0
        clipped = residuals
    else:
        lo, hi = float(value_range[0]), float(value_range[1])
        if not lo < hi:
            raise ValueError("range must satisfy lo < hi")
        n_clamped = int(np.sum((residuals < lo) | (residuals > hi)))
        clipped = np.clip(residuals, lo, hi)
    counts, edges = np.histogram(clipped, bins=n_bins, range=(lo, hi))
    return Histogram(edges=edges, counts=counts, n_clamped=n_clamped)
