"""Gaussian-process regression with marginal-likelihood kernel fitting.

Targets are standardized (zero mean, unit variance) before fitting and the
prior mean is fixed at zero in that space; features are z-scored per column
so ARD length scales are comparable across descriptors. Hyperparameters are
optimized in log-space with L-BFGS-B, best-of-restarts on the log marginal
likelihood. Posterior standard deviations describe the latent function
(the white-noise term is excluded from query self-covariances).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .data import Dataset
from .errors import CholeskyFailure, DimensionMismatch, NonFiniteObjective, TooManyFeatures
from .kernels import KernelExpr, default_kernel
from .optimize import lbfgsb_minimize

MAX_GP_FEATURES = 64

_JITTER_START = 1e-10
_JITTER_STOP = 1e-4


def _chol_with_jitter(K: np.ndarray):
    """Lower Cholesky factor of K + jitter*I, escalating jitter x10 as needed."""
    scale = max(np.trace(K) / len(K), np.finfo(float).tiny)
    jitter = _JITTER_START * scale
    while jitter <= _JITTER_STOP * scale:
        try:
            L = cholesky(K + jitter * np.eye(len(K)), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            pass
        except ValueError:
            break
        jitter *= 10.0
    raise CholeskyFailure(
        f"Gram matrix not positive definite up to jitter {_JITTER_STOP * scale:.3g}"
    )


def log_marginal_likelihood(kernel: KernelExpr, X, y):
    """Value and gradient (optimizer space) of the log marginal likelihood.

    value = -1/2 y^T K^-1 y - 1/2 log|K| - n/2 log(2 pi), with the gradient
    from the trace identity 1/2 tr((aa^T - K^-1) dK), multiplied by the
    parameter value for log-scale parameters.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    n = len(y)
    K = kernel.gram_train(X)
    L, _ = _chol_with_jitter(K)
    alpha = cho_solve((L, True), y)
    value = float(
        -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * np.log(2.0 * np.pi)
    )
    Kinv = cho_solve((L, True), np.eye(n))
    inner = np.outer(alpha, alpha) - Kinv
    grad = np.array([0.5 * np.sum(inner * dK) for dK in kernel.grads_train(X)])
    return value, grad


@dataclass
class GpModel:
    kernel: KernelExpr
    X_train: np.ndarray  # standardized features
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_std: float
    chol: np.ndarray
    alpha_vec: np.ndarray
    jitter: float
    log_likelihood: float
    feature_names: tuple = ()
    n_variance_clips: int = 0

    def posterior(self, queries):
        return gp_posterior(self, queries)


def _standardize_features(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale < 1e-12, 1.0, scale)
    return (X - mean) / scale, mean, scale


def fit_gp(
    train: Dataset,
    kernel_template: KernelExpr | None = None,
    restarts: int = 5,
    seed: int = 0,
    max_iter: int = 200,
    optimize: bool = True,
) -> GpModel:
    """Best-of-restarts marginal-likelihood fit of the kernel parameters.

    The first start uses the template's own parameter values; the remaining
    starts draw log-uniformly within each parameter's bounds. With
    ``optimize=False`` the template parameters are kept as-is and only the
    Cholesky state is computed (useful for fixed, hand-chosen kernels).
    """
    X, y = train.features, train.targets
    n, d = X.shape
    if d > MAX_GP_FEATURES:
        raise TooManyFeatures(f"{d} features; GP path is limited to {MAX_GP_FEATURES}")
    if kernel_template is None:
        kernel_template = default_kernel(d)

    Xs, x_mean, x_scale = _standardize_features(X)
    y_mean = float(y.mean())
    y_std = float(y.std())
    if y_std < 1e-12:
        y_std = 1.0  # degenerate constant-target case
    ys = (y - y_mean) / y_std

    kernel = kernel_template.clone()
    bounds = kernel.theta_bounds()
    rng = np.random.default_rng(seed)

    def objective(theta):
        kernel.set_theta(theta)
        try:
            value, grad = log_marginal_likelihood(kernel, Xs, ys)
        except CholeskyFailure:
            return np.inf, np.zeros_like(theta)
        return -value, -grad

    starts = [np.clip(kernel.get_theta(), [b[0] for b in bounds], [b[1] for b in bounds])]
    for _ in range(max(0, restarts - 1)):
        starts.append(np.array([rng.uniform(lo, hi) for lo, hi in bounds]))

    if optimize and bounds:
        best_theta, best_obj = None, np.inf
        for theta0 in starts:
            try:
                theta_opt, obj = lbfgsb_minimize(objective, theta0, bounds, max_iter=max_iter)
            except NonFiniteObjective:
                continue
            if obj < best_obj:
                best_theta, best_obj = theta_opt, obj
        if best_theta is None:
            raise CholeskyFailure("all optimizer restarts failed on this kernel")
    else:
        best_theta = starts[0]
        best_obj, _ = objective(best_theta)
        if not np.isfinite(best_obj):
            raise CholeskyFailure("kernel is not positive definite on this data")

    kernel.set_theta(best_theta)
    K = kernel.gram_train(Xs)
    L, jitter = _chol_with_jitter(K)
    alpha = cho_solve((L, True), ys)
    return GpModel(
        kernel=kernel,
        X_train=Xs,
        x_mean=x_mean,
        x_scale=x_scale,
        y_mean=y_mean,
        y_std=y_std,
        chol=L,
        alpha_vec=alpha,
        jitter=jitter,
        log_likelihood=float(-best_obj),
        feature_names=train.feature_names,
    )


def gp_posterior(model: GpModel, queries):
    """Posterior mean and std per query row, in original target units."""
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if Q.shape[1] != len(model.x_mean):
        raise DimensionMismatch(
            f"expected {len(model.x_mean)}-dim queries, got {Q.shape[1]}"
        )
    Qs = (Q - model.x_mean) / model.x_scale
    Ks = model.kernel.gram_cross(Qs, model.X_train)
    mean_s = Ks @ model.alpha_vec
    V = solve_triangular(model.chol, Ks.T, lower=True)
    var = model.kernel.signal_variance() - np.einsum("ij,ij->j", V, V)
    clipped = var < 0
    if clipped.any():
        model.n_variance_clips += int(clipped.sum())
        var = np.clip(var, 0.0, None)
    means = model.y_mean + model.y_std * mean_s
    stds = model.y_std * np.sqrt(var)
    return means, stds
