"""Bound-constrained quasi-Newton minimization (L-BFGS-B via scipy)."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from .errors import NonFiniteObjective

# Penalty for non-finite objective regions. Kept moderate: values much larger
# than this defeat the relative-reduction stopping test inside L-BFGS-B.
_BIG = 1e10


def lbfgsb_minimize(objective, x0, bounds, max_iter: int = 500, pg_tol: float = 1e-5):
    """Minimize ``objective(x) -> (value, gradient)`` within box bounds.

    Non-finite objective values encountered during the search are replaced by
    a large finite penalty so the line search backtracks; a non-finite value
    at the starting point (or at the returned optimum) raises
    NonFiniteObjective.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    f0, _ = objective(x0)
    if not np.isfinite(f0):
        raise NonFiniteObjective(f"objective is non-finite at the starting point (f={f0})")

    def wrapped(x):
        value, grad = objective(x)
        grad = np.asarray(grad, dtype=np.float64)
        if not np.isfinite(value) or not np.isfinite(grad).all():
            return _BIG, np.zeros_like(x)
        return float(value), grad

    res = minimize(
        wrapped,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=list(bounds),
        options={"maxiter": max_iter, "gtol": pg_tol, "ftol": 1e-14},
    )
    x_opt = np.clip(res.x, [b[0] for b in bounds], [b[1] for b in bounds])
    f_opt = float(res.fun)
    if f_opt >= _BIG or not np.isfinite(f_opt):
        raise NonFiniteObjective("optimizer could not leave the non-finite region")
    if f_opt > f0:
        return x0, float(f0)
    return x_opt, f_opt
