"""Regression loss objectives with the statistics boosting needs.

The quantile loss is asymmetric: a positive residual r = observed - predicted
costs alpha*|r|, a negative one costs (1-alpha)*|r|, so minimizing it drives
predictions toward the alpha-quantile of the conditional target distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, LengthMismatch

MSE = "mse"
MAE = "mae"
QUANTILE = "quantile"


@dataclass(frozen=True)
class Objective:
    kind: str
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in (MSE, MAE, QUANTILE):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.kind == QUANTILE:
            if self.alpha is None or not (0.0 < self.alpha < 1.0):
                raise ValueError(f"quantile objective needs 0 < alpha < 1, got {self.alpha}")
        elif self.alpha is not None:
            raise ValueError(f"{self.kind} objective takes no alpha")

    @staticmethod
    def mse() -> "Objective":
        return Objective(MSE)

    @staticmethod
    def mae() -> "Objective":
        return Objective(MAE)

    @staticmethod
    def quantile(alpha: float) -> "Objective":
        return Objective(QUANTILE, alpha)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha}

    @staticmethod
    def from_dict(doc: dict) -> "Objective":
        return Objective(doc["kind"], doc.get("alpha"))


def _check(observed, predicted):
    observed = np.asarray(observed, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if observed.shape != predicted.shape:
        raise LengthMismatch(f"observed {observed.shape} vs predicted {predicted.shape}")
    if observed.size == 0:
        raise EmptyInput("empty loss input")
    return observed, predicted


def loss_value(obj: Objective, observed, predicted) -> float:
    """Mean per-sample loss. Nonnegative, zero exactly at a perfect fit."""
    observed, predicted = _check(observed, predicted)
    r = observed - predicted
    if obj.kind == MSE:
        return float(np.mean(r * r))
    if obj.kind == MAE:
        return float(np.mean(np.abs(r)))
    a = obj.alpha
    return float(np.mean(np.where(r >= 0, a * np.abs(r), (1.0 - a) * np.abs(r))))


def loss_grad_hess(obj: Objective, observed, predicted):
    """Per-sample gradient wrt the prediction, plus a positive hessian surrogate.

    Conventions (as consumed by the boosting module): MSE gradient is the
    per-sample (pred - obs), i.e. the 2/N factors are folded away; quantile
    and MAE gradients are the exact a.e. derivatives with gradient 0 at the
    kink; the hessian surrogate is 1 everywhere.
    """
    observed, predicted = _check(observed, predicted)
    r = observed - predicted
    hess = np.ones_like(r)
    if obj.kind == MSE:
        return predicted - observed, hess
    if obj.kind == MAE:
        return np.sign(predicted - observed), hess
    a = obj.alpha
    grad = np.where(r > 0, -a, np.where(r < 0, 1.0 - a, 0.0))
    return grad, hess
