"""Composite covariance functions for the GP module.

The kernel is a sum of four optional building blocks,

    c1 * RBF_ARD(lam_1..lam_N) + c2 * RQ(mixture, lengthscale)
    + c3 * RBF(decay) * ExpSineSquared(sine_scale, period)
    + c4 * WhiteNoise(noise),

each with positive parameters carrying box bounds and optimized in
log-space. The RBF uses the squared Euclidean distance, exp(-d^2 / (2*l^2)),
with one ARD length scale per input dimension. The white-noise term
contributes only on the diagonal of the training Gram matrix (and to
``kernel_eval`` of two identical points); posterior variances describe the
latent function, so noise is excluded from query self-covariances.

The amplitude of the white-noise term (c4) is fixed by default: only the
noise level itself is a fitting parameter, which keeps the two from being
perfectly correlated during optimization.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch

DEFAULT_LOWER = 1e-5
DEFAULT_UPPER = 1e5


@dataclass
class Param:
    """One positive kernel parameter with bounds and a log-scale flag."""

    value: float
    lower: float = DEFAULT_LOWER
    upper: float = DEFAULT_UPPER
    log: bool = True
    free: bool = True

    def clipped(self) -> float:
        return float(min(max(self.value, self.lower), self.upper))

    def to_dict(self):
        return {
            "value": self.value,
            "lower": self.lower,
            "upper": self.upper,
            "log": self.log,
            "free": self.free,
        }

    @staticmethod
    def from_config(cfg, default_free=True) -> "Param":
        if isinstance(cfg, dict):
            return Param(
                value=float(cfg["value"]),
                lower=float(cfg.get("lower", DEFAULT_LOWER)),
                upper=float(cfg.get("upper", DEFAULT_UPPER)),
                log=bool(cfg.get("log", True)),
                free=bool(cfg.get("free", default_free)),
            )
        return Param(value=float(cfg), free=default_free)


def _sqdist(X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    diff = X1[:, None, :] - X2[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


class KernelTerm:
    kind = "abstract"

    def param_items(self):
        raise NotImplementedError

    def free_items(self):
        return [(name, p) for name, p in self.param_items() if p.free]

    def gram(self, X1, X2, symmetric=False) -> np.ndarray:
        raise NotImplementedError

    def grads(self, X) -> list:
        """d(gram)/d(param) for each free parameter, on the training Gram."""
        raise NotImplementedError

    def self_variance(self) -> float:
        """Contribution to the latent-function prior variance k(x, x)."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class RbfArd(KernelTerm):
    """Anisotropic squared-exponential with one length scale per dimension."""

    kind = "rbf_ard"

    def __init__(self, c: Param, lengthscales: list):
        self.c = c
        self.lengthscales = list(lengthscales)

    def param_items(self):
        items = [("c", self.c)]
        items += [(f"lambda[{i}]", p) for i, p in enumerate(self.lengthscales)]
        return items

    def _base(self, X1, X2):
        lam = np.array([p.value for p in self.lengthscales])
        return np.exp(-0.5 * _sqdist(X1 / lam, X2 / lam))

    def gram(self, X1, X2, symmetric=False):
        return self.c.value * self._base(X1, X2)

    def grads(self, X):
        B = self._base(X, X)
        K = self.c.value * B
        out = []
        if self.c.free:
            out.append(B)
        for i, p in enumerate(self.lengthscales):
            if not p.free:
                continue
            Di = (X[:, None, i] - X[None, :, i]) ** 2
            out.append(K * Di / p.value**3)
        return out

    def self_variance(self):
        return self.c.value

    def to_dict(self):
        return {
            "kind": self.kind,
            "c": self.c.to_dict(),
            "lambda": [p.to_dict() for p in self.lengthscales],
        }


class RationalQuadratic(KernelTerm):
    """Scale mixture of RBFs: c * (1 + d^2 / (2*mixture*l^2))^(-mixture)."""

    kind = "rq"

    def __init__(self, c: Param, mixture: Param, lengthscale: Param):
        self.c = c
        self.mixture = mixture
        self.lengthscale = lengthscale

    def param_items(self):
        return [("c", self.c), ("mixture", self.mixture), ("lengthscale", self.lengthscale)]

    def _parts(self, X1, X2):
        a, l = self.mixture.value, self.lengthscale.value
        Q = _sqdist(X1, X2) / (2.0 * a * l * l)
        return Q, (1.0 + Q) ** (-a)

    def gram(self, X1, X2, symmetric=False):
        _, B = self._parts(X1, X2)
        return self.c.value * B

    def grads(self, X):
        a, l = self.mixture.value, self.lengthscale.value
        Q, B = self._parts(X, X)
        K = self.c.value * B
        out = []
        if self.c.free:
            out.append(B)
        if self.mixture.free:
            out.append(K * (-np.log1p(Q) + Q / (1.0 + Q)))
        if self.lengthscale.free:
            out.append(K * (2.0 * a * Q) / (l * (1.0 + Q)))
        return out

    def self_variance(self):
        return self.c.value

    def to_dict(self):
        return {
            "kind": self.kind,
            "c": self.c.to_dict(),
            "mixture": self.mixture.to_dict(),
            "lengthscale": self.lengthscale.to_dict(),
        }


class PeriodicRbf(KernelTerm):
    """Locally periodic term: an RBF decay envelope times ExpSineSquared."""

    kind = "periodic_rbf"

    def __init__(self, c: Param, decay: Param, sine_scale: Param, period: Param):
        self.c = c
        self.decay = decay
        self.sine_scale = sine_scale
        self.period = period

    def param_items(self):
        return [
            ("c", self.c),
            ("decay", self.decay),
            ("sine_scale", self.sine_scale),
            ("period", self.period),
        ]

    def _parts(self, X1, X2):
        D = _sqdist(X1, X2)
        d = np.sqrt(D)
        S = np.sin(np.pi * d / self.period.value)
        env = np.exp(-D / (2.0 * self.decay.value**2))
        per = np.exp(-2.0 * S * S / self.sine_scale.value**2)
        return D, d, S, env * per

    def gram(self, X1, X2, symmetric=False):
        _, _, _, B = self._parts(X1, X2)
        return self.c.value * B

    def grads(self, X):
        l1, l2, p = self.decay.value, self.sine_scale.value, self.period.value
        D, d, S, B = self._parts(X, X)
        K = self.c.value * B
        out = []
        if self.c.free:
            out.append(B)
        if self.decay.free:
            out.append(K * D / l1**3)
        if self.sine_scale.free:
            out.append(K * 4.0 * S * S / l2**3)
        if self.period.free:
            out.append(K * (2.0 * np.pi * d * np.sin(2.0 * np.pi * d / p)) / (l2 * l2 * p * p))
        return out

    def self_variance(self):
        return self.c.value

    def to_dict(self):
        return {
            "kind": self.kind,
            "c": self.c.to_dict(),
            "decay": self.decay.to_dict(),
            "sine_scale": self.sine_scale.to_dict(),
            "period": self.period.to_dict(),
        }


class WhiteNoise(KernelTerm):
    """Diagonal noise: c * noise on the training Gram diagonal only."""

    kind = "white_noise"

    def __init__(self, noise: Param, c: Param | None = None):
        self.c = c if c is not None else Param(1.0, free=False)
        self.noise = noise

    def param_items(self):
        return [("c", self.c), ("noise", self.noise)]

    def level(self) -> float:
        return self.c.value * self.noise.value

    def gram(self, X1, X2, symmetric=False):
        if symmetric:
            return self.level() * np.eye(len(X1))
        return np.zeros((len(X1), len(X2)))

    def grads(self, X):
        out = []
        if self.c.free:
            out.append(self.noise.value * np.eye(len(X)))
        if self.noise.free:
            out.append(self.c.value * np.eye(len(X)))
        return out

    def self_variance(self):
        return 0.0

    def to_dict(self):
        return {"kind": self.kind, "c": self.c.to_dict(), "noise": self.noise.to_dict()}


_TERM_KINDS = {t.kind: t for t in (RbfArd, RationalQuadratic, PeriodicRbf, WhiteNoise)}


class KernelExpr:
    """Sum of kernel terms over a fixed input dimension."""

    def __init__(self, terms, ndim: int):
        self.terms = list(terms)
        self.ndim = int(ndim)
        for term in self.terms:
            if isinstance(term, RbfArd) and len(term.lengthscales) != self.ndim:
                raise DimensionMismatch(
                    f"ARD term has {len(term.lengthscales)} length scales for ndim={self.ndim}"
                )

    # -- parameter vector interface (optimizer space) --

    def free_params(self):
        out = []
        for ti, term in enumerate(self.terms):
            for name, p in term.free_items():
                out.append((ti, name, p))
        return out

    def get_theta(self) -> np.ndarray:
        return np.array(
            [np.log(p.clipped()) if p.log else p.clipped() for _, _, p in self.free_params()]
        )

    def set_theta(self, theta) -> None:
        for (_, _, p), v in zip(self.free_params(), theta):
            p.value = float(np.exp(v)) if p.log else float(v)

    def theta_bounds(self):
        out = []
        for _, _, p in self.free_params():
            if p.log:
                out.append((np.log(p.lower), np.log(p.upper)))
            else:
                out.append((p.lower, p.upper))
        return out

    # -- covariance evaluation --

    def _check(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.ndim:
            raise DimensionMismatch(f"expected {self.ndim}-dim inputs, got {X.shape[1]}")
        return X

    def gram_train(self, X) -> np.ndarray:
        X = self._check(X)
        K = np.zeros((len(X), len(X)))
        for term in self.terms:
            K += term.gram(X, X, symmetric=True)
        return K

    def gram_cross(self, Q, X) -> np.ndarray:
        Q, X = self._check(Q), self._check(X)
        K = np.zeros((len(Q), len(X)))
        for term in self.terms:
            K += term.gram(Q, X, symmetric=False)
        return K

    def signal_variance(self) -> float:
        return float(sum(term.self_variance() for term in self.terms))

    def noise_level(self) -> float:
        return float(
            sum(term.level() for term in self.terms if isinstance(term, WhiteNoise))
        )

    def grads_train(self, X):
        """d(Gram)/d(theta_j) in optimizer space, aligned with free_params()."""
        X = self._check(X)
        mats = []
        for term in self.terms:
            mats.extend(term.grads(X))
        out = []
        for (_, _, p), dK in zip(self.free_params(), mats):
            out.append(dK * p.value if p.log else dK)
        return out

    def clone(self) -> "KernelExpr":
        return copy.deepcopy(self)

    def to_dict(self) -> dict:
        return {"terms": [t.to_dict() for t in self.terms]}

    @staticmethod
    def from_dict(doc: dict, ndim: int) -> "KernelExpr":
        terms = []
        for cfg in doc["terms"]:
            kind = cfg["kind"]
            if kind == "rbf_ard":
                lam_cfg = cfg.get("lambda", 1.0)
                if isinstance(lam_cfg, (int, float, dict)):
                    lam = [Param.from_config(lam_cfg) for _ in range(ndim)]
                else:
                    lam = [Param.from_config(s) for s in lam_cfg]
                terms.append(RbfArd(Param.from_config(cfg.get("c", 1.0)), lam))
            elif kind == "rq":
                terms.append(
                    RationalQuadratic(
                        Param.from_config(cfg.get("c", 1.0)),
                        Param.from_config(cfg.get("mixture", 1.0)),
                        Param.from_config(cfg.get("lengthscale", 1.0)),
                    )
                )
            elif kind == "periodic_rbf":
                terms.append(
                    PeriodicRbf(
                        Param.from_config(cfg.get("c", 1.0)),
                        Param.from_config(cfg.get("decay", 1.0)),
                        Param.from_config(cfg.get("sine_scale", 1.0)),
                        Param.from_config(cfg.get("period", 1.0)),
                    )
                )
            elif kind == "white_noise":
                terms.append(
                    WhiteNoise(
                        Param.from_config(cfg.get("noise", 0.1)),
                        Param.from_config(cfg.get("c", 1.0), default_free=False),
                    )
                )
            else:
                raise ValueError(f"unknown kernel term kind {kind!r}")
        return KernelExpr(terms, ndim)


def kernel_eval(kernel: KernelExpr, x, x2) -> float:
    """Prior covariance of two points; identical points get the noise term."""
    x = np.asarray(x, dtype=np.float64).ravel()
    x2 = np.asarray(x2, dtype=np.float64).ravel()
    if len(x) != kernel.ndim or len(x2) != kernel.ndim:
        raise DimensionMismatch(f"expected {kernel.ndim}-dim vectors")
    value = float(kernel.gram_cross(x[None, :], x2[None, :])[0, 0])
    if np.array_equal(x, x2):
        value += kernel.noise_level()
    return value


def default_kernel(ndim: int, noise: float = 0.1) -> KernelExpr:
    """ARD RBF plus white noise; the conventional starting composition."""
    return KernelExpr(
        [
            RbfArd(Param(1.0), [Param(1.0) for _ in range(ndim)]),
            WhiteNoise(Param(noise)),
        ],
        ndim,
    )
