"""Reference predictors: mean, linear ridge/lasso, fixed-scale random
features, and exact kernel ridge (small-n oracle only).

All training weights follow the per-sample loss convention
(1/n)||y - f(X)||^2 + lam * penalty, so one lambda grid is comparable
across every method; the normal-equation systems scale lam by n
internally.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .features import Kernel, KernelFamily, RandomFeatureBasis, ScaleVector, feature_map
from .optim import FistaOptions, _chol_solve_refined, solve_lasso, solve_ridge

MAX_EXACT_KERNEL_ROWS = 5000


class BaselineKind(enum.Enum):
    MEAN = "mean"
    LINEAR_RIDGE = "linear_ridge"
    LINEAR_LASSO = "linear_lasso"
    RFF = "rff"
    EXACT_KERNEL_RIDGE = "exact_kernel_ridge"


def kernel_gram(X, X2, family: KernelFamily) -> np.ndarray:
    """Kernel matrix between two point sets; unit diagonal when X is X2."""
    X = np.asarray(X, dtype=float)
    X2 = np.asarray(X2, dtype=float)
    if X.ndim != 2 or X2.ndim != 2 or X.shape[1] != X2.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape} vs {X2.shape}")
    sigma = family.bandwidth
    if family.kind is Kernel.GAUSSIAN:
        return np.exp(cdist(X, X2, "sqeuclidean") / (-2.0 * sigma * sigma))
    return np.exp(cdist(X, X2, "cityblock") / -sigma)


@dataclass
class MeanPredictor:
    value: float

    def predict(self, X) -> np.ndarray:
        return np.full(np.asarray(X).shape[0], self.value)


@dataclass
class LinearPredictor:
    weights: np.ndarray
    intercept: float

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights + self.intercept


@dataclass
class RffPredictor:
    basis: RandomFeatureBasis
    gamma: np.ndarray
    coef: np.ndarray

    def predict(self, X) -> np.ndarray:
        return feature_map(self.basis, self.gamma, X) @ self.coef


@dataclass
class KernelRidgeModel:
    """Exact kernel ridge: coefficients solve (K + n lam I) c = y."""

    X_train: np.ndarray
    coef: np.ndarray
    family: KernelFamily

    def predict(self, X) -> np.ndarray:
        return kernel_gram(X, self.X_train, self.family) @ self.coef


def fixed_scales(d: int, family: KernelFamily) -> np.ndarray:
    """The non-learned scale vector: 1/bandwidth in every dimension."""
    return np.full(d, 1.0 / family.bandwidth)


def train_baseline(
    kind: BaselineKind,
    X,
    y,
    lam: float = 0.0,
    *,
    basis: RandomFeatureBasis | None = None,
    family: KernelFamily | None = None,
    lasso_opts: FistaOptions | None = None,
):
    """Fit one baseline and return a predictor with predict(X) -> vector.

    The linear models carry an unpenalized intercept (fit on centered
    data), so they fall back to the mean predictor as lam grows.  The
    random-feature baseline needs a pre-sampled basis and a kernel family
    and uses the fixed scales 1/bandwidth.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    n = X.shape[0]

    if kind is BaselineKind.MEAN:
        return MeanPredictor(float(np.mean(y)))

    if kind in (BaselineKind.LINEAR_RIDGE, BaselineKind.LINEAR_LASSO):
        x_mean = X.mean(axis=0)
        y_mean = float(y.mean())
        Xc = X - x_mean
        yc = y - y_mean
        if kind is BaselineKind.LINEAR_RIDGE:
            w = solve_ridge(Xc, yc, n * lam)
        else:
            w = solve_lasso(Xc, yc, lam, opts=lasso_opts)
        return LinearPredictor(weights=w, intercept=y_mean - float(x_mean @ w))

    if kind is BaselineKind.RFF:
        if basis is None or family is None:
            raise ValueError("the random-feature baseline needs basis= and family=")
        gamma = fixed_scales(X.shape[1], family)
        Z = feature_map(basis, gamma, X)
        # The sqrt(2)*cos features carry no 1/sqrt(D), so the squared
        # function norm is D times the squared coefficient norm; n*D*lam is
        # the raw weight matching exact kernel ridge at the same lam.
        coef = solve_ridge(Z, y, n * basis.n_features * lam)
        return RffPredictor(basis=basis, gamma=gamma, coef=coef)

    if kind is BaselineKind.EXACT_KERNEL_RIDGE:
        if family is None:
            raise ValueError("exact kernel ridge needs family=")
        if n > MAX_EXACT_KERNEL_ROWS:
            raise ValueError(
                f"exact kernel ridge is a small-n oracle, capped at "
                f"{MAX_EXACT_KERNEL_ROWS} rows (got {n})"
            )
        K = kernel_gram(X, X, family)
        K[np.diag_indices_from(K)] += n * lam
        coef = _chol_solve_refined(K, y, f"kernel ridge (lam={lam:g})")
        return KernelRidgeModel(X_train=X, coef=coef, family=family)

    raise ValueError(f"unknown baseline kind: {kind!r}")
