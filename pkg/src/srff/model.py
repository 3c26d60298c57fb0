"""Joint training of feature coefficients and per-dimension scales.

The trainer alternates an exact ridge solve for the coefficients with
projected gradient descent on the scale vector over a fixed simplex.  The
simplex constraint is what drives scales of irrelevant inputs to zero; a
zero scale makes predictions exactly independent of that input column.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .features import (
    SQRT2,
    Kernel,
    KernelFamily,
    RandomFeatureBasis,
    ScaleVector,
    _gamma_values,
    feature_map,
    median_heuristic_sigma,
    sample_basis,
)
from .optim import (
    FistaOptions,
    NonfiniteObjectiveError,
    fista_backtracking,
    project_simplex,
    solve_ridge,
)

_TINY = 1e-30

MODEL_FORMAT = "srff-model-v1"


@dataclass(frozen=True)
class SrffConfig:
    """Training hyper-parameters.

    ridge_weight is the raw penalty in ||y - Z a||^2 + ridge_weight ||a||^2
    (multiply a per-sample-loss weight by n to convert).  simplex_size
    "auto" resolves to d / sigma with sigma from the median heuristic, so
    the flat initial scales equal 1/sigma.  step2_dtype selects the
    arithmetic of the scale-descent inner loop only; the ridge solves and
    all reported objectives stay float64.
    """

    ridge_weight: float = 1e-3
    n_features: int = 300
    simplex_size: float | str = "auto"
    outer_max: int = 50
    outer_rel_tol: float = 1e-4
    fista: FistaOptions = field(default_factory=FistaOptions)
    seed: int = 0
    kernel: Kernel = Kernel.GAUSSIAN
    learn_scales: bool = True
    step2_dtype: str = "float64"

    def __post_init__(self):
        if self.ridge_weight < 0:
            raise ValueError("ridge_weight must be nonnegative")
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")
        if self.outer_max < 1:
            raise ValueError("outer_max must be >= 1")
        if not self.outer_rel_tol > 0:
            raise ValueError("outer_rel_tol must be positive")
        if self.simplex_size != "auto" and not float(self.simplex_size) > 0:
            raise ValueError("simplex_size must be positive or 'auto'")
        if self.step2_dtype not in ("float64", "float32"):
            raise ValueError("step2_dtype must be 'float64' or 'float32'")


@dataclass
class SrffModel:
    """A trained model: frozen basis, learned scales and coefficients.

    Prediction needs nothing else; training data is not retained.  The
    objective trace holds the joint objective after every coefficient
    refit and never increases.
    """

    basis: RandomFeatureBasis
    gamma: ScaleVector
    coef: np.ndarray
    objective_trace: list
    config: SrffConfig
    step2_iterations: list = field(default_factory=list)

    @property
    def n_dims(self) -> int:
        return self.basis.n_dims


def srff_objective(gamma, coef, basis, X, y, ridge_weight: float) -> float:
    """Joint objective: squared residual norm plus the ridge penalty."""
    coef = np.asarray(coef, dtype=float)
    y = np.asarray(y, dtype=float)
    Z = feature_map(basis, gamma, X)
    if y.shape != (Z.shape[0],) or coef.shape != (Z.shape[1],):
        raise ValueError(
            f"shape mismatch: Z {Z.shape}, y {y.shape}, coef {coef.shape}"
        )
    r = y - Z @ coef
    return float(r @ r + ridge_weight * (coef @ coef))


def srff_gamma_gradient(gamma, coef, basis, X, y) -> np.ndarray:
    """Gradient of the squared-residual term with respect to the scales.

    Component s is -(y - Z a)' (dZ/dgamma_s) a.  All d components come out
    of one fused pass (residual, sine matrix, two small matmuls) with
    O(n * n_features) extra memory instead of d derivative matrices.
    """
    g = _gamma_values(gamma)
    coef = np.asarray(coef, dtype=float)
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != basis.n_dims or g.shape[0] != basis.n_dims:
        raise ValueError("dimension mismatch between X, gamma and basis")
    if y.shape != (X.shape[0],) or coef.shape != (basis.n_features,):
        raise ValueError("shape mismatch between y, coef and basis")
    theta = (X * g) @ basis.epsilon.T
    theta += basis.phases
    Z = np.cos(theta)
    Z *= SQRT2  # same association as feature_map, so a perfect fit cancels exactly
    residual = y - Z @ coef
    np.sin(theta, out=theta)
    theta *= coef
    V = theta @ basis.epsilon
    return (2.0 * SQRT2) * ((X * V).T @ residual)


def predict(model: SrffModel, X) -> np.ndarray:
    """Evaluate the model: feature map at the learned scales times coef."""
    Z = feature_map(model.basis, model.gamma, X)
    return Z @ model.coef


def _scale_closures(basis, coef, X, y, dtype):
    """Value / value-and-gradient closures for the scale subproblem.

    Heavy n-by-D work runs in the requested dtype; scalars and the gradient
    are returned as float64 so the optimizer state stays full precision.
    """
    dt = np.dtype(dtype)
    Xw = np.ascontiguousarray(X, dtype=dt)
    eps_t = np.ascontiguousarray(basis.epsilon.T, dtype=dt)
    eps = np.ascontiguousarray(basis.epsilon, dtype=dt)
    phases = basis.phases.astype(dt)
    a = np.ascontiguousarray(coef, dtype=dt)
    yv = np.ascontiguousarray(y, dtype=dt)

    def smooth_value(g):
        theta = (Xw * g.astype(dt)) @ eps_t
        theta += phases
        np.cos(theta, out=theta)
        r = (yv - dt.type(SQRT2) * (theta @ a)).astype(np.float64)
        return float(r @ r)

    def smooth_value_grad(g):
        theta = (Xw * g.astype(dt)) @ eps_t
        theta += phases
        cos_t = np.cos(theta)
        r = yv - dt.type(SQRT2) * (cos_t @ a)
        r64 = r.astype(np.float64)
        np.sin(theta, out=theta)
        theta *= a
        V = theta @ eps
        grad = (2.0 * SQRT2) * ((Xw * V).T @ r).astype(np.float64)
        return float(r64 @ r64), grad

    return smooth_value, smooth_value_grad


def train_srff(X, y, config: SrffConfig) -> SrffModel:
    """Alternating descent: exact ridge refit, then projected scale descent.

    Scales start flat on the simplex; the spectral draws and phases are
    sampled once from config.seed and frozen.  Training stops when the
    relative drop of the joint objective falls below outer_rel_tol or
    after outer_max alternations, always ending on a coefficient refit so
    the coefficients match the final scales.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"X must be a nonempty 2-d array, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(X)):
        raise ValueError("X and y must be finite")
    d = X.shape[1]
    if config.simplex_size == "auto":
        s = d / median_heuristic_sigma(X)
    else:
        s = float(config.simplex_size)
    family = KernelFamily(config.kernel, bandwidth=d / s)
    basis = sample_basis(d, config.n_features, family, config.seed)
    lam = config.ridge_weight
    gamma = np.full(d, s / d)

    def refit(g):
        Z = feature_map(basis, g, X)
        coef = solve_ridge(Z, y, lam)
        r = y - Z @ coef
        return coef, float(r @ r + lam * (coef @ coef))

    coef, J = refit(gamma)
    if not np.isfinite(J):
        raise NonfiniteObjectiveError(f"initial objective is {J!r}")
    trace = [J]
    inner_iterations: list = []
    step = config.fista.initial_step

    if config.learn_scales and config.fista.max_iters > 0:
        for _ in range(config.outer_max):
            value, value_grad = _scale_closures(basis, coef, X, y, config.step2_dtype)
            inner = fista_backtracking(
                value_grad,
                value,
                lambda g: 0.0,
                lambda v, st: project_simplex(v, s),
                gamma,
                replace(config.fista, initial_step=step),
            )
            # Warm-start the next line search near the accepted step.
            step = min(inner.step * 4.0, config.fista.initial_step)
            inner_iterations.append(inner.iterations)
            gamma_new = project_simplex(inner.x, s)
            coef_new, J_new = refit(gamma_new)
            if not np.isfinite(J_new):
                raise NonfiniteObjectiveError(f"objective became {J_new!r}")
            if J_new > J:
                break  # float-level stall; keep the previous alternation
            gamma, coef = gamma_new, coef_new
            trace.append(J_new)
            drop = J - J_new
            J = J_new
            if drop < config.outer_rel_tol * max(abs(J), _TINY):
                break

    return SrffModel(
        basis=basis,
        gamma=ScaleVector(gamma, s),
        coef=coef,
        objective_trace=trace,
        config=config,
        step2_iterations=inner_iterations,
    )


def save_model(model: SrffModel, path) -> None:
    """Write a self-describing JSON snapshot sufficient for bit-exact reload.

    The spectral draws are not stored; the basis is regenerated from
    (seed, family, shape) on load, which reproduces it bit for bit.
    """
    payload = {
        "format": MODEL_FORMAT,
        "seed": model.basis.seed,
        "kernel": model.basis.family.kind.value,
        "bandwidth": model.basis.family.bandwidth,
        "simplex_size": model.gamma.simplex_size,
        "n_dims": model.basis.n_dims,
        "n_features": model.basis.n_features,
        "ridge_weight": model.config.ridge_weight,
        "gamma": [float(v) for v in model.gamma.gamma],
        "coef": [float(v) for v in model.coef],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_model(path) -> SrffModel:
    """Reload a saved model; predictions match the original bit for bit."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"unrecognized model format: {payload.get('format')!r}")
    family = KernelFamily(Kernel(payload["kernel"]), payload["bandwidth"])
    basis = sample_basis(
        payload["n_dims"], payload["n_features"], family, payload["seed"]
    )
    config = SrffConfig(
        ridge_weight=payload["ridge_weight"],
        n_features=payload["n_features"],
        simplex_size=payload["simplex_size"],
        seed=payload["seed"],
        kernel=family.kind,
    )
    return SrffModel(
        basis=basis,
        gamma=ScaleVector(np.array(payload["gamma"]), payload["simplex_size"]),
        coef=np.array(payload["coef"], dtype=float),
        objective_trace=[],
        config=config,
    )
