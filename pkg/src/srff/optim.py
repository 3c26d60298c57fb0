"""Optimization primitives: ridge solve, simplex projection, FISTA.

The FISTA engine is shared by the simplex-projected scale descent and the
soft-threshold lasso; both are full-batch with backtracking line search
and an optional monotone restart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .features import ScaleVector

_TINY = 1e-30
_MIN_STEP = 1e-18
_MAX_BACKTRACKS = 60


class SingularSystemError(np.linalg.LinAlgError):
    """The (regularized) Gram matrix is not positive definite."""


class NonfiniteObjectiveError(FloatingPointError):
    """Objective or gradient produced NaN/inf; upstream numerics failed."""


@dataclass(frozen=True)
class FistaOptions:
    max_iters: int = 200
    initial_step: float = 1.0
    backtrack_factor: float = 0.5
    rel_tol: float = 1e-6
    restart_on_increase: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")


def _chol_solve_refined(
    A: np.ndarray, b: np.ndarray, context: str, check_rank: bool = False
) -> np.ndarray:
    """Solve the SPD system A x = b by Cholesky plus one refinement pass.

    The refinement keeps the residual near machine precision for condition
    numbers up to ~1e8.  With check_rank, a pivot collapsed to rounding
    level (exact rank deficiency blurred by float noise) is rejected too.
    """
    try:
        cf = scipy.linalg.cho_factor(A, lower=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"{context}: matrix is not positive definite") from exc
    if check_rank:
        pivots = np.abs(np.diag(cf[0]))
        if pivots.min() <= np.sqrt(A.shape[0] * np.finfo(float).eps) * pivots.max():
            raise SingularSystemError(f"{context}: matrix is numerically rank-deficient")
    x = scipy.linalg.cho_solve(cf, b, check_finite=False)
    x += scipy.linalg.cho_solve(cf, b - A @ x, check_finite=False)
    return x


def solve_ridge(Z: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Solve (Z'Z + lam I) a = Z'y for the feature coefficients.

    lam = 0 is allowed only when the Gram matrix is positive definite;
    otherwise SingularSystemError is raised.
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    if Z.ndim != 2 or y.shape != (Z.shape[0],):
        raise ValueError(f"shape mismatch: Z {Z.shape}, y {y.shape}")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    G = Z.T @ Z
    G[np.diag_indices_from(G)] += lam
    return _chol_solve_refined(
        G, Z.T @ y, f"ridge solve (lam={lam:g})", check_rank=(lam == 0.0)
    )


def project_simplex(v: np.ndarray, s: float) -> np.ndarray:
    """Euclidean projection onto {u >= 0, sum(u) = s}, sort-and-threshold."""
    if not s > 0:
        raise ValueError("simplex size must be positive")
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    excess = np.cumsum(u) - s
    counts = np.arange(1, v.size + 1)
    # Largest index with u_j above the running threshold; index 0 always
    # qualifies because s > 0.
    rho = np.nonzero(u > excess / counts)[0][-1]
    theta = excess[rho] / (rho + 1.0)
    out = np.clip(v - theta, 0.0, None)
    total = out.sum()
    if total <= 0.0:  # extreme cancellation; put all mass on the largest entry
        out = np.zeros_like(v)
        out[int(np.argmax(v))] = s
        return out
    out *= s / total  # pin the sum exactly; relative change is O(eps)
    return out


@dataclass
class FistaResult:
    x: np.ndarray
    objective: float
    iterations: int
    step: float
    trace: list


def _backtrack(y, f_y, grad_y, step, smooth_value, prox, shrink):
    """Shrink the step until the local quadratic model upper-bounds f."""
    slack = 1e-12 * max(1.0, abs(f_y))
    for _ in range(_MAX_BACKTRACKS):
        x = prox(y - step * grad_y, step)
        diff = x - y
        bound = f_y + grad_y @ diff + 0.5 * (diff @ diff) / step + slack
        f_x = smooth_value(x)
        if f_x <= bound or step <= _MIN_STEP:
            return x, f_x, step
        step *= shrink
    return x, f_x, step


def fista_backtracking(
    smooth_value_grad: Callable,
    smooth_value: Callable,
    nonsmooth_value: Callable,
    prox: Callable,
    x0: np.ndarray,
    opts: FistaOptions,
) -> FistaResult:
    """Accelerated proximal gradient on F = f + h with backtracking.

    smooth_value_grad(x) -> (f(x), grad f(x)); nonsmooth_value(x) -> h(x);
    prox(v, step) minimizes h(u) + ||u - v||^2 / (2 step).  With the
    monotone restart enabled the accepted objective sequence never
    increases and the best iterate is returned.
    """
    x = np.array(x0, dtype=float)
    f_x = smooth_value(x)
    F_x = f_x + nonsmooth_value(x)
    if not np.isfinite(F_x):
        raise NonfiniteObjectiveError(f"objective at the starting point is {F_x!r}")
    best_x, best_F = x, F_x
    y = x.copy()
    t = 1.0
    step = opts.initial_step
    trace = [F_x]
    iterations = 0
    for _ in range(opts.max_iters):
        iterations += 1
        # let the step recover between iterations; backtracking only shrinks
        step = min(step / opts.backtrack_factor, opts.initial_step)
        f_y, grad_y = smooth_value_grad(y)
        if not np.all(np.isfinite(grad_y)):
            raise NonfiniteObjectiveError("gradient produced nonfinite entries")
        x_new, f_new, step = _backtrack(
            y, f_y, grad_y, step, smooth_value, prox, opts.backtrack_factor
        )
        F_new = f_new + nonsmooth_value(x_new)
        if not np.isfinite(F_new):
            raise NonfiniteObjectiveError("objective produced a nonfinite value")
        if F_new > F_x and opts.restart_on_increase:
            # Momentum overshot: retry as a plain projected step from x.
            t = 1.0
            f_y, grad_y = smooth_value_grad(x)
            x_new, f_new, step = _backtrack(
                x, f_y, grad_y, step, smooth_value, prox, opts.backtrack_factor
            )
            F_new = f_new + nonsmooth_value(x_new)
            if F_new > F_x:
                break  # no float-representable descent left
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        drop = F_x - F_new
        x, F_x, t = x_new, F_new, t_new
        trace.append(F_x)
        if F_x < best_F:
            best_x, best_F = x, F_x
        if 0.0 <= drop < opts.rel_tol * max(abs(F_x), _TINY):
            break
    return FistaResult(x=best_x, objective=best_F, iterations=iterations, step=step, trace=trace)


def fista_projected(
    objective: Callable,
    gradient: Callable,
    gamma0: ScaleVector,
    opts: FistaOptions | None = None,
) -> ScaleVector:
    """Minimize a smooth objective over the scaled simplex.

    Every iterate passes through project_simplex; the returned point is
    feasible and its objective never exceeds objective(gamma0).
    """
    opts = opts or FistaOptions()
    s = gamma0.simplex_size

    def value_grad(g):
        return float(objective(g)), np.asarray(gradient(g), dtype=float)

    result = fista_backtracking(
        value_grad,
        lambda g: float(objective(g)),
        lambda g: 0.0,
        lambda v, step: project_simplex(v, s),
        gamma0.gamma,
        opts,
    )
    return ScaleVector(project_simplex(result.x, s), s)


def soft_threshold(v: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def solve_lasso(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    opts: FistaOptions | None = None,
) -> np.ndarray:
    """Minimize (1/n)||y - Xw||^2 + lam ||w||_1 by FISTA with soft threshold.

    Started at zero, so any lam >= (2/n) ||X'y||_inf returns the exact zero
    vector.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    opts = opts or FistaOptions(max_iters=2000, rel_tol=1e-12)
    n = X.shape[0]

    def smooth_value(w):
        r = X @ w - y
        return float(r @ r) / n

    def smooth_value_grad(w):
        r = X @ w - y
        return float(r @ r) / n, (2.0 / n) * (X.T @ r)

    result = fista_backtracking(
        smooth_value_grad,
        smooth_value,
        lambda w: lam * float(np.abs(w).sum()),
        lambda v, step: soft_threshold(v, lam * step),
        np.zeros(X.shape[1]),
        opts,
    )
    return result.x
