"""Spectral sampling and rescaled random cosine feature maps.

A feature basis holds unit-scale spectral draws for a shift-invariant
kernel family plus uniform phases.  The kernel bandwidth never enters the
draws; it is applied afterwards through a per-dimension scale vector, so
the same frozen basis can serve any scaling of the inputs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

TWO_PI = 2.0 * math.pi
SQRT2 = math.sqrt(2.0)

# Relative tolerance on the simplex sum constraint.
SIMPLEX_SUM_RTOL = 1e-9


class DegenerateDataError(ValueError):
    """All pairwise distances vanished; no bandwidth can be estimated."""


class Kernel(enum.Enum):
    """Kernel families with a known unit-scale spectral law."""

    GAUSSIAN = "gaussian"  # spectral law: standard normal
    LAPLACE = "laplace"    # spectral law: standard Cauchy


@dataclass(frozen=True)
class KernelFamily:
    """A shift-invariant kernel: family tag plus bandwidth in input units."""

    kind: Kernel
    bandwidth: float

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")


@dataclass(frozen=True)
class RandomFeatureBasis:
    """Frozen auxiliary draws for a rescalable random cosine feature map.

    epsilon : (n_features, n_dims) unit-scale spectral draws.
    phases  : (n_features,) offsets in [0, 2*pi).

    Instances are immutable after construction (the arrays are marked
    read-only) and safe to share across threads.
    """

    epsilon: np.ndarray
    phases: np.ndarray
    family: KernelFamily
    seed: int

    def __post_init__(self):
        self.epsilon.setflags(write=False)
        self.phases.setflags(write=False)

    @property
    def n_features(self) -> int:
        return self.epsilon.shape[0]

    @property
    def n_dims(self) -> int:
        return self.epsilon.shape[1]


@dataclass(frozen=True)
class ScaleVector:
    """Nonnegative per-dimension scales summing to a fixed simplex size.

    Units are inverse input units: entry s multiplies input column s before
    the spectral draws are applied.
    """

    gamma: np.ndarray
    simplex_size: float

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float)
        object.__setattr__(self, "gamma", g)
        if not self.simplex_size > 0:
            raise ValueError("simplex_size must be positive")
        if g.ndim != 1 or g.size == 0:
            raise ValueError("gamma must be a nonempty vector")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValueError("gamma entries must be finite and nonnegative")
        if abs(g.sum() - self.simplex_size) > SIMPLEX_SUM_RTOL * self.simplex_size:
            raise ValueError(
                f"gamma sums to {g.sum()!r}, expected {self.simplex_size!r}"
            )
        g.setflags(write=False)

    def __len__(self) -> int:
        return self.gamma.shape[0]


def _gamma_values(gamma) -> np.ndarray:
    """Accept a ScaleVector or a bare array (simplex constraint relaxed)."""
    if isinstance(gamma, ScaleVector):
        return gamma.gamma
    return np.asarray(gamma, dtype=float)


def sample_basis(d: int, D: int, family: KernelFamily, seed: int) -> RandomFeatureBasis:
    """Draw a frozen basis: D unit-scale spectral rows and D uniform phases.

    Identical arguments reproduce the identical basis bit for bit; epsilon
    is drawn first, phases second, from a single PCG64 stream.
    """
    if d < 1:
        raise ValueError(f"need at least one input dimension, got d={d}")
    if D < 1:
        raise ValueError(f"need at least one feature, got D={D}")
    rng = np.random.default_rng(seed)
    if family.kind is Kernel.GAUSSIAN:
        epsilon = rng.standard_normal((D, d))
    else:
        # Standard Cauchy via inverse CDF.  uniform() is half-open in [0, 1),
        # so the angle stays inside [-pi/2, pi/2) and tan never overflows.
        u = rng.random((D, d))
        epsilon = np.tan(np.pi * (u - 0.5))
    phases = rng.uniform(0.0, TWO_PI, size=D)
    return RandomFeatureBasis(epsilon=epsilon, phases=phases, family=family, seed=int(seed))


def _check_inputs(basis: RandomFeatureBasis, gamma: np.ndarray, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-d, got shape {X.shape}")
    d = basis.n_dims
    if X.shape[1] != d or gamma.shape[0] != d:
        raise ValueError(
            f"dimension mismatch: basis has d={d}, X has {X.shape[1]} columns, "
            f"gamma has {gamma.shape[0]} entries"
        )
    return X


def _angles(basis: RandomFeatureBasis, gamma: np.ndarray, X: np.ndarray) -> np.ndarray:
    # Zero scale entries null their input column exactly, so the angles (and
    # everything downstream) are bit-identical under changes to that column.
    theta = (X * gamma) @ basis.epsilon.T
    theta += basis.phases
    return theta


def feature_map(basis: RandomFeatureBasis, gamma, X) -> np.ndarray:
    """Rescaled random cosine features, one row per data point.

    Entry (i, j) is sqrt(2) * cos(eps_j . (gamma * x_i) + b_j); every entry
    lies in [-sqrt(2), sqrt(2)].
    """
    g = _gamma_values(gamma)
    X = _check_inputs(basis, g, X)
    theta = _angles(basis, g, X)
    np.cos(theta, out=theta)
    theta *= SQRT2
    return theta


def feature_grad_column(basis: RandomFeatureBasis, gamma, X, s: int) -> np.ndarray:
    """Derivative of the feature matrix with respect to scale entry s.

    Entry (i, j) is -sqrt(2) * sin(eps_j . (gamma * x_i) + b_j) * eps_js * x_is.
    """
    g = _gamma_values(gamma)
    X = _check_inputs(basis, g, X)
    if not 0 <= s < basis.n_dims:
        raise IndexError(f"dimension index {s} out of range for d={basis.n_dims}")
    theta = _angles(basis, g, X)
    np.sin(theta, out=theta)
    theta *= -SQRT2
    theta *= X[:, s][:, None]
    theta *= basis.epsilon[:, s][None, :]
    return theta


def median_heuristic_sigma(X, k: int = 20, max_rows: int = 1000, seed: int = 0) -> float:
    """Bandwidth as the median of pooled k-nearest-neighbour distances.

    Each point contributes its distances to the k nearest other points.
    Rows are subsampled to at most max_rows (fixed-seed draw, so repeated
    calls agree) before the O(m^2) distance pass.  Falls back to the median
    of the nonzero pairwise distances if the pooled median is zero; raises
    DegenerateDataError when every row is identical.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a 2-d array with at least two rows")
    n = X.shape[0]
    if n > max_rows:
        idx = np.sort(np.random.default_rng(seed).choice(n, size=max_rows, replace=False))
        X = X[idx]
    m = X.shape[0]
    kk = min(k, m - 1)
    dist = cdist(X, X)
    # k+1 smallest per row, sorted; drop one zero for the self-distance.
    nearest = np.partition(dist, kk, axis=1)[:, : kk + 1]
    nearest = np.sort(nearest, axis=1)[:, 1:]
    sigma = float(np.median(nearest))
    if sigma > 0:
        return sigma
    nonzero = dist[dist > 0]
    if nonzero.size == 0:
        raise DegenerateDataError("all rows identical; no usable distances")
    return float(np.median(nonzero))
