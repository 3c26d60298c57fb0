import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from srff.features import ScaleVector
from srff.optim import (
    FistaOptions,
    NonfiniteObjectiveError,
    SingularSystemError,
    fista_backtracking,
    fista_projected,
    project_simplex,
    solve_lasso,
    solve_ridge,
)


def project_simplex_bruteforce(v, s):
    """Exhaustive oracle: try every active-set pattern, keep the feasible
    candidate closest to v (the true projection is among them)."""
    v = np.asarray(v, dtype=float)
    d = v.size
    best, best_dist = None, np.inf
    for mask in range(1, 2**d):
        free = [i for i in range(d) if (mask >> i) & 1]
        theta = (v[free].sum() - s) / len(free)
        u = np.zeros(d)
        u[free] = v[free] - theta
        if np.any(u[free] < 0):
            continue
        dist = float(((u - v) ** 2).sum())
        if dist < best_dist:
            best, best_dist = u, dist
    return best


def lasso_coordinate_descent(X, y, lam, sweeps=20000, tol=1e-14):
    """Independent oracle for (1/n)||y - Xw||^2 + lam ||w||_1."""
    n, d = X.shape
    w = np.zeros(d)
    col_sq = (X**2).sum(axis=0) * (2.0 / n)
    residual = y.copy()
    for _ in range(sweeps):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0:
                continue
            w_old = w[j]
            rho = (2.0 / n) * (X[:, j] @ residual) + col_sq[j] * w_old
            w[j] = np.sign(rho) * max(abs(rho) - lam, 0.0) / col_sq[j]
            if w[j] != w_old:
                residual -= X[:, j] * (w[j] - w_old)
                max_delta = max(max_delta, abs(w[j] - w_old))
        if max_delta < tol:
            break
    return w


class TestSolveRidge:
    def test_identity_system(self, rng):
        y = rng.standard_normal(8)
        a = solve_ridge(np.eye(8), y, 0.0)
        assert np.allclose(a, y, atol=1e-12)

    def test_huge_lambda_dominates(self, rng):
        Z = rng.standard_normal((20, 6))
        y = rng.standard_normal(20)
        lam = 1e9
        a = solve_ridge(Z, y, lam)
        assert np.linalg.norm(a) <= np.linalg.norm(Z.T @ y) / lam * (1 + 1e-6)

    def test_matches_dense_inverse_oracle(self, rng):
        Z = rng.standard_normal((30, 10))
        y = rng.standard_normal(30)
        lam = 0.7
        oracle = np.linalg.inv(Z.T @ Z + lam * np.eye(10)) @ (Z.T @ y)
        a = solve_ridge(Z, y, lam)
        assert np.linalg.norm(a - oracle) <= 1e-8 * np.linalg.norm(oracle)

    @pytest.mark.parametrize("cond", [1e2, 1e5, 1e8])
    def test_residual_bound_across_conditioning(self, rng, cond):
        n, D = 40, 12
        U, _ = np.linalg.qr(rng.standard_normal((n, D)))
        V, _ = np.linalg.qr(rng.standard_normal((D, D)))
        sing = np.geomspace(1.0, 1.0 / np.sqrt(cond), D)
        Z = U @ np.diag(sing) @ V.T
        y = rng.standard_normal(n)
        lam = 1e-9
        a = solve_ridge(Z, y, lam)
        G = Z.T @ Z + lam * np.eye(D)
        b = Z.T @ y
        assert np.linalg.norm(G @ a - b) <= 1e-8 * np.linalg.norm(b)

    def test_singular_at_zero_lambda(self, rng):
        Z = rng.standard_normal((10, 4))
        Z[:, 3] = Z[:, 2]
        with pytest.raises(SingularSystemError):
            solve_ridge(Z, rng.standard_normal(10), 0.0)

    def test_rejects_bad_shapes(self, rng):
        with pytest.raises(ValueError):
            solve_ridge(rng.standard_normal((5, 2)), rng.standard_normal(4), 1.0)
        with pytest.raises(ValueError):
            solve_ridge(rng.standard_normal((5, 2)), rng.standard_normal(5), -1.0)


class TestProjectSimplex:
    def test_known_case_against_oracle(self):
        v = np.array([0.5, 0.5, 1.5])
        got = project_simplex(v, 1.0)
        oracle = project_simplex_bruteforce(v, 1.0)
        assert np.allclose(got, oracle, atol=1e-12)
        assert np.allclose(got, [0.0, 0.0, 1.0], atol=1e-12)

    def test_idempotent(self, rng):
        v = rng.standard_normal(7)
        once = project_simplex(v, 2.5)
        twice = project_simplex(once, 2.5)
        assert np.allclose(once, twice, atol=1e-12)

    def test_on_simplex_unchanged(self):
        v = np.array([0.25, 0.5, 0.25])
        assert np.allclose(project_simplex(v, 1.0), v, atol=1e-12)

    def test_singleton(self):
        for val in (-3.0, 0.0, 9.9):
            assert project_simplex(np.array([val]), 4.0) == pytest.approx([4.0])

    def test_rejects_nonpositive_size(self):
        with pytest.raises(ValueError):
            project_simplex(np.ones(3), 0.0)

    @given(
        v=hnp.arrays(np.float64, st.integers(1, 8).map(lambda d: (d,)),
                     elements=st.floats(-100, 100)),
        s=st.floats(0.01, 50.0),
    )
    def test_feasible_and_matches_oracle(self, v, s):
        got = project_simplex(v, s)
        assert np.all(got >= 0)
        assert abs(got.sum() - s) <= 1e-9 * s
        oracle = project_simplex_bruteforce(v, s)
        assert np.linalg.norm(got - oracle) <= 1e-9 * max(1.0, s)


class TestFistaProjected:
    def test_quadratic_interior_minimum(self):
        c = np.array([0.2, 0.3, 0.5])
        gamma0 = ScaleVector(np.full(3, 1 / 3), 1.0)
        opts = FistaOptions(max_iters=100, rel_tol=1e-12)
        out = fista_projected(
            lambda g: float(((g - c) ** 2).sum()),
            lambda g: 2.0 * (g - c),
            gamma0,
            opts,
        )
        assert np.allclose(out.gamma, c, atol=1e-6)

    def test_quadratic_exterior_minimum(self):
        c = np.array([2.0, -1.0, 0.5, 0.1])
        s = 1.5
        gamma0 = ScaleVector(np.full(4, s / 4), s)
        out = fista_projected(
            lambda g: float(((g - c) ** 2).sum()),
            lambda g: 2.0 * (g - c),
            gamma0,
            FistaOptions(max_iters=300, rel_tol=1e-14),
        )
        assert np.allclose(out.gamma, project_simplex(c, s), atol=1e-6)

    def test_zero_gradient_returns_start_in_one_iteration(self):
        gamma0 = ScaleVector(np.array([0.4, 0.6]), 1.0)
        out = fista_projected(
            lambda g: 7.0,
            lambda g: np.zeros(2),
            gamma0,
            FistaOptions(max_iters=1),
        )
        assert np.allclose(out.gamma, gamma0.gamma, atol=1e-12)

    def test_objective_never_above_start(self, rng):
        A = rng.standard_normal((6, 6))
        H = A.T @ A + 0.1 * np.eye(6)
        b = rng.standard_normal(6)
        gamma0 = ScaleVector(np.full(6, 0.5), 3.0)

        def f(g):
            return float(0.5 * g @ H @ g - b @ g)

        out = fista_projected(f, lambda g: H @ g - b, gamma0)
        assert f(out.gamma) <= f(gamma0.gamma) + 1e-12

    def test_nonfinite_objective_raises(self):
        gamma0 = ScaleVector(np.array([1.0]), 1.0)
        with pytest.raises(NonfiniteObjectiveError):
            fista_projected(lambda g: float("nan"), lambda g: np.zeros(1), gamma0)

    def test_monotone_trace_with_restart(self, rng):
        A = rng.standard_normal((8, 5))
        H = A.T @ A + 0.05 * np.eye(5)
        b = rng.standard_normal(5)
        result = fista_backtracking(
            lambda x: (float(0.5 * x @ H @ x - b @ x), H @ x - b),
            lambda x: float(0.5 * x @ H @ x - b @ x),
            lambda x: 0.0,
            lambda v, step: project_simplex(v, 2.0),
            np.full(5, 0.4),
            FistaOptions(max_iters=150, rel_tol=1e-14, restart_on_increase=True),
        )
        diffs = np.diff(result.trace)
        assert np.all(diffs <= 1e-12)


class TestFistaOptions:
    def test_validation(self):
        with pytest.raises(ValueError):
            FistaOptions(max_iters=0)
        with pytest.raises(ValueError):
            FistaOptions(backtrack_factor=1.0)
        with pytest.raises(ValueError):
            FistaOptions(rel_tol=0.0)
        with pytest.raises(ValueError):
            FistaOptions(initial_step=0.0)


class TestSolveLasso:
    def test_zero_lambda_orthonormal(self, rng):
        Q, _ = np.linalg.qr(rng.standard_normal((20, 5)))
        y = rng.standard_normal(20)
        w = solve_lasso(Q, y, 0.0)
        assert np.allclose(w, Q.T @ y, atol=1e-8)

    def test_above_threshold_is_exactly_zero(self, rng):
        X = rng.standard_normal((15, 4))
        y = rng.standard_normal(15)
        lam_max = (2.0 / 15) * np.max(np.abs(X.T @ y))
        assert np.array_equal(solve_lasso(X, y, lam_max), np.zeros(4))
        assert np.array_equal(solve_lasso(X, y, 1.01 * lam_max), np.zeros(4))

    def test_matches_coordinate_descent_oracle(self, rng):
        X = rng.standard_normal((20, 5))
        y = rng.standard_normal(20)
        lam = 0.1
        w = solve_lasso(X, y, lam)
        oracle = lasso_coordinate_descent(X, y, lam)
        assert np.max(np.abs(w - oracle)) <= 1e-5

    def test_deterministic(self, rng):
        X = rng.standard_normal((12, 6))
        y = rng.standard_normal(12)
        assert np.array_equal(solve_lasso(X, y, 0.05), solve_lasso(X, y, 0.05))

    def test_rejects_negative_lambda(self, rng):
        with pytest.raises(ValueError):
            solve_lasso(rng.standard_normal((5, 2)), rng.standard_normal(5), -0.1)
