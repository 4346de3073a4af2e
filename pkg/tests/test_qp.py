import numpy as np
import pytest
import scipy.sparse as sp

from safeweave.qp import QuadraticProgram, solve

from oracles import active_set_qp


def random_box_qp(rng, n=20, m=40):
    """Strictly convex QP with box-style rows; origin always feasible."""
    M = rng.normal(size=(n, n))
    P = M @ M.T + n * np.eye(n)
    q = rng.normal(size=n)
    A = np.vstack([np.eye(n), rng.normal(size=(m - n, n))])
    l = -rng.uniform(0.1, 2.0, size=m)
    u = rng.uniform(0.1, 2.0, size=m)
    return P, q, A, l, u


def make_qp(P, q, A, l, u):
    return QuadraticProgram(sp.csc_matrix(P), q, sp.csc_matrix(np.atleast_2d(A)), l, u)


class TestBasics:
    def test_projection_onto_halfline(self):
        qp = make_qp([[1.0]], [0.0], [[1.0]], [1.0], [np.inf])
        sol = solve(qp)
        assert sol.status == "solved"
        assert sol.z[0] == pytest.approx(1.0, abs=1e-4)

    def test_unconstrained_least_squares(self):
        c = np.array([1.5, -2.0, 0.25])
        qp = QuadraticProgram(sp.identity(3, format="csc"), -c, sp.csc_matrix((0, 3)), np.zeros(0), np.zeros(0))
        sol = solve(qp)
        assert sol.status == "solved"
        assert np.allclose(sol.z, c, atol=1e-6)

    def test_equality_row(self):
        # min z1^2 + z2^2 s.t. z1 + z2 = 1 -> (0.5, 0.5)
        qp = make_qp(2 * np.eye(2), np.zeros(2), [[1.0, 1.0]], [1.0], [1.0])
        sol = solve(qp, tol_primal=1e-7, tol_dual=1e-7)
        assert np.allclose(sol.z, [0.5, 0.5], atol=1e-5)

    def test_infeasible_detected(self):
        qp = make_qp([[1.0]], [0.0], [[1.0], [1.0]], [-np.inf, 1.0], [-1.0, np.inf])
        sol = solve(qp, max_iter=2000)
        assert sol.status == "infeasible-detected"

    def test_rejects_bad_bounds(self):
        with pytest.raises(ValueError):
            make_qp([[1.0]], [0.0], [[1.0]], [2.0], [1.0])


class TestAgainstActiveSetOracle:
    def test_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            P, q, A, l, u = random_box_qp(rng)
            qp = make_qp(P, q, A, l, u)
            sol = solve(qp, tol_primal=1e-7, tol_dual=1e-7, max_iter=20000)
            assert sol.status == "solved"
            z_ref, _ = active_set_qp(P, q, A, l, u)
            assert np.linalg.norm(sol.z - z_ref, np.inf) < 1e-5
            # KKT residuals
            viol = np.maximum(qp.A @ sol.z - u, 0) + np.maximum(l - qp.A @ sol.z, 0)
            assert viol.max() < 1e-6
            stat = qp.P @ sol.z + qp.q + qp.A.T @ sol.y
            assert np.linalg.norm(stat, np.inf) < 1e-5


class TestProperties:
    def test_kkt_residuals_on_solved(self):
        rng = np.random.default_rng(1)
        P, q, A, l, u = random_box_qp(rng, n=10, m=20)
        qp = make_qp(P, q, A, l, u)
        sol = solve(qp, tol_primal=1e-6, tol_dual=1e-6, max_iter=20000)
        assert sol.status == "solved"
        assert sol.primal_residual <= 1e-6 * max(1.0, np.linalg.norm(qp.A @ sol.z, np.inf))
        scale = max(1.0, np.linalg.norm(qp.q, np.inf), np.linalg.norm(qp.P @ sol.z, np.inf))
        assert sol.dual_residual <= 1e-6 * scale

    def test_warm_start_consistency_and_speedup(self):
        rng = np.random.default_rng(2)
        P, q, A, l, u = random_box_qp(rng)
        qp = make_qp(P, q, A, l, u)
        cold = solve(qp, tol_primal=1e-6, tol_dual=1e-6, max_iter=20000)
        q2 = q + 0.01 * rng.normal(size=len(q))
        qp2 = make_qp(P, q2, A, l, u)
        cold2 = solve(qp2, tol_primal=1e-6, tol_dual=1e-6, max_iter=20000)
        warm2 = solve(qp2, warm=(cold.z, cold.y), tol_primal=1e-6, tol_dual=1e-6, max_iter=20000)
        assert np.linalg.norm(warm2.z - cold2.z, np.inf) < 1e-4
        assert warm2.iterations <= cold2.iterations

    def test_scaling_invariance_of_argmin(self):
        rng = np.random.default_rng(3)
        P, q, A, l, u = random_box_qp(rng, n=8, m=16)
        sol1 = solve(make_qp(P, q, A, l, u), tol_primal=1e-7, tol_dual=1e-7, max_iter=20000)
        s = 37.5
        sol2 = solve(make_qp(s * P, s * q, A, l, u), tol_primal=1e-7, tol_dual=1e-7, max_iter=20000)
        assert np.linalg.norm(sol1.z - sol2.z, np.inf) < 1e-4

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        P, q, A, l, u = random_box_qp(rng, n=6, m=12)
        qp = make_qp(P, q, A, l, u)
        a = solve(qp)
        b = solve(qp)
        assert np.array_equal(a.z, b.z)
        assert a.iterations == b.iterations
