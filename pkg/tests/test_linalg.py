import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad_vec
from scipy.linalg import expm, solve_continuous_are

from steadyctl import linalg as la
from steadyctl.errors import (
    NoStabilizingSolution,
    NotHurwitz,
    SingularMatrix,
)

from conftest import SQRT3, random_hurwitz


class TestSolveLinear:
    def test_identity(self):
        b = np.array([[1.0], [-2.0], [3.0]])
        np.testing.assert_allclose(la.solve_linear(np.eye(3), b), b)

    def test_diagonal(self):
        X = la.solve_linear(np.diag([2.0, 4.0]), np.array([[2.0], [8.0]]))
        np.testing.assert_allclose(X, [[1.0], [2.0]])

    def test_residual_bound(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((6, 6)) + 6 * np.eye(6)
        B = rng.standard_normal((6, 3))
        X = la.solve_linear(A, B)
        assert np.linalg.norm(A @ X - B) <= 1e-10 * max(1.0, np.linalg.norm(B))

    def test_singular(self):
        with pytest.raises(SingularMatrix):
            la.solve_linear(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            la.solve_linear(np.eye(2), np.ones(3))


class TestEigen:
    def test_diagonal(self):
        assert sorted(la.eigenvalues(np.diag([-1.0, -2.0])).real) == [-2.0, -1.0]

    def test_nilpotent(self):
        np.testing.assert_allclose(la.eigenvalues(np.array([[0.0, 1.0], [0.0, 0.0]])), 0.0)

    def test_hurwitz(self):
        assert la.is_hurwitz(np.diag([-1.0, -3.0]))
        assert not la.is_hurwitz(np.array([[0.0, 1.0], [0.0, 0.0]]))
        assert not la.is_hurwitz(np.diag([-1.0, -3.0]), margin=2.0)


class TestExpm:
    def test_zero(self):
        np.testing.assert_allclose(la.matrix_exponential(np.zeros((3, 3)), 2.0), np.eye(3))

    def test_scalar(self):
        np.testing.assert_allclose(la.matrix_exponential(np.array([[-1.0]]), 1.0),
                                   [[np.exp(-1.0)]], rtol=1e-14)

    @pytest.mark.parametrize("t", [0.5, 3.0, -2.0])
    def test_nilpotent(self, t):
        E = la.matrix_exponential(np.array([[0.0, 1.0], [0.0, 0.0]]), t)
        np.testing.assert_allclose(E, [[1.0, t], [0.0, 1.0]], atol=1e-15)

    def test_eigendecomposition_oracle(self):
        rng = np.random.default_rng(3)
        S = rng.standard_normal((4, 4))
        A = S + S.T
        lam, V = np.linalg.eigh(A)
        ref = V @ np.diag(np.exp(0.3 * lam)) @ V.T
        E = la.matrix_exponential(A, 0.3)
        assert np.linalg.norm(E - ref) <= 1e-10 * np.linalg.norm(ref)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), s=st.floats(0.0, 1.0), t=st.floats(0.0, 1.0))
    def test_semigroup(self, seed, s, t):
        A = np.random.default_rng(seed).standard_normal((4, 4))
        lhs = la.matrix_exponential(A, s + t)
        rhs = la.matrix_exponential(A, s) @ la.matrix_exponential(A, t)
        assert np.linalg.norm(lhs - rhs) <= 1e-9 * max(1.0, np.linalg.norm(lhs))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            la.matrix_exponential(np.array([[np.nan]]))


class TestLyapunov:
    def test_minus_identity(self):
        np.testing.assert_allclose(la.lyapunov_solve(-np.eye(2), np.eye(2)), np.eye(2) / 2)

    def test_decoupled(self):
        P = la.lyapunov_solve(np.diag([-1.0, -2.0]), np.eye(2))
        np.testing.assert_allclose(P, np.diag([0.5, 0.25]), atol=1e-15)

    def test_not_hurwitz(self):
        with pytest.raises(NotHurwitz):
            la.lyapunov_solve(np.diag([1.0, -1.0]), np.eye(2))

    def test_integral_oracle(self):
        rng = np.random.default_rng(11)
        A = random_hurwitz(rng, 3)
        X = rng.standard_normal((3, 3))
        Q = X @ X.T
        P = la.lyapunov_solve(A, Q)

        def integrand(t):
            E = expm(A * t)
            return E.T @ Q @ E

        ref, _ = quad_vec(integrand, 0.0, np.inf, epsabs=1e-12, epsrel=1e-12)
        assert np.abs(P - ref).max() <= 1e-6
        assert np.linalg.eigvalsh(P).min() >= -1e-9
        assert la.lyapunov_residual(P, A, Q) <= 1e-9 * max(1.0, np.linalg.norm(Q))

    def test_large_instance(self):
        rng = np.random.default_rng(5)
        A = random_hurwitz(rng, 14)
        Q = np.eye(14)
        P = la.lyapunov_solve(A, Q)
        assert la.lyapunov_residual(P, A, Q) <= 1e-9 * np.linalg.norm(Q)
        np.testing.assert_array_equal(P, P.T)


class TestCare:
    def test_scalar(self):
        P = la.care_solve([[0.0]], [[1.0]], [[1.0]], [[1.0]])
        np.testing.assert_allclose(P, [[1.0]], rtol=1e-12)

    def test_double_integrator(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        B = np.array([[0.0], [1.0]])
        P = la.care_solve(A, B, np.eye(2), np.eye(1))
        np.testing.assert_allclose(B.T @ P, [[1.0, SQRT3]], atol=1e-12)

    def test_against_scipy(self):
        rng = np.random.default_rng(2)
        for n, m in [(2, 1), (4, 2), (6, 3)]:
            A = rng.standard_normal((n, n))
            B = rng.standard_normal((n, m))
            Q = np.eye(n)
            R = np.eye(m)
            P = la.care_solve(A, B, Q, R)
            ref = solve_continuous_are(A, B, Q, R)
            assert np.linalg.norm(P - ref) <= 1e-8 * max(1.0, np.linalg.norm(ref))
            assert la.riccati_residual(P, A, B, Q, R) <= 1e-8 * max(1.0, np.linalg.norm(Q))

    def test_unstabilizable(self):
        with pytest.raises(NoStabilizingSolution):
            la.care_solve(np.diag([1.0, -1.0]), np.array([[0.0], [1.0]]), np.eye(2), np.eye(1))

    def test_undetectable_marginal(self):
        # an undamped oscillator that Q cannot see puts Hamiltonian eigenvalues on the axis
        A = np.array([[0.0, 1.0], [-1.0, 0.0]])
        with pytest.raises(NoStabilizingSolution):
            la.care_solve(A, np.array([[0.0], [1.0]]), np.zeros((2, 2)), np.eye(1))


class TestRankAndSubspaces:
    def test_rank(self):
        assert la.rank_rtol(np.eye(3)) == 3
        assert la.rank_rtol(np.zeros((3, 3))) == 0
        assert la.rank_rtol(np.array([[1.0, 2.0], [2.0, 4.0]])) == 1

    def test_fully_observable(self):
        A = np.array([[0.0, 1.0], [-2.0, -3.0]])
        assert la.unobservable_subspace(A, np.eye(2)).dim == 0

    def test_zero_output(self):
        sub = la.unobservable_subspace(np.diag([-1.0, 2.0, 0.5]), np.zeros((1, 3)))
        assert sub.dim == 3
        np.testing.assert_allclose(sub.basis.T @ sub.basis, np.eye(3), atol=1e-10)

    def test_matches_observability_matrix(self):
        rng = np.random.default_rng(4)
        # block structure hides the last two states from the output
        A = np.zeros((5, 5))
        A[:3, :3] = rng.standard_normal((3, 3))
        A[3:, 3:] = rng.standard_normal((2, 2))
        A[3:, :3] = rng.standard_normal((2, 3))
        C = np.hstack([rng.standard_normal((1, 3)), np.zeros((1, 2))])
        sub = la.unobservable_subspace(A, C)
        O = la.observability_matrix(A, C)
        assert sub.dim == 5 - la.rank_rtol(O)
        assert np.linalg.norm(O @ sub.basis) <= 1e-8

    def test_output_stays_zero(self):
        rng = np.random.default_rng(9)
        A = np.zeros((4, 4))
        A[:2, :2] = random_hurwitz(rng, 2)
        A[2:, 2:] = rng.standard_normal((2, 2))
        A[2:, :2] = rng.standard_normal((2, 2))
        C = np.hstack([rng.standard_normal((2, 2)), np.zeros((2, 2))])
        sub = la.unobservable_subspace(A, C)
        assert sub.dim == 2
        for t in np.linspace(0.0, 10.0, 21):
            E = la.matrix_exponential(A, t)
            assert np.linalg.norm(C @ E @ sub.basis) <= 1e-8 * max(1.0, np.linalg.norm(E))

    def test_controllability_rank(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        B = np.array([[0.0], [1.0]])
        assert la.rank_rtol(la.controllability_matrix(A, B)) == 2
