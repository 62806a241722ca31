import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpcone import linalg
from mpcone.errors import DimensionMismatch, NotPositiveDefinite, Singular


def random_spd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


def cofactor_det(a):
    """Cofactor-expansion determinant, the test oracle for small orders."""
    n = a.shape[0]
    if n == 1:
        return a[0, 0]
    total = 0.0
    for j in range(n):
        minor = np.delete(np.delete(a, 0, axis=0), j, axis=1)
        total += (-1) ** j * a[0, j] * cofactor_det(minor)
    return total


class TestFactorSpd:
    def test_identity(self):
        f = linalg.factor_spd(np.eye(3))
        assert np.allclose(np.diag(f.lower), 1.0)
        assert np.allclose(f.reconstruct(), np.eye(3))

    def test_two_by_two_multiply_back(self):
        m = np.array([[4.0, 2.0], [2.0, 3.0]])
        f = linalg.factor_spd(m)
        assert np.abs(f.reconstruct() - m).max() <= 1e-12

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            linalg.factor_spd(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_solve_roundtrip(self):
        rng = np.random.default_rng(0)
        m = random_spd(rng, 5)
        f = linalg.factor_spd(m)
        b = rng.standard_normal(5)
        x = f.solve(b)
        assert np.linalg.norm(m @ x - b) <= 1e-9 * max(1.0, np.linalg.norm(b))

    @given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_reconstruction_property(self, n, seed):
        rng = np.random.default_rng(seed)
        m = random_spd(rng, n)
        f = linalg.factor_spd(m)
        err = np.abs(f.reconstruct() - m).max()
        assert err <= 1e-10 * max(1.0, np.abs(m).max())

    def test_asymmetric_rejected(self):
        with pytest.raises(DimensionMismatch):
            linalg.factor_spd(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestSymEig:
    def test_diagonal(self):
        vals, _ = linalg.sym_eig(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(vals, [3.0, 2.0, 1.0])

    def test_offdiagonal(self):
        vals, _ = linalg.sym_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(vals, [1.0, -1.0])

    def test_hand_characteristic_polynomial(self):
        # det([[2-t,1],[1,2-t]]) = t^2 - 4t + 3 has roots 3 and 1.
        vals, _ = linalg.sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(vals, [3.0, 1.0])

    @given(st.integers(min_value=1, max_value=8), st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_residual_and_orthonormality(self, n, seed):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((n, n))
        m = m + m.T
        vals, vecs = linalg.sym_eig(m)
        scale = max(1.0, np.linalg.norm(m))
        assert np.linalg.norm(m @ vecs - vecs * vals) <= 1e-9 * scale
        assert np.abs(vecs.T @ vecs - np.eye(n)).max() <= 1e-10
        assert abs(np.trace(m) - vals.sum()) <= 1e-9 * scale

    @given(st.integers(min_value=1, max_value=4), st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_determinant_against_cofactor_oracle(self, n, seed):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((n, n))
        m = m + m.T
        vals, _ = linalg.sym_eig(m)
        assert np.isclose(np.prod(vals), cofactor_det(m), rtol=1e-8, atol=1e-9)


class TestRank:
    def test_zero_matrix(self):
        assert linalg.rank(np.zeros((2, 3)), tol=1e-9) == 0

    def test_identity(self):
        assert linalg.rank(np.eye(4), tol=1e-9) == 4

    def test_proportional_rows(self):
        assert linalg.rank(np.array([[1.0, 2.0], [2.0, 4.0]]), tol=1e-9) == 1

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_invariance_under_row_ops(self, seed):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((4, 6))
        m[3] = 2.0 * m[0] - m[1]  # force rank 3
        base = linalg.rank(m)
        perm = rng.permutation(4)
        scales = rng.uniform(0.5, 2.0, size=4) * rng.choice([-1.0, 1.0], size=4)
        assert linalg.rank(m[perm] * scales[:, None]) == base == 3

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            linalg.rank(np.eye(2), tol=0.0)


class TestSolveSymmetricIndefinite:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.0])
        assert np.allclose(linalg.solve_symmetric_indefinite(np.eye(3), b), b)

    def test_swap(self):
        m = np.array([[0.0, 1.0], [1.0, 0.0]])
        x = linalg.solve_symmetric_indefinite(m, np.array([1.0, 2.0]))
        assert np.allclose(x, [2.0, 1.0])

    def test_random_spd_residual(self):
        rng = np.random.default_rng(7)
        m = random_spd(rng, 5)
        b = rng.standard_normal(5)
        x = linalg.solve_symmetric_indefinite(m, b)
        resid = np.linalg.norm(m @ x - b)
        assert resid <= 1e-8 * (np.linalg.norm(m) * np.linalg.norm(x) + np.linalg.norm(b))

    def test_singular_rejected(self):
        m = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(Singular):
            linalg.solve_symmetric_indefinite(m, np.array([1.0, 0.0]))
