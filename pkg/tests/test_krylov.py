import numpy as np
import pytest

from slabsolve.krylov import GmresBreakdownError, gmres


def test_identity_converges_in_one_iteration():
    rng = np.random.default_rng(0)
    b = rng.standard_normal(20)
    x, rep = gmres(lambda v: v, b, tol=1e-12)
    assert rep.iterations == 1
    assert rep.converged
    np.testing.assert_allclose(x, b, atol=1e-12)


def test_two_distinct_eigenvalues_two_iterations():
    A = np.diag([1.0, 2.0])
    b = np.ones(2)
    x, rep = gmres(lambda v: A @ v, b, tol=1e-12)
    assert rep.iterations == 2
    np.testing.assert_allclose(x, [1.0, 0.5], atol=1e-12)


def test_zero_rhs_returns_zero_immediately():
    x, rep = gmres(lambda v: v, np.zeros(7))
    assert rep.iterations == 0
    assert rep.converged
    np.testing.assert_array_equal(x, 0.0)


def test_residual_history_non_increasing():
    rng = np.random.default_rng(1)
    n = 40
    A = np.eye(n) + 0.3 * rng.standard_normal((n, n)) / np.sqrt(n)
    b = rng.standard_normal(n)
    x, rep = gmres(lambda v: A @ v, b, tol=1e-11)
    hist = np.array(rep.residuals)
    assert np.all(np.diff(hist) <= 1e-14)
    assert rep.converged
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1.1 * rep.tolerance


def test_arnoldi_orthogonality():
    rng = np.random.default_rng(2)
    n = 60
    A = np.eye(n) + 0.5 * rng.standard_normal((n, n)) / np.sqrt(n)
    b = rng.standard_normal(n)
    _, rep = gmres(lambda v: A @ v, b, tol=1e-12, keep_basis=True)
    Q = rep.basis
    G = Q.T @ Q
    assert np.max(np.abs(G - np.eye(G.shape[0]))) <= 1e-10


def test_max_iter_flagged_not_silent():
    rng = np.random.default_rng(3)
    n = 50
    A = np.eye(n) + rng.standard_normal((n, n)) / np.sqrt(n)
    b = rng.standard_normal(n)
    _, rep = gmres(lambda v: A @ v, b, tol=1e-14, max_iter=3)
    assert rep.iterations == 3
    assert not rep.converged


def test_nan_raises_breakdown():
    def bad(v):
        out = v.copy()
        out[0] = np.nan
        return out

    with pytest.raises(GmresBreakdownError):
        gmres(bad, np.ones(5))


def test_lucky_breakdown_counts_as_convergence():
    # rhs is an eigenvector: Krylov space is 1-dimensional
    A = np.diag([3.0, 1.0, 1.0])
    b = np.array([1.0, 0.0, 0.0])
    x, rep = gmres(lambda v: A @ v, b, tol=1e-15)
    assert rep.converged
    assert rep.iterations == 1
    np.testing.assert_allclose(x, [1 / 3, 0, 0], atol=1e-14)


def test_solution_accuracy_well_conditioned():
    rng = np.random.default_rng(4)
    n = 80
    A = np.eye(n) + 0.2 * rng.standard_normal((n, n)) / np.sqrt(n)
    x_true = rng.standard_normal(n)
    b = A @ x_true
    x, rep = gmres(lambda v: A @ v, b, tol=1e-12)
    assert np.linalg.norm(x - x_true) / np.linalg.norm(x_true) < 1e-10
