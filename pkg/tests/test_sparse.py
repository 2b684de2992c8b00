import numpy as np
import pytest
import scipy.sparse as sp

from slabsolve.fd import assemble_fd
from slabsolve.hps import assemble_hps
from slabsolve.problem import make_helmholtz
from slabsolve.sparse import LocalResonanceError, factorize, nested_dissection


def tridiag(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()


def test_tridiag_lu_by_hand():
    # elimination of tridiag(-1, 2, -1) gives U diagonal (2, 3/2, 4/3)
    fact = factorize(tridiag(3))
    U = fact._lu.U.toarray()
    L = fact._lu.L.toarray()
    np.testing.assert_allclose(np.diag(U), [2.0, 1.5, 4.0 / 3.0])
    assert np.allclose(np.triu(U, 2), 0)  # bidiagonal
    assert np.allclose(np.tril(L, -2), 0)


def test_identity_factorization():
    fact = factorize(sp.eye(5, format="csr"))
    np.testing.assert_allclose(fact._lu.L.toarray(), np.eye(5))
    np.testing.assert_allclose(fact._lu.U.toarray(), np.eye(5))


def test_solve_hand_example():
    fact = factorize(tridiag(3))
    x = fact.solve(np.ones(3))
    np.testing.assert_allclose(x, [1.5, 2.0, 1.5], atol=1e-14)


def test_solve_zero_rhs():
    fact = factorize(tridiag(4))
    np.testing.assert_allclose(fact.solve(np.zeros(4)), 0.0)


def test_multivector_solve_matches_columnwise():
    rng = np.random.default_rng(0)
    A = tridiag(20)
    fact = factorize(A)
    B = rng.standard_normal((20, 5))
    X = fact.solve(B)
    for i in range(5):
        np.testing.assert_allclose(X[:, i], fact.solve(B[:, i]), atol=1e-13)


def test_solve_dimension_mismatch():
    fact = factorize(tridiag(4))
    with pytest.raises(ValueError):
        fact.solve(np.ones(5))


def test_adjoint_equals_solve_for_symmetric():
    rng = np.random.default_rng(1)
    A = tridiag(15)
    fact = factorize(A)
    b = rng.standard_normal(15)
    np.testing.assert_allclose(fact.solve(b), fact.solve_adjoint(b), atol=1e-13)


def test_adjoint_residual_generic():
    rng = np.random.default_rng(2)
    A = sp.csr_matrix(rng.standard_normal((30, 30)) + 10 * np.eye(30))
    fact = factorize(A)
    b = rng.standard_normal(30)
    x = fact.solve_adjoint(b)
    assert np.linalg.norm(A.T @ x - b) / np.linalg.norm(b) < 1e-10


def test_adjoint_residual_hps_slab():
    op = make_helmholtz(3.0, dim=2)
    s = assemble_hps(op, [(0.0, 0.5), (0.0, 1.0)], (2, 4), 6)
    fact = factorize(s)
    rng = np.random.default_rng(3)
    b = rng.standard_normal(fact.n)
    A = s.interior_matrix()
    x = fact.solve_adjoint(b)
    assert np.linalg.norm(A.T @ x - b) / np.linalg.norm(b) < 1e-10
    y = fact.solve(b)
    assert np.linalg.norm(A @ y - b) / np.linalg.norm(b) < 1e-10


def test_factor_probe_residual():
    # P A Q = L U on random probes
    op = make_helmholtz(0.0, dim=2)
    s = assemble_fd(op, [(0.0, 0.5), (0.0, 1.0)], 1 / 16)
    fact = factorize(s)
    rng = np.random.default_rng(4)
    I = s.interior_idx
    A = s.matrix[I][:, I]
    for _ in range(3):
        x = rng.standard_normal(fact.n)
        b = A @ x
        assert np.linalg.norm(fact.solve(b) - x) / np.linalg.norm(x) < 1e-10


def test_resonant_slab_raises_local_resonance():
    # pick kappa^2 as an exact interior Dirichlet eigenvalue of a tiny slab
    op0 = make_helmholtz(0.0, dim=2)
    s0 = assemble_fd(op0, [(0.0, 0.5), (0.0, 1.0)], 1 / 8)
    A0 = s0.interior_matrix().toarray()
    lam = np.linalg.eigvalsh(A0)[0]
    kappa = np.sqrt(lam)
    op = make_helmholtz(kappa, dim=2)
    s = assemble_fd(op, [(0.0, 0.5), (0.0, 1.0)], 1 / 8)
    with pytest.raises(LocalResonanceError):
        factorize(s)


def test_nested_dissection_is_a_permutation():
    op = make_helmholtz(0.0, dim=2)
    s = assemble_fd(op, [(0.0, 1.0), (0.0, 1.0)], 1 / 16)
    I = s.interior_idx
    A = s.matrix[I][:, I].tocsr()
    perm = nested_dissection(s.points[I], A)
    assert sorted(perm.tolist()) == list(range(A.shape[0]))


def test_nested_dissection_small_is_natural():
    # below the leaf cutoff the natural order is kept, matching hand LU
    pts = np.arange(3.0)[:, None]
    perm = nested_dissection(pts, tridiag(3))
    np.testing.assert_array_equal(perm, [0, 1, 2])


def test_fill_grows_subquadratically_on_thin_slabs():
    # thin-slab factor fill: nnz should grow far slower than n^2
    op = make_helmholtz(0.0, dim=2)
    sizes = []
    fills = []
    for ny in [16, 32, 64]:
        s = assemble_fd(op, [(0.0, 0.25), (0.0, 1.0)], 1.0 / (4 * ny / 4))
        # fix the aspect: 4 cells across, ny along
        s = assemble_fd(op, [(0.0, 4.0 / ny), (0.0, 1.0)], 1.0 / ny)
        fact = factorize(s)
        sizes.append(fact.stats.n)
        fills.append(fact.stats.nnz_factors)
    rate = np.log(fills[-1] / fills[0]) / np.log(sizes[-1] / sizes[0])
    assert rate < 1.5
