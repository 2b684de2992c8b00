import numpy as np
import pytest

from slabsolve.chebyshev import cheb_nodes, clenshaw_curtis_weights, diff_matrix


def test_nodes_are_increasing_and_hit_endpoints():
    x = cheb_nodes(9, 0.0, 2.0)
    assert np.all(np.diff(x) > 0)
    assert x[0] == pytest.approx(0.0)
    assert x[-1] == pytest.approx(2.0)


def test_diff_matrix_differentiates_polynomials_exactly():
    p = 10
    x = cheb_nodes(p)
    D = diff_matrix(p)
    for k in range(p - 1):
        err = np.max(np.abs(D @ x**k - (k * x ** max(k - 1, 0) if k else 0.0)))
        assert err < 1e-10


def test_diff_matrix_scales_with_interval():
    p = 8
    x = cheb_nodes(p, 0.0, 0.5)
    D = diff_matrix(p, 0.0, 0.5)
    assert np.max(np.abs(D @ x**2 - 2 * x)) < 1e-10


def test_weights_p2_is_trapezoid():
    np.testing.assert_allclose(clenshaw_curtis_weights(2), [1.0, 1.0], atol=1e-14)


def test_weights_p3_is_simpson():
    np.testing.assert_allclose(
        clenshaw_curtis_weights(3), [1.0 / 3, 4.0 / 3, 1.0 / 3], atol=1e-13
    )


@pytest.mark.parametrize("p", [2, 3, 5, 8, 13, 21])
def test_weights_positive_and_sum_to_length(p):
    w = clenshaw_curtis_weights(p, 0.0, 0.7)
    assert np.all(w > 0)
    assert np.sum(w) == pytest.approx(0.7, rel=1e-12)


def test_weights_integrate_smooth_function_accurately():
    p = 17
    x = cheb_nodes(p)
    w = clenshaw_curtis_weights(p)
    exact = np.sin(1.0) - np.sin(-1.0)
    assert np.dot(w, np.cos(x)) == pytest.approx(exact, abs=1e-12)
