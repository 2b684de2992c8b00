"""Chebyshev collocation primitives: nodes, differentiation, quadrature."""

import numpy as np


def cheb_nodes(p, a=-1.0, b=1.0):
    """p Chebyshev extreme points on [a, b], in increasing order."""
    if p < 2:
        raise ValueError("need at least 2 nodes")
    x = -np.cos(np.pi * np.arange(p) / (p - 1))
    return a + (x + 1.0) * 0.5 * (b - a)


def diff_matrix(p, a=-1.0, b=1.0):
    """Spectral differentiation matrix on the p Chebyshev extreme points of [a, b].

    Off-diagonal entries from the barycentric form; diagonal entries by the
    negative-sum trick, which keeps constants in the nullspace exactly.
    """
    x = cheb_nodes(p)
    c = np.ones(p)
    c[0] = 2.0
    c[-1] = 2.0
    c *= (-1.0) ** np.arange(p)
    dx = x[:, None] - x[None, :] + np.eye(p)
    D = np.outer(c, 1.0 / c) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D * (2.0 / (b - a))


def clenshaw_curtis_weights(p, a=-1.0, b=1.0):
    """Quadrature weights for the p Chebyshev extreme points on [a, b].

    Computed by requiring exactness on the Chebyshev basis T_0..T_{p-1}; with
    moments int_{-1}^{1} T_k = (1+(-1)^k)/(1-k^2). Weights are positive and
    sum to the interval length.
    """
    if p < 2:
        raise ValueError("need at least 2 nodes")
    x = -np.cos(np.pi * np.arange(p) / (p - 1))
    V = np.polynomial.chebyshev.chebvander(x, p - 1)
    m = np.zeros(p)
    k = np.arange(0, p, 2)
    m[k] = 2.0 / (1.0 - k.astype(float) ** 2)
    w = np.linalg.solve(V.T, m)
    return w * 0.5 * (b - a)
