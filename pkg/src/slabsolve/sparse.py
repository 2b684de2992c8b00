"""Sparse direct factorization of the slab-interior blocks.

The fill-reducing ordering is a geometric nested dissection computed from the
node coordinates and the matrix graph (deterministic, no external graph
library); the LU itself and the blocked triangular solves are delegated to
SuperLU, with the precomputed ordering passed through unchanged. Threshold
pivoting acts as the minimal safeguard against tiny pivots.
"""

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class LocalResonanceError(RuntimeError):
    """The interior block of a local slab problem is numerically singular.

    This is the local-resonance scenario: the slab geometry places an interior
    Dirichlet eigenvalue at (numerically) zero. Detection is reported; slab
    widths are not adjusted automatically.
    """


@dataclass
class FactorStats:
    n: int
    nnz_matrix: int
    nnz_factors: int
    seconds: float


class InteriorFactorization:
    """LU factorization of an interior block behind a permutation."""

    def __init__(self, lu, perm, n, nnz_matrix, seconds):
        self._lu = lu
        self._perm = perm
        self._iperm = np.argsort(perm)
        self.stats = FactorStats(
            n=n,
            nnz_matrix=nnz_matrix,
            nnz_factors=int(lu.L.nnz + lu.U.nnz),
            seconds=seconds,
        )

    @property
    def n(self):
        return self.stats.n

    def solve(self, rhs):
        """Solve A x = rhs for one vector or a block of columns."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {self.n}")
        out = self._lu.solve(rhs[self._perm])
        return out[self._iperm]

    def solve_adjoint(self, rhs):
        """Solve A* x = rhs (real arithmetic: the transpose system)."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {self.n}")
        out = self._lu.solve(rhs[self._perm], trans="T")
        return out[self._iperm]


def factorize(system_or_matrix, interior=None, points=None):
    """Factorize the interior block of a system (or an explicit sparse matrix).

    Accepts either a SparseSystem (interior defaults to its non-Dirichlet
    DOFs) or a square sparse matrix plus optional coordinates for the
    dissection ordering.
    """
    if sp.issparse(system_or_matrix):
        matrix = system_or_matrix.tocsr()
        if interior is not None:
            matrix = matrix[interior][:, interior].tocsr()
            pts = points[interior] if points is not None else None
        else:
            pts = points
    else:
        system = system_or_matrix
        idx = system.interior_idx if interior is None else interior
        matrix = system.matrix[idx][:, idx].tocsr()
        pts = system.points[idx]

    n = matrix.shape[0]
    t0 = time.perf_counter()
    if pts is not None and n > 0:
        perm = nested_dissection(pts, matrix)
    else:
        perm = np.arange(n)
    A = matrix[perm][:, perm].tocsc()
    try:
        lu = spla.splu(
            A,
            permc_spec="NATURAL",
            diag_pivot_thresh=0.01,
            options={"SymmetricMode": True},
        )
    except RuntimeError as exc:
        if "singular" in str(exc).lower():
            raise LocalResonanceError(
                "interior block is numerically singular (local resonance); "
                "adjust the slab widths or the wavenumber"
            ) from exc
        raise
    # threshold pivoting can push through a singular matrix without raising;
    # a pivot collapsing to roundoff relative to the largest one is a resonance
    u_diag = np.abs(lu.U.diagonal())
    if (not np.all(np.isfinite(u_diag))) or (
        u_diag.size and u_diag.min() < 1e-12 * u_diag.max()
    ):
        raise LocalResonanceError(
            "interior block is numerically singular (local resonance); "
            "adjust the slab widths or the wavenumber"
        )
    seconds = time.perf_counter() - t0
    return InteriorFactorization(lu, perm, n, matrix.nnz, seconds)


def nested_dissection(points, matrix, leaf=32):
    """Geometric nested dissection ordering of a sparse matrix graph.

    Recursively bisect the node set at the coordinate median of the longest
    box axis; the separator is the set of left-half nodes adjacent to the
    right half. Children are ordered before their separator, which is what
    gives the familiar fill bounds on thin structured grids. Small chunks keep
    their natural order.
    """
    n = points.shape[0]
    if n == 0:
        return np.arange(0)
    pattern = matrix.tocsr().copy()
    pattern.data = np.ones_like(pattern.data)
    order = np.empty(n, dtype=np.int64)
    marker = np.zeros(n)
    pos = 0

    def emit(idx):
        nonlocal pos
        order[pos : pos + len(idx)] = idx
        pos += len(idx)

    # explicit stack, post-order: both halves first, separator last
    stack = [("split", np.arange(n))]
    while stack:
        kind, idx = stack.pop()
        if kind == "emit":
            emit(idx)
            continue
        if len(idx) <= leaf:
            emit(np.sort(idx))
            continue
        lo = points[idx].min(axis=0)
        hi = points[idx].max(axis=0)
        axis = int(np.argmax(hi - lo))
        ordering = np.argsort(points[idx, axis], kind="stable")
        half = len(idx) // 2
        left = idx[ordering[:half]]
        right = idx[ordering[half:]]
        marker[right] = 1.0
        touched = pattern[left] @ marker
        marker[right] = 0.0
        sep_mask = touched > 0
        stack.append(("emit", np.sort(left[sep_mask])))
        stack.append(("split", right))
        stack.append(("split", left[~sep_mask]))
    assert pos == n
    return order
