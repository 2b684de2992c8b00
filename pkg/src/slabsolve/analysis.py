"""Dense oracles and diagnostics for the reduced interface systems.

Everything here works on desk-scale dense matrices: the globally reduced
interface system obtained by eliminating all slab interiors, its
block-diagonally preconditioned form, red-black projection identities,
normality measures, spectra, and the numerical-rank studies of cluster far
fields under weak and strong admissibility.
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
import scipy.linalg as sla

from slabsolve.sparse import factorize
from slabsolve.system import SparseSystem


@dataclass
class DenseReduced:
    """Dense interface system: T from global elimination, S from block
    diagonal preconditioning (identity diagonal blocks)."""

    T: np.ndarray
    S: np.ndarray
    block_sizes: np.ndarray
    block_offsets: np.ndarray
    h: np.ndarray = None          # reduced load (Schur-eliminated rhs)
    h_prec: np.ndarray = None     # block-diagonally preconditioned load

    def block(self, j):
        return slice(int(self.block_offsets[j]), int(self.block_offsets[j + 1]))

    def t_block(self, j, jj):
        return self.T[self.block(j), self.block(jj)]

    def s_solution_block(self, j, jj):
        """Solution operator -T_jj^{-1} T_{j,jj} (the negated S off-diagonal)."""
        return -self.S[self.block(j), self.block(jj)]


def schur_reduce(system: SparseSystem, interfaces: List[np.ndarray], rhs=None,
                 interior_cap=40000, interface_cap=6000):
    """Eliminate everything but the interface DOFs from a global system.

    interfaces: per-interface DOF index lists (canonical order). Dirichlet
    rows eliminate trivially, so only true interiors are solved for. Guarded
    by dense-work caps.
    """
    J = np.concatenate(interfaces)
    sizes = np.array([len(ifc) for ifc in interfaces])
    if len(J) > interface_cap:
        raise ValueError(f"|J|={len(J)} exceeds the dense cap {interface_cap}")
    # Dirichlet identity rows stay in the eliminated set: they contribute
    # nothing to T (their rows have no couplings) but carry the boundary data
    # into the reduced load
    mask = np.ones(system.n_dofs, dtype=bool)
    mask[J] = False
    Jc = np.flatnonzero(mask)
    if len(Jc) > interior_cap:
        raise ValueError(f"|J^c|={len(Jc)} exceeds the dense cap {interior_cap}")

    A = system.matrix
    A_JJ = A[J][:, J].toarray()
    A_JC = A[J][:, Jc].tocsr()
    A_CJ = A[Jc][:, J].tocsc()
    fact = factorize(A[Jc][:, Jc].tocsr(), points=system.points[Jc])
    T = np.array(A_JJ)
    for sl in _chunks(len(J), 256):
        T[:, sl] -= A_JC @ fact.solve(A_CJ[:, sl].toarray())

    offsets = np.concatenate([[0], np.cumsum(sizes)])
    S = np.array(T)
    h = None
    h_prec = None
    if rhs is not None:
        b_J = rhs[J]
        b_C = rhs[Jc]
        h = b_J - A_JC @ fact.solve(b_C)
        h_prec = np.empty_like(h)
    for j in range(len(sizes)):
        sl = slice(offsets[j], offsets[j + 1])
        lu = sla.lu_factor(T[sl, sl])
        S[sl] = sla.lu_solve(lu, T[sl])
        if rhs is not None:
            h_prec[sl] = sla.lu_solve(lu, h[sl])
    return DenseReduced(
        T=T, S=S, block_sizes=sizes, block_offsets=offsets, h=h, h_prec=h_prec
    )


def single_slab_t_blocks(system: SparseSystem, left_plane, right_plane):
    """One-sided reduced blocks of a single slab with free interface planes.

    Returns (T_rr, T_rl): the self block of the right interface and its
    coupling to the left one, after eliminating the slab interior. The slab
    system must treat both planes as free DOFs (interface-style rows).
    """
    J = np.concatenate([right_plane, left_plane])
    mask = np.ones(system.n_dofs, dtype=bool)
    mask[J] = False
    mask[system.dirichlet_idx] = False
    Jc = np.flatnonzero(mask)
    A = system.matrix
    fact = factorize(A[Jc][:, Jc].tocsr(), points=system.points[Jc])
    A_JC = A[J][:, Jc].tocsr()
    A_CJ = A[Jc][:, J].tocsc()
    T = A[J][:, J].toarray()
    for sl in _chunks(len(J), 256):
        T[:, sl] -= A_JC @ fact.solve(A_CJ[:, sl].toarray())
    nr = len(right_plane)
    return T[:nr, :nr], T[:nr, nr:]


def _chunks(n, size):
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def red_black_projections(reduced: DenseReduced):
    """Split the preconditioned system into the two T-orthogonal projections
    induced by the alternating interface coloring.

    Only valid for symmetric positive definite T; refuses otherwise.
    """
    T = reduced.T
    if not np.allclose(T, T.T, rtol=1e-8, atol=1e-10 * np.abs(T).max()):
        raise ValueError("red-black analysis requires a symmetric T")
    if np.linalg.eigvalsh(T).min() <= 0:
        raise ValueError("red-black analysis requires positive definite T")
    n_int = len(reduced.block_sizes)
    red = [j for j in range(n_int) if j % 2 == 0]
    black = [j for j in range(n_int) if j % 2 == 1]
    perm = np.concatenate(
        [np.arange(reduced.block_offsets[j], reduced.block_offsets[j + 1])
         for j in red + black]
    )
    Tp = T[np.ix_(perm, perm)]
    nr = int(sum(reduced.block_sizes[j] for j in red))
    n = T.shape[0]
    P1 = np.zeros((n, n))
    P2 = np.zeros((n, n))
    P1[:nr] = np.linalg.solve(Tp[:nr, :nr], Tp[:nr])
    P2[nr:] = np.linalg.solve(Tp[nr:, nr:], Tp[nr:])
    return P1, P2, Tp


@dataclass
class NormalityReport:
    block_asymmetry: float     # ||S_{j,j-1} - S_{j-1,j}^*||_2 at the probe pair
    eig_sv_gap: float          # || |lambda| - sigma ||_inf, moduli sorted
    kappa_rho: float           # rho(S) rho(S^{-1})
    kappa_2: float             # sigma_max / sigma_min
    ratio_minus_one: float     # kappa_2 / kappa_rho - 1


def normality_report(S, block_offsets, probe_pair, weights=None):
    """Three normality measures of a dense preconditioned interface system.

    probe_pair: (j, j-1) interface indices for the block-asymmetry measure.
    weights: per-interface similarity weights (square roots of quadrature
    weights) applied as blockdiag(diag(w)) ... blockdiag(diag(w))^{-1} before
    measuring; spectral discretizations need this, stencils do not.
    """
    S = np.array(S, dtype=float)
    offsets = np.asarray(block_offsets)
    if weights is not None:
        w = np.concatenate([weights] * (len(offsets) - 1))
        S = S * w[:, None] / w[None, :]
    j, jj = probe_pair
    blk = lambda a, b: S[offsets[a] : offsets[a + 1], offsets[b] : offsets[b + 1]]
    # solution blocks are the negated off-diagonals; signs cancel in the diff
    asym = np.linalg.norm(blk(j, jj) - blk(jj, j).T, 2)

    lam = np.linalg.eigvals(S)
    sv = np.linalg.svd(S, compute_uv=False)
    moduli = np.sort(np.abs(lam))[::-1]
    eig_sv_gap = float(np.max(np.abs(moduli - sv)))
    kappa_rho = float(moduli[0] / moduli[-1])
    kappa_2 = float(sv[0] / sv[-1])
    return NormalityReport(
        block_asymmetry=float(asym),
        eig_sv_gap=eig_sv_gap,
        kappa_rho=kappa_rho,
        kappa_2=kappa_2,
        ratio_minus_one=kappa_2 / kappa_rho - 1.0,
    )


def spectrum(M):
    """Full eigenvalue set of a dense matrix (complex)."""
    return np.linalg.eigvals(np.asarray(M))


def fit_loglog_slope(x, y):
    """Least-squares slope of log(y) against log(x)."""
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


# ------------------------------------------------------------- rank studies

@dataclass
class RankStudy:
    """Far-field numerical ranks per cluster level and admissibility."""

    levels: Tuple[int, ...]
    admissibility: str
    tol: float
    ranks: Dict[int, List[int]]   # level -> per-cluster ranks

    def max_rank(self, level):
        return max(self.ranks[level])


def cluster_far_field(tree, node_id, admissibility):
    """Index set of the far field of one cluster at its own level."""
    node = tree.nodes[node_id]
    level = node.level
    peers = [i for i in tree.level_nodes(level) if i != node_id]
    if admissibility == "weak":
        far = peers
    elif admissibility == "strong":
        far = [i for i in peers if not _boxes_touch(tree.nodes[i], node)]
    else:
        raise ValueError(f"unknown admissibility {admissibility!r}")
    if not far:
        return np.array([], dtype=int)
    return np.concatenate([tree.nodes[i].indices for i in far])


def _boxes_touch(a, b, tol=1e-9):
    """Neighbor rule: clusters touch when their boxes share at least a point."""
    gap = np.maximum(a.box_lo - b.box_hi, b.box_lo - a.box_hi)
    return bool(np.all(gap <= tol))


def rank_study(M, tree, levels, admissibility="weak", tol=1e-5):
    """Numerical ranks of cluster-to-far-field blocks of a dense matrix.

    Ranks count singular values above `tol` (absolute, matching how the
    interface blocks are measured; the preconditioned blocks are O(1)).
    """
    M = np.asarray(M)
    ranks: Dict[int, List[int]] = {}
    for level in levels:
        per_cluster = []
        for node_id in tree.level_nodes(level):
            idx = tree.nodes[node_id].indices
            far = cluster_far_field(tree, node_id, admissibility)
            if len(far) == 0:
                per_cluster.append(0)
                continue
            sv = np.linalg.svd(M[np.ix_(idx, far)], compute_uv=False)
            per_cluster.append(int(np.sum(sv > tol)))
        ranks[level] = per_cluster
    return RankStudy(
        levels=tuple(levels), admissibility=admissibility, tol=tol, ranks=ranks
    )
