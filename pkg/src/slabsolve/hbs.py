"""Hierarchically block separable matrices built from randomized samples.

A matrix is compressed from its action on random blocks only: with s test
vectors per side, every cluster's off-diagonal column (row) basis is exposed by
multiplying its sample block with a nullspace basis of its own test block,
which cancels the self-interaction. The recoverable part of each diagonal
block is solved for directly; the part with rows in the column basis and
columns in the row basis cannot be told apart from long-range coupling at this
level, so it is passed upward through reduced samples and lands in the parent
coupling blocks. The top block is recovered densely.

Weak admissibility throughout: every off-diagonal block of the cluster
partition is treated as low rank.
"""

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.linalg as sla


@dataclass
class TreeNode:
    level: int                      # root has level 1
    indices: np.ndarray             # original DOF indices owned by the node
    children: List[int] = field(default_factory=list)
    box_lo: Optional[np.ndarray] = None
    box_hi: Optional[np.ndarray] = None

    @property
    def is_leaf(self):
        return not self.children

    @property
    def size(self):
        return len(self.indices)


@dataclass
class ClusterTree:
    nodes: List[TreeNode]
    arity: int
    leaf_size: int
    n: int

    @property
    def n_levels(self):
        return max(node.level for node in self.nodes)

    def level_nodes(self, level):
        return [i for i, node in enumerate(self.nodes) if node.level == level]

    @property
    def leaves(self):
        return [i for i, node in enumerate(self.nodes) if node.is_leaf]

    @property
    def root(self):
        return 0


def build_tree(points, arity=2, leaf_size=32):
    """Balanced spatial bisection tree over interface points.

    Splits at the coordinate median (count-balanced) of the longest box axis
    (binary) or of the first two axes (quad) while a cluster holds more than
    leaf_size points. A point set smaller than leaf_size yields a single-node
    tree, which compresses densely.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if arity not in (2, 4):
        raise ValueError("arity must be 2 (binary) or 4 (quad)")
    if arity == 4 and points.shape[1] < 2:
        raise ValueError("quad trees need at least 2 coordinates per point")
    nodes: List[TreeNode] = []

    def add_node(idx, level, box_lo, box_hi):
        node = TreeNode(level=level, indices=idx, box_lo=box_lo, box_hi=box_hi)
        nodes.append(node)
        me = len(nodes) - 1
        if len(idx) > leaf_size:
            for part, lo, hi in _split(points, idx, arity, box_lo, box_hi):
                nodes[me].children.append(add_node(part, level + 1, lo, hi))
        return me

    add_node(np.arange(n), 1, points.min(axis=0), points.max(axis=0))
    return ClusterTree(nodes=nodes, arity=arity, leaf_size=leaf_size, n=n)


def _split(points, idx, arity, box_lo, box_hi):
    """Count-balanced median split; children carry subdivision boxes whose
    shared face sits at the cut (so touching clusters are detectable even for
    discrete point sets)."""

    def halves(sub, axis, lo, hi):
        order = np.argsort(points[sub, axis], kind="stable")
        half = len(sub) // 2
        a, b = sub[order[:half]], sub[order[half:]]
        cut = 0.5 * (points[a, axis].max() + points[b, axis].min())
        lo_a, hi_a = lo.copy(), hi.copy()
        lo_b, hi_b = lo.copy(), hi.copy()
        hi_a[axis] = cut
        lo_b[axis] = cut
        return (a, lo_a, hi_a), (b, lo_b, hi_b)

    if arity == 2:
        axis = int(np.argmax(box_hi - box_lo))
        return halves(idx, axis, box_lo, box_hi)
    (a0, lo0, hi0), (a1, lo1, hi1) = halves(idx, 0, box_lo, box_hi)
    return halves(a0, 1, lo0, hi0) + halves(a1, 1, lo1, hi1)


def default_alpha(arity):
    """Oversampling multiplier: 3 for binary trees, 5 for quadtrees."""
    return 3 if arity == 2 else 5


class HbsMatrix:
    """Compressed square matrix over a cluster tree (shared index clustering
    for sources and targets)."""

    def __init__(self, tree, k, s, leaf_D, U, V, B, dense=None):
        self.tree = tree
        self.k = k
        self.s = s
        self.leaf_D = leaf_D      # leaf id -> (m, m)
        self.U = U                # non-root node id -> column basis
        self.V = V                # non-root node id -> row basis
        self.B = B                # internal node id -> children coupling block
        self.dense = dense        # single-node trees only

    @property
    def shape(self):
        return (self.tree.n, self.tree.n)

    def matvec(self, x):
        return self._apply(x, adjoint=False)

    def adjoint_matvec(self, x):
        return self._apply(x, adjoint=True)

    def _apply(self, x, adjoint):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if x.shape[0] != self.tree.n:
            raise ValueError(f"length {x.shape[0]} != {self.tree.n}")
        X = x[:, None] if single else x
        if self.dense is not None:
            out = (self.dense.T if adjoint else self.dense) @ X
            return out[:, 0] if single else out

        up = self.V if not adjoint else self.U
        down = self.U if not adjoint else self.V
        nodes = self.tree.nodes
        order = sorted(range(len(nodes)), key=lambda i: -nodes[i].level)

        q: Dict[int, np.ndarray] = {}
        for i in order:
            node = nodes[i]
            if node.is_leaf:
                q[i] = up[i].T @ X[node.indices] if i in up else None
            else:
                stack = np.vstack([q[c] for c in node.children])
                q[i] = up[i].T @ stack if i in up else stack
        r: Dict[int, np.ndarray] = {}
        Y = np.zeros_like(X)
        for i in reversed(order):
            node = nodes[i]
            if node.is_leaf:
                continue
            stack = np.vstack([q[c] for c in node.children])
            block = self.B[i].T if adjoint else self.B[i]
            t = block @ stack
            if i in r:
                t += down[i] @ r[i]
            offset = 0
            for c in node.children:
                chunk = t[offset : offset + q[c].shape[0]]
                offset += q[c].shape[0]
                r[c] = chunk
        for i in order:
            node = nodes[i]
            if not node.is_leaf:
                continue
            D = self.leaf_D[i].T if adjoint else self.leaf_D[i]
            Y[node.indices] = D @ X[node.indices]
            if i in r:
                Y[node.indices] += down[i] @ r[i]
        return Y[:, 0] if single else Y

    def storage_report(self):
        """Stored real count and its ratio to the dense equivalent."""
        stored = 0
        if self.dense is not None:
            stored = self.dense.size
        else:
            stored += sum(D.size for D in self.leaf_D.values())
            stored += sum(M.size for M in self.U.values())
            stored += sum(M.size for M in self.V.values())
            stored += sum(M.size for M in self.B.values())
        n = self.tree.n
        return {"stored_reals": int(stored), "compression_rate": stored / float(n * n)}

    def to_dense(self):
        return self.matvec(np.eye(self.tree.n))


def compress(matvec, adjoint_matvec, k, tree, seed=0, alpha=None):
    """Build a rank-k HBS representation from 2s black-box sample products.

    matvec/adjoint_matvec act on (n, s) blocks; each is called exactly once.
    Deterministic for a fixed seed.
    """
    if alpha is None:
        alpha = default_alpha(tree.arity)
    n = tree.n
    s = alpha * k + 10
    _validate(tree, k, s)
    rng = np.random.default_rng(seed)
    Omega = rng.standard_normal((n, s))
    Psi = rng.standard_normal((n, s))
    Y = np.asarray(matvec(Omega), dtype=float)
    Z = np.asarray(adjoint_matvec(Psi), dtype=float)
    if Y.shape != (n, s) or Z.shape != (n, s):
        raise ValueError("oracle returned a block of the wrong shape")
    return hbs_from_samples(Omega, Psi, Y, Z, k, tree)


def hbs_from_samples(Omega, Psi, Y, Z, k, tree):
    """Assemble the factors from precomputed samples (the post-processing
    stage; linear in n for a fixed rank)."""
    n = tree.n
    s = Omega.shape[1]
    _validate(tree, k, s)
    nodes = tree.nodes
    if len(nodes) == 1:
        dense = _right_solve(Y, Omega)
        return HbsMatrix(tree, k, s, {}, {}, {}, {}, dense=dense)

    leaf_D: Dict[int, np.ndarray] = {}
    U: Dict[int, np.ndarray] = {}
    V: Dict[int, np.ndarray] = {}
    B: Dict[int, np.ndarray] = {}
    work: Dict[int, tuple] = {}

    for level in range(tree.n_levels, 0, -1):
        for i in tree.level_nodes(level):
            node = nodes[i]
            if node.is_leaf:
                Oc, Pc = Omega[node.indices], Psi[node.indices]
                Yc, Zc = Y[node.indices], Z[node.indices]
            else:
                Oc = np.vstack([work[c][0] for c in node.children])
                Pc = np.vstack([work[c][1] for c in node.children])
                Yc = np.vstack([work[c][2] for c in node.children])
                Zc = np.vstack([work[c][3] for c in node.children])
                for c in node.children:
                    del work[c]
            if level == 1:
                B[i] = _right_solve(Yc, Oc)
                continue
            Ui, Vi, Di = _process_cluster(Oc, Pc, Yc, Zc, k)
            U[i], V[i] = Ui, Vi
            if node.is_leaf:
                leaf_D[i] = Di
            else:
                B[i] = Di
            work[i] = (
                Vi.T @ Oc,
                Ui.T @ Pc,
                Ui.T @ (Yc - Di @ Oc),
                Vi.T @ (Zc - Di.T @ Pc),
            )
    return HbsMatrix(tree, k, s, leaf_D, U, V, B)


def _process_cluster(Oc, Pc, Yc, Zc, k):
    """Bases and recoverable diagonal part of one cluster from its samples."""
    P_null = sla.null_space(Oc)
    U = _cpqr_basis(Yc @ P_null, k)
    Q_null = sla.null_space(Pc)
    V = _cpqr_basis(Zc @ Q_null, k)
    # rows of the diagonal block orthogonal to U are fully determined ...
    D = Yc - U @ (U.T @ Yc)
    D = _right_solve(D, Oc)
    # ... and the U-rows are determined up to their V-core, which moves upward
    R = Zc - D.T @ Pc
    R -= V @ (V.T @ R)
    W = _right_solve(R, U.T @ Pc)
    return U, V, D + U @ W.T


def _cpqr_basis(M, k):
    Q, _, _ = sla.qr(M, mode="economic", pivoting=True)
    if Q.shape[1] < k:
        pad = np.zeros((Q.shape[0], k - Q.shape[1]))
        Q = np.hstack([Q, pad])
    return Q[:, :k]


def _right_solve(X, M):
    """X @ pinv(M) for a full-row-rank wide M."""
    G = M @ M.T
    return sla.solve(G, (X @ M.T).T, assume_a="pos").T


def _validate(tree, k, s):
    if k < 1:
        raise ValueError("rank k must be positive")
    for i in tree.leaves:
        m = tree.nodes[i].size
        if len(tree.nodes) == 1:
            if s < m + 2:
                raise ValueError(
                    f"dense fallback needs s >= n + 2 samples (n={m}, s={s}); "
                    "increase k or shrink the leaf"
                )
        elif m < k or s - m < k:
            raise ValueError(
                f"leaf of size {m} cannot carry rank k={k} with s={s} samples"
            )
    a = tree.arity
    if len(tree.nodes) > 1 and s < a * k + k:
        raise ValueError(f"s={s} too small for arity {a} at rank {k}")


def compress_timed(matvec, adjoint_matvec, k, tree, seed=0, alpha=None):
    """compress() variant reporting sampling and post-processing times."""
    if alpha is None:
        alpha = default_alpha(tree.arity)
    n = tree.n
    s = alpha * k + 10
    _validate(tree, k, s)
    rng = np.random.default_rng(seed)
    Omega = rng.standard_normal((n, s))
    Psi = rng.standard_normal((n, s))
    t0 = time.perf_counter()
    Y = np.asarray(matvec(Omega), dtype=float)
    Z = np.asarray(adjoint_matvec(Psi), dtype=float)
    t_sample = time.perf_counter() - t0
    if Y.shape != (n, s) or Z.shape != (n, s):
        raise ValueError("oracle returned a block of the wrong shape")
    t0 = time.perf_counter()
    H = hbs_from_samples(Omega, Psi, Y, Z, k, tree)
    t_post = time.perf_counter() - t0
    return H, t_sample, t_post
