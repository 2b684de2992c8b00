import numpy as np
import pytest

from slabsolve.hbs import HbsMatrix, build_tree, compress, default_alpha


def make_oracles(A):
    return (lambda X: A @ X), (lambda X: A.T @ X)


def compress_dense(A, k, tree, seed=0):
    mv, amv = make_oracles(A)
    return compress(mv, amv, k, tree, seed=seed)


# ------------------------------------------------------------------ the tree

def test_binary_tree_8_points_leaf_2():
    pts = np.arange(8.0)
    tree = build_tree(pts, arity=2, leaf_size=2)
    assert tree.n_levels == 3
    leaves = tree.leaves
    assert len(leaves) == 4
    assert all(tree.nodes[i].size == 2 for i in leaves)


def test_quad_tree_level_grid():
    # 16x16 cells at p=4 -> 1024 interface points; with 16-point leaves the
    # level-4 clusters form an 8x8 square grid
    g = (np.arange(32) + 0.5) / 32
    xx, yy = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    tree = build_tree(pts, arity=4, leaf_size=16)
    assert tree.n_levels == 4
    level4 = tree.level_nodes(4)
    assert len(level4) == 64
    assert all(tree.nodes[i].size == 16 for i in level4)
    assert len(tree.leaves) == 64


def test_single_node_tree_when_small():
    tree = build_tree(np.arange(5.0), arity=2, leaf_size=8)
    assert len(tree.nodes) == 1
    assert tree.nodes[0].is_leaf


def test_tree_partitions_indices():
    rng = np.random.default_rng(0)
    pts = rng.uniform(size=(37, 2))
    tree = build_tree(pts, arity=2, leaf_size=5)
    got = np.sort(np.concatenate([tree.nodes[i].indices for i in tree.leaves]))
    np.testing.assert_array_equal(got, np.arange(37))
    for node in tree.nodes:
        if not node.is_leaf:
            kids = np.sort(
                np.concatenate([tree.nodes[c].indices for c in node.children])
            )
            np.testing.assert_array_equal(kids, np.sort(node.indices))


# ------------------------------------------------------------- compression

def test_identity_compresses_exactly():
    n = 64
    tree = build_tree(np.arange(float(n)), arity=2, leaf_size=16)
    H = compress_dense(np.eye(n), k=5, tree=tree)
    x = np.random.default_rng(1).standard_normal(n)
    np.testing.assert_allclose(H.matvec(x), x, atol=1e-11)
    # off-diagonal couplings vanish: identity block is purely diagonal
    direct = H.to_dense()
    np.testing.assert_allclose(direct, np.eye(n), atol=1e-11)


def test_rank_one_matrix_exact():
    n = 48
    rng = np.random.default_rng(2)
    u = rng.standard_normal(n)
    v = rng.standard_normal(n)
    A = np.outer(u, v)
    tree = build_tree(np.arange(float(n)), arity=2, leaf_size=12)
    H = compress_dense(A, k=4, tree=tree)
    x = rng.standard_normal(n)
    err = np.linalg.norm(H.matvec(x) - A @ x) / np.linalg.norm(A @ x)
    assert err < 1e-10


def test_dense_fallback_single_node():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((10, 10))
    tree = build_tree(np.arange(10.0), arity=2, leaf_size=16)
    H = compress_dense(A, k=7, tree=tree)
    np.testing.assert_allclose(H.to_dense(), A, atol=1e-10)
    assert H.storage_report()["compression_rate"] == pytest.approx(1.0)


def test_smooth_kernel_weak_admissibility():
    # exp(-|x-y|^2) between two separated segments: off-diagonal blocks have
    # tiny numerical rank, so moderate k reproduces the dense action
    n = 128
    x = np.linspace(0.0, 1.0, n)
    y = x + 2.0
    A = np.exp(-((x[:, None] - y[None, :]) ** 2))
    tree = build_tree(x, arity=2, leaf_size=32)
    H = compress_dense(A, k=12, tree=tree)
    rng = np.random.default_rng(4)
    X = rng.standard_normal((n, 8))
    err = np.linalg.norm(H.matvec(X) - A @ X) / np.linalg.norm(A @ X)
    assert err < 1e-8


def test_adjoint_consistency():
    n = 96
    rng = np.random.default_rng(5)
    A = np.exp(-np.abs(np.subtract.outer(np.arange(n), np.arange(n))) / 9.0)
    tree = build_tree(np.arange(float(n)), arity=2, leaf_size=24)
    H = compress_dense(A, k=10, tree=tree)
    for _ in range(5):
        x = rng.standard_normal(n)
        y = rng.standard_normal(n)
        lhs = np.dot(H.matvec(x), y)
        rhs = np.dot(x, H.adjoint_matvec(y))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_adjoint_matches_dense_transpose():
    n = 80
    rng = np.random.default_rng(6)
    A = np.exp(-np.abs(np.subtract.outer(np.arange(n), np.arange(n))) / 7.0)
    A += 0.1 * rng.standard_normal((n, n)) * (np.abs(np.subtract.outer(np.arange(n), np.arange(n))) < 2)
    tree = build_tree(np.arange(float(n)), arity=2, leaf_size=20)
    H = compress_dense(A, k=14, tree=tree)
    X = rng.standard_normal((n, 4))
    err = np.linalg.norm(H.adjoint_matvec(X) - A.T @ X) / np.linalg.norm(A.T @ X)
    assert err < 1e-8


def test_matvec_linearity():
    n = 64
    rng = np.random.default_rng(7)
    A = np.exp(-np.abs(np.subtract.outer(np.arange(n), np.arange(n))) / 5.0)
    tree = build_tree(np.arange(float(n)), arity=2, leaf_size=16)
    H = compress_dense(A, k=8, tree=tree)
    x = rng.standard_normal(n)
    z = rng.standard_normal(n)
    lhs = H.matvec(2.5 * x - 1.5 * z)
    rhs = 2.5 * H.matvec(x) - 1.5 * H.matvec(z)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * np.abs(rhs).max())


def test_determinism_same_seed():
    n = 64
    A = np.exp(-np.abs(np.subtract.outer(np.arange(n), np.arange(n))) / 5.0)
    tree = build_tree(np.arange(float(n)), arity=2, leaf_size=16)
    H1 = compress_dense(A, k=8, tree=tree, seed=42)
    H2 = compress_dense(A, k=8, tree=tree, seed=42)
    for i in H1.leaf_D:
        np.testing.assert_array_equal(H1.leaf_D[i], H2.leaf_D[i])
    for i in H1.B:
        np.testing.assert_array_equal(H1.B[i], H2.B[i])
    for i in H1.U:
        np.testing.assert_array_equal(H1.U[i], H2.U[i])
        np.testing.assert_array_equal(H1.V[i], H2.V[i])


def test_uses_exactly_s_applications_each_way():
    n = 64
    A = np.eye(n)
    counts = {"mv": 0, "amv": 0}

    def mv(X):
        counts["mv"] += X.shape[1]
        return A @ X

    def amv(X):
        counts["amv"] += X.shape[1]
        return A.T @ X

    k = 6
    tree = build_tree(np.arange(float(n)), arity=2, leaf_size=16)
    compress(mv, amv, k, tree, seed=0)
    s = default_alpha(2) * k + 10
    assert counts["mv"] == s
    assert counts["amv"] == s


def test_oracle_shape_mismatch_raises():
    n = 32
    tree = build_tree(np.arange(float(n)), arity=2, leaf_size=8)
    with pytest.raises(ValueError, match="shape"):
        compress(lambda X: X[:-1], lambda X: X, 3, tree)


def test_k_too_large_for_leaf():
    n = 32
    tree = build_tree(np.arange(float(n)), arity=2, leaf_size=8)
    with pytest.raises(ValueError, match="leaf"):
        compress(lambda X: X, lambda X: X, 10, tree)


# ---------------------------------------------------------------- storage

def test_storage_linear_in_n_at_fixed_k():
    k = 6
    rates = []
    for n in [128, 256, 512]:
        tree = build_tree(np.arange(float(n)), arity=2, leaf_size=2 * k)
        A = np.exp(-np.abs(np.subtract.outer(np.arange(n), np.arange(n))) / 5.0)
        H = compress_dense(A, k=k, tree=tree)
        rates.append(H.storage_report()["compression_rate"])
    # rate ~ k/n: halves (roughly) with each doubling
    assert rates[1] < 0.65 * rates[0]
    assert rates[2] < 0.65 * rates[1]


def test_storage_roughly_linear_in_k_at_fixed_n():
    n = 512
    stored = []
    for k in [4, 8, 16]:
        tree = build_tree(np.arange(float(n)), arity=2, leaf_size=2 * k)
        A = np.exp(-np.abs(np.subtract.outer(np.arange(n), np.arange(n))) / 5.0)
        H = compress_dense(A, k=k, tree=tree)
        stored.append(H.storage_report()["stored_reals"])
    g1 = stored[1] / stored[0]
    g2 = stored[2] / stored[1]
    assert 1.5 < g1 < 2.6
    assert 1.5 < g2 < 2.6


def test_quadtree_compression_on_separated_plane_kernel():
    # source and target planes a fixed distance apart (the solution-operator
    # geometry): the kernel is smooth on the whole product domain
    g = (np.arange(16) + 0.5) / 16
    xx, yy = np.meshgrid(g, g, indexing="ij")
    src = np.column_stack([xx.ravel(), yy.ravel()])
    d2 = ((src[:, None, :] - src[None, :, :]) ** 2).sum(-1) + 2.0**2
    A = 1.0 / d2
    tree = build_tree(src, arity=4, leaf_size=48)
    H = compress_dense(A, k=12, tree=tree)
    rng = np.random.default_rng(8)
    X = rng.standard_normal((256, 4))
    err = np.linalg.norm(H.matvec(X) - A @ X) / np.linalg.norm(A @ X)
    assert err < 1e-6
    assert H.storage_report()["compression_rate"] < 0.8
