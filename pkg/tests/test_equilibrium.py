import numpy as np
import pytest

from slabsolve.analysis import schur_reduce
from slabsolve.equilibrium import (
    HbsConfig,
    build_operator,
    interface_values,
    reconstruct_interior,
)
from slabsolve.fd import assemble_fd
from slabsolve.hps import assemble_hps
from slabsolve.problem import (
    BoundaryData,
    harmonic_reference,
    make_helmholtz,
    make_variable_coefficient_2d,
    manufactured_sine,
    random_smooth_dirichlet,
)
from slabsolve.slabs import decompose
from slabsolve.sparse import factorize
from slabsolve.system import build_rhs, collocation_rhs, dirichlet_values, full_vector


def global_solve(system, op, data):
    fact = factorize(system)
    u_i = fact.solve(build_rhs(op, data, system))
    return full_vector(system, u_i, dirichlet_values(data, system))


def interface_lists(system, decomp):
    return [
        system.interface_nodes(decomp.interface_coord(j))
        for j in range(decomp.n_interfaces)
    ]


def test_pseudo_1d_block_is_half():
    h = 0.25
    op = make_helmholtz(0.0, dim=1)
    d = decompose((1.0,), 3, "open")
    S, load, _ = build_operator(d, op, BoundaryData.zero(), {"backend": "fd", "h": h})
    np.testing.assert_allclose(S.blocks[(1, 0)].dense, [[0.5]], atol=1e-12)
    np.testing.assert_allclose(S.blocks[(1, 2)].dense, [[0.5]], atol=1e-12)


def test_2d_fd_blocks_satisfy_maximum_principle():
    op = make_helmholtz(0.0, dim=2)
    d = decompose((1.0, 1.0), 3, "open")
    S, _, _ = build_operator(d, op, BoundaryData.zero(), {"backend": "fd", "h": 1 / 16})
    for (j, jj), blk in S.blocks.items():
        assert np.all(blk.dense >= -1e-13)
    row_sums = S.blocks[(1, 0)].dense.sum(axis=1) + S.blocks[(1, 2)].dense.sum(axis=1)
    assert np.all(row_sums <= 1.0 + 1e-12)


def test_block_layout_four_interfaces():
    op = make_helmholtz(0.0, dim=2)
    d = decompose((1.0, 1.0), 4, "open")
    S, _, _ = build_operator(d, op, BoundaryData.zero(), {"backend": "fd", "h": 1 / 10})
    expect = {(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)}
    assert set(S.blocks) == expect


def test_periodic_block_layout_has_corners():
    op = make_helmholtz(0.0, dim=2)
    d = decompose((1.0, 1.0), 4, "periodic")
    S, _, _ = build_operator(d, op, BoundaryData.zero(), {"backend": "fd", "h": 1 / 16})
    assert (0, 3) in S.blocks and (3, 0) in S.blocks
    assert len(S.blocks) == 8


def test_zero_data_zero_load():
    op = make_helmholtz(0.0, dim=2)
    d = decompose((1.0, 1.0), 3, "open")
    _, load, _ = build_operator(d, op, BoundaryData.zero(), {"backend": "fd", "h": 1 / 8})
    np.testing.assert_allclose(load.vector, 0.0)


def test_single_interface_is_identity_and_direct():
    op = make_helmholtz(0.0, dim=2)
    ref, data = harmonic_reference()
    d = decompose((1.0, 1.0), 1, "open")
    h = 1 / 8
    S, load, _ = build_operator(d, op, data, {"backend": "fd", "h": h})
    assert len(S.blocks) == 0
    g = assemble_fd(op, [(0.0, 1.0), (0.0, 1.0)], h)
    u = global_solve(g, op, data)
    u_gamma = interface_values(g, d, u)
    np.testing.assert_allclose(load.vector, u_gamma, atol=1e-11)


def test_apply_zero_and_dense_assembly():
    op = make_helmholtz(0.0, dim=2)
    d = decompose((1.0, 1.0), 3, "open")
    S, _, _ = build_operator(d, op, BoundaryData.zero(), {"backend": "fd", "h": 1 / 12})
    assert np.allclose(S.apply(np.zeros(S.n)), 0.0)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(S.n)
    np.testing.assert_allclose(S.apply(x), S.to_dense() @ x, atol=1e-12)


# ------------------------------------------------------- the oracle tie-in

@pytest.mark.parametrize("make_op", [
    lambda: make_helmholtz(0.0, dim=2),
    make_variable_coefficient_2d,
])
def test_oracle_equivalence_fd(make_op):
    # locally built dense solution blocks equal -T_jj^{-1} T_{j,jj} computed
    # from the global Schur complement
    op = make_op()
    d = decompose((1.0, 1.0), 3, "open")
    h = 1 / 24
    S, _, _ = build_operator(d, op, BoundaryData.zero(), {"backend": "fd", "h": h})
    g = assemble_fd(op, [(0.0, 1.0), (0.0, 1.0)], h)
    red = schur_reduce(g, interface_lists(g, d))
    for (j, jj), blk in S.blocks.items():
        oracle = red.s_solution_block(j, jj)
        err = np.linalg.norm(blk.dense - oracle) / np.linalg.norm(oracle)
        assert err < 1e-10


def test_oracle_equivalence_hps():
    op = make_helmholtz(0.0, dim=2)
    d = decompose((1.0, 1.0), 3, "open")
    disc = {"backend": "hps", "cell": 1 / 8, "p": 8}
    S, _, _ = build_operator(d, op, BoundaryData.zero(), disc)
    g = assemble_hps(op, [(0.0, 1.0), (0.0, 1.0)], (8, 8), 8)
    red = schur_reduce(g, interface_lists(g, d))
    for (j, jj), blk in S.blocks.items():
        oracle = red.s_solution_block(j, jj)
        err = np.linalg.norm(blk.dense - oracle) / np.linalg.norm(oracle)
        assert err < 1e-10


@pytest.mark.parametrize("backend", ["fd", "hps"])
def test_consistency_global_trace_solves_interface_system(backend):
    # the global solution's interface trace satisfies the equilibrium system
    op = make_helmholtz(0.0, dim=2)
    data = random_smooth_dirichlet(3)
    d = decompose((1.0, 1.0), 3, "open")
    if backend == "fd":
        disc = {"backend": "fd", "h": 1 / 16}
        g = assemble_fd(op, [(0.0, 1.0), (0.0, 1.0)], 1 / 16)
    else:
        disc = {"backend": "hps", "cell": 1 / 8, "p": 6}
        g = assemble_hps(op, [(0.0, 1.0), (0.0, 1.0)], (8, 8), 6)
    S, load, _ = build_operator(d, op, data, disc)
    u = global_solve(g, op, data)
    u_gamma = interface_values(g, d, u)
    resid = S.apply(u_gamma) - load.vector
    assert np.linalg.norm(resid) / np.linalg.norm(load.vector) < 1e-9


def test_equivalent_load_matches_preconditioned_schur_load():
    op = make_helmholtz(0.0, dim=2)
    data = random_smooth_dirichlet(4)
    d = decompose((1.0, 1.0), 3, "open")
    h = 1 / 16
    S, load, _ = build_operator(d, op, data, {"backend": "fd", "h": h})
    g = assemble_fd(op, [(0.0, 1.0), (0.0, 1.0)], h)
    red = schur_reduce(g, interface_lists(g, d), rhs=collocation_rhs(op, data, g))
    np.testing.assert_allclose(load.vector, red.h_prec, atol=1e-10)


def test_hbs_mode_agrees_with_dense_mode():
    op = make_helmholtz(0.0, dim=2)
    d = decompose((1.0, 1.0), 3, "open")
    disc = {"backend": "fd", "h": 1 / 32}
    S_dense, _, _ = build_operator(d, op, BoundaryData.zero(), disc)
    cfg = HbsConfig(k=12, arity=2, seed=5)
    S_hbs, _, _ = build_operator(d, op, BoundaryData.zero(), disc, hbs_config=cfg)
    rng = np.random.default_rng(1)
    x = rng.standard_normal(S_dense.n)
    y1 = S_dense.apply(x)
    y2 = S_hbs.apply(x)
    assert np.linalg.norm(y1 - y2) / np.linalg.norm(y1) < 1e-6
    probe_errs = [b.probe_error for b in S_hbs.blocks.values()]
    assert max(probe_errs) < 1e-6


def test_probe_tolerance_enforced():
    from slabsolve.equilibrium import BlockVerificationError

    op = make_helmholtz(0.0, dim=2)
    d = decompose((1.0, 1.0), 3, "open")
    with pytest.raises(BlockVerificationError):
        build_operator(
            d, op, BoundaryData.zero(), {"backend": "fd", "h": 1 / 32},
            hbs_config=HbsConfig(k=3, arity=2, seed=0), probe_tol=1e-14,
        )


# ---------------------------------------------------------- reconstruction

def test_reconstruction_matches_global_solve():
    op = make_helmholtz(0.0, dim=2)
    data = random_smooth_dirichlet(5)
    d = decompose((1.0, 1.0), 3, "open")
    h = 1 / 16
    disc = {"backend": "fd", "h": h}
    g = assemble_fd(op, [(0.0, 1.0), (0.0, 1.0)], h)
    u = global_solve(g, op, data)
    u_gamma = interface_values(g, d, u)
    S, load, _ = build_operator(d, op, data, disc)
    pts, vals = reconstruct_interior(d, op, data, u_gamma, S.index, disc)
    # compare on matched points
    order_a = np.lexsort((pts[:, 1], pts[:, 0]))
    order_b = np.lexsort((g.points[:, 1], g.points[:, 0]))
    np.testing.assert_allclose(pts[order_a], g.points[order_b], atol=1e-12)
    assert np.max(np.abs(vals[order_a] - u[order_b])) < 1e-10


def test_reconstruction_zero_everything_is_zero():
    op = make_helmholtz(0.0, dim=2)
    d = decompose((1.0, 1.0), 2, "open")
    disc = {"backend": "fd", "h": 1 / 12}
    S, load, _ = build_operator(d, op, BoundaryData.zero(), disc)
    pts, vals = reconstruct_interior(
        d, op, BoundaryData.zero(), np.zeros(S.n), S.index, disc
    )
    np.testing.assert_allclose(vals, 0.0)


def test_end_to_end_manufactured_convergence():
    # solve the interface system directly (tiny), reconstruct, check O(h^2)
    op = make_helmholtz(0.0, dim=2)
    ref, data = manufactured_sine(dim=2)
    d = decompose((1.0, 1.0), 3, "open")
    errs = []
    for h in [1 / 8, 1 / 16, 1 / 32]:
        disc = {"backend": "fd", "h": h}
        S, load, _ = build_operator(d, op, data, disc)
        u_gamma = np.linalg.solve(S.to_dense(), load.vector)
        pts, vals = reconstruct_interior(d, op, data, u_gamma, S.index, disc)
        errs.append(np.max(np.abs(vals - ref.values(pts))))
    rate = np.log2(errs[1] / errs[2])
    assert 1.7 < rate < 2.3


def test_periodic_consistency():
    op = make_helmholtz(0.0, dim=2)
    d = decompose((1.0, 1.0), 4, "periodic")
    h = 1 / 16

    def load_fn(points):
        return np.sin(2 * np.pi * points[:, 0]) + np.cos(2 * np.pi * points[:, 1])

    data = BoundaryData.from_functions(g=load_fn)
    g = assemble_fd(op, [(0.0, 1.0), (0.0, 1.0)], h, periodic_axes=(0,))
    u = global_solve(g, op, data)
    u_gamma = interface_values(g, d, u)
    S, load, _ = build_operator(d, op, data, {"backend": "fd", "h": h})
    resid = S.apply(u_gamma) - load.vector
    assert np.linalg.norm(resid) / max(np.linalg.norm(load.vector), 1e-30) < 1e-9
