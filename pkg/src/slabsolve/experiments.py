"""Experiment presets: conditioning, rank, convergence, and solver studies.

Each runner validates its configuration up front, performs the study at desk
scale, and emits one CSV per sweep (schema-versioned) plus a human-readable
summary. Numeric CSV columns are deterministic for a fixed seed; t_* columns
hold wall times and are exempt.
"""

import os
import time
from typing import Dict, List

import numpy as np

from slabsolve import analysis
from slabsolve.config import ConfigError, ExperimentConfig
from slabsolve.equilibrium import (
    HbsConfig,
    build_operator,
    interface_values,
    reconstruct_interior,
    slab_system,
)
from slabsolve.fd import assemble_fd
from slabsolve.hbs import build_tree, compress_timed
from slabsolve.hps import assemble_hps, evaluate_on_grid, interface_sqrt_weights
from slabsolve.krylov import gmres
from slabsolve.problem import (
    BoundaryData,
    GaussianBump,
    make_helmholtz,
    make_variable_coefficient_2d,
    make_waveguide,
    point_source_reference,
    random_smooth_dirichlet,
)
from slabsolve.slabs import decompose
from slabsolve.sparse import factorize
from slabsolve.system import build_rhs, dirichlet_values, full_vector

SCHEMA_LINE = "# schema=1"


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path, rows: List[dict], columns=None):
    """Write rows atomically with the schema header comment."""
    if not rows:
        raise ValueError(f"refusing to write empty CSV {path}")
    if columns is None:
        columns = list(rows[0])
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(SCHEMA_LINE + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c, "")) for c in columns) + "\n")
    os.replace(tmp, path)
    return path


def read_csv(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != SCHEMA_LINE:
        raise ValueError(f"{path}: missing '{SCHEMA_LINE}' header")
    columns = lines[1].split(",")
    rows = [dict(zip(columns, ln.split(","))) for ln in lines[2:] if ln]
    return columns, rows


def _problem(cfg: ExperimentConfig):
    preset = cfg.get_str("problem.preset", choices={
        "laplace2d", "vc2d", "vc2d_damped", "helmholtz3d", "waveguide2d",
    })
    kappa = cfg.get_float("problem.kappa", default=0.0)
    seed = cfg.get_int("problem.data_seed", default=1)
    if preset == "laplace2d":
        return make_helmholtz(0.0, dim=2), random_smooth_dirichlet(seed), None
    if preset == "vc2d":
        return make_variable_coefficient_2d(), random_smooth_dirichlet(seed), None
    if preset == "vc2d_damped":
        return (
            make_variable_coefficient_2d(kappa=kappa),
            random_smooth_dirichlet(seed),
            None,
        )
    if preset == "helmholtz3d":
        ref = point_source_reference(kappa)
        data = BoundaryData.from_functions(f=ref.u)
        return make_helmholtz(kappa, dim=3), data, ref
    if preset == "waveguide2d":
        amp = cfg.get_float("problem.bump_amplitude", default=0.9)
        width = cfg.get_float("problem.bump_width", default=0.03)
        bumps = _bump_lattice(amp, width)
        op, data, _ = make_waveguide(kappa, bumps)
        return op, data, None
    return None, None, None


def _bump_lattice(amplitude, width, rows=5, cols=9):
    bumps = []
    ys = np.linspace(0.2, 0.8, rows)
    xs = np.linspace(0.1, 0.9, cols)
    for i, y in enumerate(ys):
        if i == rows // 2:
            continue
        for x in xs:
            bumps.append(GaussianBump(center=(x, y), width=width, amplitude=amplitude))
    return bumps


def _global_solve(system, op, data):
    fact = factorize(system)
    u_i = fact.solve(build_rhs(op, data, system))
    return full_vector(system, u_i, dirichlet_values(data, system))


def _interface_lists(system, decomp):
    out = []
    L = decomp.extents[0]
    for j in range(decomp.n_interfaces):
        x = decomp.interface_coord(j)
        if decomp.topology == "periodic" and x >= L - system.coord_tol:
            x -= L
        out.append(system.interface_nodes(x))
    return out


# --------------------------------------------------------------- experiments

def run_smoke(cfg: ExperimentConfig, outdir, threads=1):
    """End-to-end pipeline on a tiny Laplace problem, dense and compressed."""
    n_int = cfg.get_int("decomp.n_interfaces", default=2, minimum=1)
    h = cfg.get_float("disc.h", positive=True)
    k = cfg.get_int("hbs.k", default=20, minimum=1)
    seed = cfg.get_int("hbs.seed", default=0)
    tol = cfg.get_float("gmres.tol", default=1e-12, positive=True)
    max_iter = cfg.get_int("gmres.max_iter", default=400, minimum=1)
    cfg.raise_if_invalid()

    op, data, _ = _problem(cfg)
    cfg.raise_if_invalid()
    d = decompose((1.0, 1.0), n_int)
    disc = {"backend": "fd", "h": h}
    g = assemble_fd(op, [(0.0, 1.0), (0.0, 1.0)], h)
    u_ref = _global_solve(g, op, data)

    rows = []
    for mode in ("dense", "hbs"):
        hbs_cfg = None if mode == "dense" else HbsConfig(k=k, arity=2, seed=seed)
        t0 = time.perf_counter()
        S, load, timers = build_operator(d, op, data, disc, hbs_config=hbs_cfg,
                                         threads=threads)
        u_gamma, rep = gmres(S.apply, load.vector, tol=tol, max_iter=max_iter)
        pts, vals = reconstruct_interior(d, op, data, u_gamma, S.index, disc)
        order_a = np.lexsort((pts[:, 1], pts[:, 0]))
        order_b = np.lexsort((g.points[:, 1], g.points[:, 0]))
        err = np.max(np.abs(vals[order_a] - u_ref[order_b]))
        err /= max(np.max(np.abs(u_ref)), 1e-300)
        probe = max((b.probe_error for b in S.blocks.values()), default=0.0)
        rows.append({
            "mode": mode,
            "N": g.n_dofs,
            "J_Gamma": S.n,
            "n_interfaces": n_int,
            "H": d.H,
            "hbs_k": k if mode == "hbs" else 0,
            "gmres_iters": rep.iterations,
            "residual": rep.achieved,
            "vol_error": float(err),
            "block_probe_error": probe,
            "storage_rate": S.storage_report()["compression_rate"],
            "t_A": timers.t_A,
            "t_YZ": timers.t_YZ,
            "t_HBS": timers.t_HBS,
            "t_total": time.perf_counter() - t0,
        })
    write_csv(os.path.join(outdir, "smoke.csv"), rows)
    return {"smoke": rows}


def run_oracle_equivalence(cfg: ExperimentConfig, outdir, threads=1):
    """Locally built solution blocks against the global Schur complement."""
    h = cfg.get_float("fd.h", default=1 / 32, positive=True)
    n_fd = cfg.get_int("fd.n_interfaces", default=3, minimum=1)
    cell = cfg.get_float("hps.cell", default=1 / 8, positive=True)
    p = cfg.get_int("hps.p", default=8, minimum=4)
    n_hps = cfg.get_int("hps.n_interfaces", default=7, minimum=1)
    cfg.raise_if_invalid()

    rows = []
    cases = [
        ("laplace_fd", make_helmholtz(0.0, dim=2), {"backend": "fd", "h": h}, n_fd),
        ("vc2d_fd", make_variable_coefficient_2d(), {"backend": "fd", "h": h}, n_fd),
        ("laplace_hps", make_helmholtz(0.0, dim=2),
         {"backend": "hps", "cell": cell, "p": p}, n_hps),
    ]
    for label, op, disc, n_int in cases:
        d = decompose((1.0, 1.0), n_int)
        S, _, _ = build_operator(d, op, BoundaryData.zero(), disc, threads=threads)
        if disc["backend"] == "fd":
            g = assemble_fd(op, [(0.0, 1.0), (0.0, 1.0)], disc["h"])
        else:
            t = int(round(1.0 / disc["cell"]))
            g = assemble_hps(op, [(0.0, 1.0), (0.0, 1.0)], (t, t), disc["p"])
        red = analysis.schur_reduce(g, _interface_lists(g, d))
        worst = 0.0
        for (j, jj), blk in S.blocks.items():
            oracle = red.s_solution_block(j, jj)
            err = np.linalg.norm(blk.dense - oracle) / np.linalg.norm(oracle)
            worst = max(worst, float(err))
        rows.append({
            "case": label, "N": g.n_dofs, "J_Gamma": S.n,
            "n_interfaces": n_int, "max_block_error": worst,
        })
    write_csv(os.path.join(outdir, "oracle_equivalence.csv"), rows)
    return {"oracle_equivalence": rows}


def run_gmres_scaling(cfg: ExperimentConfig, outdir, threads=1):
    """Iteration counts against the slab spacing at tolerance H^2 * scale,
    plus the order-invariance check at fixed H."""
    H_values = cfg.get_float_list("sweep.H", default=[1 / 4, 1 / 8, 1 / 16, 1 / 32])
    p_values = cfg.get_int_list("sweep.p", default=[6, 8, 10])
    p_fixed_H = cfg.get_float("sweep.p_fixed_H", default=1 / 8)
    cell = cfg.get_float("disc.cell", default=1 / 32, positive=True)
    p0 = cfg.get_int("disc.p", default=6, minimum=4)
    tol_scale = cfg.get_float("gmres.tol_scale", default=1e-5, positive=True)
    max_iter = cfg.get_int("gmres.max_iter", default=2000, minimum=1)
    cfg.raise_if_invalid()
    op, data, _ = _problem(cfg)
    cfg.raise_if_invalid()
    name = cfg.get_str("problem.preset")

    rows = []
    for H in H_values:
        rows.append(_one_gmres_run(op, data, H, cell, p0, tol_scale, max_iter,
                                   threads, kind="H_sweep"))
    for p in p_values:
        rows.append(_one_gmres_run(op, data, p_fixed_H, cell, p, tol_scale,
                                   max_iter, threads, kind="p_sweep"))
    path = os.path.join(outdir, f"gmres_scaling_{name}.csv")
    write_csv(path, rows)
    return {f"gmres_scaling_{name}": rows}


def _one_gmres_run(op, data, H, cell, p, tol_scale, max_iter, threads, kind):
    n_int = int(round(1.0 / H)) - 1
    d = decompose((1.0, 1.0), n_int)
    disc = {"backend": "hps", "cell": cell, "p": p}
    t0 = time.perf_counter()
    S, load, timers = build_operator(d, op, data, disc, threads=threads)
    tol = H * H * tol_scale
    u_gamma, rep = gmres(S.apply, load.vector, tol=tol, max_iter=max_iter)
    return {
        "kind": kind,
        "H": H,
        "p": p,
        "n_interfaces": n_int,
        "J_Gamma": S.n,
        "tol": tol,
        "gmres_iters": rep.iterations,
        "residual": rep.achieved,
        "converged": int(rep.converged),
        "t_A": timers.t_A,
        "t_total": time.perf_counter() - t0,
    }


def run_normality_sweep(cfg: ExperimentConfig, outdir, threads=1):
    """Normality measures of the dense interface system over the slab width,
    for the stencil and the weighted spectral discretizations."""
    H_values = cfg.get_float_list("sweep.H", default=[1 / 4, 1 / 8, 1 / 16, 1 / 32])
    h = cfg.get_float("fd.h", default=1 / 96, positive=True)
    cell = cfg.get_float("hps.cell", default=1 / 32, positive=True)
    p = cfg.get_int("hps.p", default=6, minimum=4)
    cfg.raise_if_invalid()
    op, _, _ = _problem(cfg)
    cfg.raise_if_invalid()

    rows = []
    for disc_name in ("fd", "hps"):
        for H in H_values:
            n_int = int(round(1.0 / H)) - 1
            d = decompose((1.0, 1.0), n_int)
            if disc_name == "fd":
                disc = {"backend": "fd", "h": h}
                weights = None
            else:
                disc = {"backend": "hps", "cell": cell, "p": p}
                weights = interface_sqrt_weights(int(round(1.0 / cell)), p, 1.0)
            S, _, _ = build_operator(d, op, BoundaryData.zero(), disc,
                                     threads=threads)
            j_half = int(round(0.5 / H)) - 1  # interface at x = 1/2
            rep = analysis.normality_report(
                S.to_dense(), S.index.block_offsets, (j_half, j_half - 1),
                weights=weights,
            )
            rows.append({
                "disc": disc_name,
                "H": H,
                "J_Gamma": S.n,
                "errBlock": rep.block_asymmetry,
                "err": rep.eig_sv_gap,
                "cond_eig": rep.kappa_rho,
                "cond_svd": rep.kappa_2,
                "ratio_minus_one": rep.ratio_minus_one,
            })
    write_csv(os.path.join(outdir, "normality_sweep.csv"), rows)
    return {"normality_sweep": rows}


def run_spectrum_gallery(cfg: ExperimentConfig, outdir, threads=1):
    """Eigenvalues of the weighted interface systems for the three operator
    families (positive definite, damped, variable-coefficient)."""
    cell = cfg.get_float("disc.cell", default=1 / 16, positive=True)
    p = cfg.get_int("disc.p", default=8, minimum=4)
    n_int = cfg.get_int("decomp.n_interfaces", default=7, minimum=1)
    kappa = cfg.get_float("problem.helmholtz_kappa", default=9.80177, positive=True)
    cfg.raise_if_invalid()

    cases = [
        ("laplace", make_helmholtz(0.0, dim=2)),
        ("helmholtz", make_helmholtz(kappa, dim=2)),
        ("vc2d", make_variable_coefficient_2d()),
    ]
    d = decompose((1.0, 1.0), n_int)
    disc = {"backend": "hps", "cell": cell, "p": p}
    w = interface_sqrt_weights(int(round(1.0 / cell)), p, 1.0)
    out = {}
    for label, op in cases:
        S, _, _ = build_operator(d, op, BoundaryData.zero(), disc, threads=threads)
        Sd = S.to_dense()
        W = np.concatenate([w] * n_int)
        Sw = Sd * W[:, None] / W[None, :]
        lam = analysis.spectrum(Sw)
        order = np.lexsort((lam.imag, lam.real))
        rows = [{"real": float(z.real), "imag": float(z.imag)} for z in lam[order]]
        write_csv(os.path.join(outdir, f"spectrum_{label}.csv"), rows)
        out[f"spectrum_{label}"] = rows
    return out


def run_t_spectrum_growth(cfg: ExperimentConfig, outdir, threads=1):
    """Largest reduced-system eigenvalue under refinement: the unreduced
    interface system grows like the square of the resolution while the
    preconditioned one stays bounded."""
    h_values = cfg.get_float_list("fd.h_values", default=[1 / 32, 1 / 64, 1 / 128])
    n_fd = cfg.get_int("fd.n_interfaces", default=15, minimum=1)
    p_values = cfg.get_int_list("hps.p_values", default=[8, 16, 32])
    cell = cfg.get_float("hps.cell", default=1 / 4, positive=True)
    n_hps = cfg.get_int("hps.n_interfaces", default=3, minimum=1)
    cfg.raise_if_invalid()

    op = make_helmholtz(0.0, dim=2)
    rows = []
    for h in h_values:
        d = decompose((1.0, 1.0), n_fd)
        g = assemble_fd(op, [(0.0, 1.0), (0.0, 1.0)], h)
        red = analysis.schur_reduce(g, _interface_lists(g, d))
        lam_T = np.abs(np.linalg.eigvals(red.T))
        lam_S = np.abs(np.linalg.eigvals(red.S))
        rows.append({
            "disc": "fd", "param": 1.0 / h, "H": d.H,
            "rho_T": float(lam_T.max()), "rho_S": float(lam_S.max()),
        })
    for p in p_values:
        d = decompose((1.0, 1.0), n_hps)
        t = int(round(1.0 / cell))
        g = assemble_hps(op, [(0.0, 1.0), (0.0, 1.0)], (t, t), p)
        red = analysis.schur_reduce(g, _interface_lists(g, d))
        lam_T = np.abs(np.linalg.eigvals(red.T))
        lam_S = np.abs(np.linalg.eigvals(red.S))
        rows.append({
            "disc": "hps", "param": float(p), "H": d.H,
            "rho_T": float(lam_T.max()), "rho_S": float(lam_S.max()),
        })
    write_csv(os.path.join(outdir, "t_spectrum_growth.csv"), rows)
    return {"t_spectrum_growth": rows}


def _dense_middle_block(op, d, disc):
    """Dense S_{j,j-1} at the middle interface and its transverse node
    coordinates (the cluster-tree geometry)."""
    j = d.n_interfaces // 2
    S, _, _ = build_operator(d, op, BoundaryData.zero(), disc, probes=0)
    blk = S.blocks[(j, j - 1)].dense
    system = slab_system(d, op, j, disc)
    pts = system.points[S.index.per_slab[j].central][:, 1:]
    return blk, pts, S


def _single_slab_T(op, d, disc, j):
    """One-sided T_jj and T_{j,j-1} built on the slab between interfaces
    j-1 and j, widened by one cell so the planes carry free rows."""
    x0 = d.interface_coord(j - 1)
    x1 = d.interface_coord(j)
    if disc["backend"] == "fd":
        pad = disc["h"]
        region = [(x0 - pad, x1 + pad)] + [(0.0, e) for e in d.extents[1:]]
        system = assemble_fd(op, region, disc["h"])
    else:
        pad = disc["cell"]
        region = [(x0 - pad, x1 + pad)] + [(0.0, e) for e in d.extents[1:]]
        tiling = tuple(
            int(round((hi - lo) / disc["cell"])) for lo, hi in region
        )
        system = assemble_hps(op, region, tiling, disc["p"])
    left = system.interface_nodes(x0)
    right = system.interface_nodes(x1)
    return analysis.single_slab_t_blocks(system, left, right)


def run_rank_study(cfg: ExperimentConfig, outdir, threads=1, three_d=False):
    p_values = cfg.get_int_list("sweep.p", default=[4, 6] if three_d else [6, 8, 10])
    cell = cfg.get_float("disc.cell", default=1 / 8 if three_d else 1 / 16,
                         positive=True)
    tol = cfg.get_float("rank.tol", default=1e-5, positive=True)
    levels = cfg.get_int_list("rank.levels", default=[3, 4])
    kappa = cfg.get_float("problem.kappa", default=9.80177 if three_d else 0.0)
    cfg.raise_if_invalid()

    rows = []
    for p in p_values:
        if three_d:
            op = make_helmholtz(kappa, dim=3)
            d = decompose((1.0, 1.0, 1.0), 3)  # H = 1/4, cells of 1/8
            disc = {"backend": "hps", "cell": cell, "p": p}
            arity = 4
        else:
            op = make_helmholtz(kappa, dim=2) if kappa else make_helmholtz(0.0, dim=2)
            d = decompose((1.0, 1.0), 7)
            disc = {"backend": "hps", "cell": cell, "p": p}
            arity = 2
        blk, pts, S = _dense_middle_block(op, d, disc)
        # leaves hold one cell's worth of interface nodes
        leaf = (p - 2) ** 2 if arity == 4 else (p - 2)
        tree = build_tree(pts, arity=arity, leaf_size=leaf)
        j = d.n_interfaces // 2
        T_rr, T_rl = _single_slab_T(op, d, disc, j)
        for label, M in (("S_j_jm1", blk), ("T_jj", T_rr), ("T_j_jm1", T_rl)):
            for adm in ("weak", "strong"):
                study = analysis.rank_study(M, tree, levels, adm, tol=tol)
                for level in levels:
                    rows.append({
                        "p": p,
                        "matrix": label,
                        "admissibility": adm,
                        "level": level,
                        "n": M.shape[0],
                        "max_rank": study.max_rank(level),
                        "mean_rank": float(np.mean(study.ranks[level])),
                    })
    name = "rank_study_3d_reduced" if three_d else "rank_study_2d"
    write_csv(os.path.join(outdir, f"{name}.csv"), rows)
    return {name: rows}


def run_hbs_error_vs_rank(cfg: ExperimentConfig, outdir, threads=1):
    """Compression error and storage rate of one dense-built solution block
    as a function of the rank."""
    k_values = cfg.get_int_list("sweep.k", default=[5, 10, 20, 40])
    cell = cfg.get_float("disc.cell", default=1 / 64, positive=True)
    p = cfg.get_int("disc.p", default=10, minimum=4)
    seed = cfg.get_int("hbs.seed", default=0)
    cfg.raise_if_invalid()

    op = make_helmholtz(0.0, dim=2)
    n_int = int(round(1.0 / (2 * cell))) - 1  # H = 2 cells
    d = decompose((1.0, 1.0), n_int)
    disc = {"backend": "hps", "cell": cell, "p": p}
    blk, pts, S = _dense_middle_block(op, d, disc)
    n = blk.shape[0]
    rng = np.random.default_rng(123)
    X = rng.standard_normal((n, 10))
    ref = blk @ X
    rows = []
    for k in k_values:
        tree = build_tree(pts, arity=2, leaf_size=2 * k)
        H1, t_s, t_c = compress_timed(
            lambda V: blk @ V, lambda V: blk.T @ V, k, tree, seed=seed
        )
        H2, _, _ = compress_timed(
            lambda V: blk @ V, lambda V: blk.T @ V, k, tree, seed=seed
        )
        det = all(
            np.array_equal(H1.leaf_D[i], H2.leaf_D[i]) for i in H1.leaf_D
        ) and all(np.array_equal(H1.B[i], H2.B[i]) for i in H1.B)
        err = np.linalg.norm(H1.matvec(X) - ref) / np.linalg.norm(ref)
        rows.append({
            "k": k,
            "n": n,
            "rel_error": float(err),
            "storage_rate": H1.storage_report()["compression_rate"],
            "deterministic": int(det),
            "t_YZ": t_s,
            "t_HBS": t_c,
        })
    write_csv(os.path.join(outdir, "hbs_error_vs_rank.csv"), rows)
    return {"hbs_error_vs_rank": rows}


def run_cube_helmholtz(cfg: ExperimentConfig, outdir, threads=1):
    """Point-source Helmholtz cube: iteration counts across a resolution
    sweep with compressed blocks, volume error against the exact solution."""
    n_int = cfg.get_int("decomp.n_interfaces", default=7, minimum=1)
    h_values = cfg.get_float_list("sweep.h", default=[1 / 16, 1 / 24, 1 / 32])
    k = cfg.get_int("hbs.k", default=15, minimum=1)
    arity = cfg.get_int("hbs.arity", default=4)
    seed = cfg.get_int("hbs.seed", default=0)
    tol_scale = cfg.get_float("gmres.tol_scale", default=1e-6, positive=True)
    max_iter = cfg.get_int("gmres.max_iter", default=600, minimum=1)
    cfg.raise_if_invalid()
    op, data, ref = _problem(cfg)
    cfg.raise_if_invalid()

    d = decompose((1.0, 1.0, 1.0), n_int)
    rows = []
    for h in h_values:
        disc = {"backend": "fd", "h": h}
        t0 = time.perf_counter()
        S, load, timers = build_operator(
            d, op, data, disc,
            hbs_config=HbsConfig(k=k, arity=arity, seed=seed), threads=threads,
        )
        tol = d.H * d.H * tol_scale
        u_gamma, rep = gmres(S.apply, load.vector, tol=tol, max_iter=max_iter)
        pts, vals = reconstruct_interior(d, op, data, u_gamma, S.index, disc)
        exact = ref.values(pts)
        err = np.linalg.norm(vals - exact) / np.linalg.norm(exact)
        rows.append({
            "h_inv": 1.0 / h,
            "N": len(pts),
            "J_Gamma": S.n,
            "hbs_k": k,
            "gmres_iters": rep.iterations,
            "residual": rep.achieved,
            "vol_error": float(err),
            "storage_rate": S.storage_report()["compression_rate"],
            "t_A": timers.t_A,
            "t_YZ": timers.t_YZ,
            "t_HBS": timers.t_HBS,
            "t_total": time.perf_counter() - t0,
        })
    write_csv(os.path.join(outdir, "cube_helmholtz.csv"), rows)
    return {"cube_helmholtz": rows}


def run_waveguide_selfconv(cfg: ExperimentConfig, outdir, threads=1):
    """Self-convergence of the waveguide solution in the spectral order, with
    compressed blocks, against a dense direct reference at higher order."""
    n_int = cfg.get_int("decomp.n_interfaces", default=7, minimum=1)
    cell = cfg.get_float("disc.cell", default=1 / 16, positive=True)
    p_values = cfg.get_int_list("sweep.p", default=[6, 8, 10, 12])
    p_ref = cfg.get_int("reference.p", default=14, minimum=4)
    k = cfg.get_int("hbs.k", default=20, minimum=1)
    seed = cfg.get_int("hbs.seed", default=0)
    tol_scale = cfg.get_float("gmres.tol_scale", default=1e-10, positive=True)
    max_iter = cfg.get_int("gmres.max_iter", default=2000, minimum=1)
    n_eval = cfg.get_int("eval.grid", default=100, minimum=10)
    cfg.raise_if_invalid()
    op, data, _ = _problem(cfg)
    cfg.raise_if_invalid()

    d = decompose((1.0, 1.0), n_int)

    def solve_at(p, hbs_cfg, direct):
        disc = {"backend": "hps", "cell": cell, "p": p}
        S, load, timers = build_operator(d, op, data, disc, hbs_config=hbs_cfg,
                                         threads=threads)
        if direct:
            u_gamma = np.linalg.solve(S.to_dense(), load.vector)
            rep = None
        else:
            tol = d.H * d.H * tol_scale
            u_gamma, rep = gmres(S.apply, load.vector, tol=tol, max_iter=max_iter)
        t = int(round(1.0 / cell))
        g = assemble_hps(op, [(0.0, 1.0), (0.0, 1.0)], (t, t), p)
        # reassemble the volume field on the global system's nodes
        pts, vals = reconstruct_interior(d, op, data, u_gamma, S.index, disc)
        u_full = _field_on_system(g, pts, vals)
        _, grid_vals = evaluate_on_grid(g, u_full, n_eval)
        probe = max((b.probe_error for b in S.blocks.values()), default=0.0)
        return grid_vals, rep, timers, S, probe

    ref_vals, _, _, _, _ = solve_at(p_ref, None, direct=True)
    ref_norm = np.linalg.norm(ref_vals)
    rows = []
    for p in p_values:
        t0 = time.perf_counter()
        vals, rep, timers, S, probe = solve_at(
            p, HbsConfig(k=k, arity=2, seed=seed), direct=False
        )
        err = np.linalg.norm(vals - ref_vals) / ref_norm
        rows.append({
            "p": p,
            "N": int(round(1.0 / cell)) ** 2 * p * p,
            "J_Gamma": S.n,
            "hbs_k": k,
            "gmres_iters": rep.iterations,
            "residual": rep.achieved,
            "err": float(err),
            "block_probe_error": probe,
            "t_A": timers.t_A,
            "t_YZ": timers.t_YZ,
            "t_HBS": timers.t_HBS,
            "t_total": time.perf_counter() - t0,
        })
    write_csv(os.path.join(outdir, "waveguide_selfconv.csv"), rows)
    return {"waveguide_selfconv": rows}


def _field_on_system(system, pts, vals):
    """Order reconstructed (points, values) into a system's DOF vector."""
    tol = system.coord_tol
    keys_sys = np.round(system.points / tol).astype(np.int64)
    keys_in = np.round(pts / tol).astype(np.int64)
    order_sys = np.lexsort(keys_sys.T[::-1])
    order_in = np.lexsort(keys_in.T[::-1])
    if not np.array_equal(keys_sys[order_sys], keys_in[order_in]):
        raise AssertionError("reconstructed points do not match the system nodes")
    u = np.empty(system.n_dofs)
    u[order_sys] = vals[order_in]
    return u


RUNNERS = {
    "smoke": run_smoke,
    "oracle_equivalence": run_oracle_equivalence,
    "gmres_scaling": run_gmres_scaling,
    "normality_sweep": run_normality_sweep,
    "spectrum_gallery": run_spectrum_gallery,
    "t_spectrum_growth": run_t_spectrum_growth,
    "rank_study_2d": lambda cfg, outdir, threads=1: run_rank_study(
        cfg, outdir, threads, three_d=False
    ),
    "rank_study_3d_reduced": lambda cfg, outdir, threads=1: run_rank_study(
        cfg, outdir, threads, three_d=True
    ),
    "hbs_error_vs_rank": run_hbs_error_vs_rank,
    "cube_helmholtz": run_cube_helmholtz,
    "waveguide_selfconv": run_waveguide_selfconv,
}


def run(values: Dict[str, str], outdir=".", threads=1):
    """Validate and execute one experiment; returns {csv_name: rows}."""
    cfg = ExperimentConfig(dict(values))
    name = cfg.get_str("experiment.name", choices=set(RUNNERS))
    cfg.raise_if_invalid()
    os.makedirs(outdir, exist_ok=True)
    t0 = time.perf_counter()
    out = RUNNERS[name](cfg, outdir, threads=threads)
    elapsed = time.perf_counter() - t0
    lines = [f"experiment: {name}", f"wall time: {elapsed:.2f} s"]
    for csv_name, rows in out.items():
        lines.append(f"{csv_name}: {len(rows)} rows -> {csv_name}.csv")
    with open(os.path.join(outdir, "summary.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return out
