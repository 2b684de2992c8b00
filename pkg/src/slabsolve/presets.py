"""Named experiment presets (reduced, desk-scale parameter choices)."""

PRESETS = {
    "smoke": {
        "experiment.name": "smoke",
        "problem.preset": "laplace2d",
        "problem.data_seed": "3",
        "decomp.n_interfaces": "2",
        "disc.backend": "fd",
        "disc.h": "1/48",
        "hbs.k": "20",
        "hbs.arity": "2",
        "hbs.seed": "0",
        "gmres.tol": "1e-12",
        "gmres.max_iter": "400",
    },
    "oracle_equivalence": {
        "experiment.name": "oracle_equivalence",
        "fd.h": "1/32",
        "fd.n_interfaces": "3",
        "hps.cell": "1/8",
        "hps.p": "8",
        "hps.n_interfaces": "7",
    },
    "gmres_scaling_laplace": {
        "experiment.name": "gmres_scaling",
        "problem.preset": "laplace2d",
        "problem.data_seed": "11",
        "sweep.H": "1/4,1/8,1/16,1/32",
        "sweep.p": "6,8,10",
        "sweep.p_fixed_H": "1/8",
        "disc.cell": "1/32",
        "disc.p": "6",
        "gmres.tol_scale": "1e-5",
        "gmres.max_iter": "2000",
    },
    "gmres_scaling_vc": {
        "experiment.name": "gmres_scaling",
        "problem.preset": "vc2d_damped",
        "problem.kappa": "10",
        "problem.data_seed": "12",
        "sweep.H": "1/4,1/8,1/16,1/32",
        "sweep.p": "6,8,10",
        "sweep.p_fixed_H": "1/8",
        "disc.cell": "1/32",
        "disc.p": "6",
        "gmres.tol_scale": "1e-5",
        "gmres.max_iter": "2000",
    },
    "normality_sweep": {
        "experiment.name": "normality_sweep",
        "problem.preset": "vc2d",
        "sweep.H": "1/4,1/8,1/16,1/32",
        "fd.h": "1/96",
        "hps.cell": "1/32",
        "hps.p": "6",
    },
    "spectrum_gallery": {
        "experiment.name": "spectrum_gallery",
        "disc.cell": "1/16",
        "disc.p": "8",
        "decomp.n_interfaces": "7",
        "problem.helmholtz_kappa": "9.80177",
    },
    "t_spectrum_growth": {
        "experiment.name": "t_spectrum_growth",
        "fd.h_values": "1/32,1/64,1/128",
        "fd.n_interfaces": "15",
        "hps.p_values": "8,16,32",
        "hps.cell": "1/4",
        "hps.n_interfaces": "3",
    },
    "rank_study_2d": {
        "experiment.name": "rank_study_2d",
        "sweep.p": "6,8,10",
        "disc.cell": "1/16",
        "rank.tol": "1e-5",
        "rank.levels": "3,4",
        "hbs.leaf_cells": "1",
    },
    "rank_study_3d_reduced": {
        "experiment.name": "rank_study_3d_reduced",
        "problem.kappa": "9.80177",
        "sweep.p": "4,6",
        "disc.cell": "1/8",
        "rank.tol": "1e-5",
        "rank.levels": "3,4",
    },
    "hbs_error_vs_rank": {
        "experiment.name": "hbs_error_vs_rank",
        "sweep.k": "5,10,20,40",
        "disc.cell": "1/64",
        "disc.p": "10",
        "hbs.arity": "2",
        "hbs.seed": "0",
    },
    "cube_helmholtz": {
        "experiment.name": "cube_helmholtz",
        "problem.preset": "helmholtz3d",
        "problem.kappa": "5",
        "decomp.n_interfaces": "7",
        "sweep.h": "1/16,1/24,1/32",
        "hbs.k": "15",
        "hbs.arity": "4",
        "hbs.seed": "0",
        "gmres.tol_scale": "1e-6",
        "gmres.max_iter": "600",
    },
    "waveguide_selfconv": {
        "experiment.name": "waveguide_selfconv",
        "problem.preset": "waveguide2d",
        "problem.kappa": "40",
        "problem.bump_amplitude": "0.9",
        "problem.bump_width": "0.03",
        "decomp.n_interfaces": "7",
        "disc.cell": "1/16",
        "sweep.p": "6,8,10,12",
        "reference.p": "14",
        "hbs.k": "20",
        "hbs.arity": "2",
        "hbs.seed": "0",
        "gmres.tol_scale": "1e-10",
        "gmres.max_iter": "2000",
        "eval.grid": "100",
    },
}


def preset_values(name):
    if name not in PRESETS:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        )
    return dict(PRESETS[name])


def list_presets():
    return sorted(PRESETS)
