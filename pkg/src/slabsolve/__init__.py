"""Overlapping-slab solver for variable-coefficient elliptic boundary value problems.

The domain is sliced into thin slabs. On every double-wide slab a local
Dirichlet problem is solved directly, which yields interface-to-interface
solution operators. These are assembled (optionally in randomized
rank-structured form) into a block-tridiagonal interface system with identity
diagonal that is solved with GMRES and expanded back to the volume.
"""

from slabsolve.problem import (
    EllipticOperator,
    BoundaryData,
    ReferenceSolution,
    make_helmholtz,
    make_variable_coefficient_2d,
    make_waveguide,
)
from slabsolve.slabs import SlabDecomposition, IndexSets, decompose, index_sets
from slabsolve.system import SparseSystem, build_rhs
from slabsolve.fd import assemble_fd
from slabsolve.hps import assemble_hps
from slabsolve.chebyshev import clenshaw_curtis_weights
from slabsolve.sparse import InteriorFactorization, factorize
from slabsolve.hbs import ClusterTree, HbsMatrix, build_tree, compress
from slabsolve.equilibrium import (
    SolutionBlock,
    EquilibriumOperator,
    build_block,
    build_operator,
    reconstruct_interior,
)
from slabsolve.krylov import GmresReport, gmres

__version__ = "0.1.0"

__all__ = [
    "EllipticOperator",
    "BoundaryData",
    "ReferenceSolution",
    "make_helmholtz",
    "make_variable_coefficient_2d",
    "make_waveguide",
    "SlabDecomposition",
    "IndexSets",
    "decompose",
    "index_sets",
    "SparseSystem",
    "build_rhs",
    "assemble_fd",
    "assemble_hps",
    "clenshaw_curtis_weights",
    "InteriorFactorization",
    "factorize",
    "ClusterTree",
    "HbsMatrix",
    "build_tree",
    "compress",
    "SolutionBlock",
    "EquilibriumOperator",
    "build_block",
    "build_operator",
    "reconstruct_interior",
    "GmresReport",
    "gmres",
]
