"""Second-order finite-difference backend (3/5/7-point stencils).

Variable coefficients are sampled at the stencil center, which is the faithful
collocation of the non-divergence-form operator. Dirichlet nodes are kept as
identity rows; the right-hand-side builder folds their data into the interior
rows.
"""

import numpy as np
import scipy.sparse as sp

from slabsolve.system import DIRICHLET, INTERIOR, SparseSystem


def assemble_fd(op, region, h, periodic_axes=(), coord_map=None):
    """Assemble the stencil discretization of `op` on a box region.

    region: per-axis (lo, hi) bounds; every edge length must be an integer
    multiple of h. Axes listed in `periodic_axes` wrap around instead of
    carrying Dirichlet rows.
    """
    region = [(float(lo), float(hi)) for lo, hi in region]
    dim = len(region)
    if dim != op.dim:
        raise ValueError(f"region dim {dim} != operator dim {op.dim}")
    ncells = []
    for lo, hi in region:
        n = (hi - lo) / h
        if abs(n - round(n)) > 1e-8 * max(1.0, abs(n)):
            raise ValueError(f"extent {hi - lo} is not an integer multiple of h={h}")
        if round(n) < 2:
            raise ValueError("need at least 2 cells per axis")
        ncells.append(int(round(n)))

    shape = tuple(
        n if axis in periodic_axes else n + 1 for axis, n in enumerate(ncells)
    )
    axes_coords = [region[a][0] + h * np.arange(shape[a]) for a in range(dim)]
    mesh = np.meshgrid(*axes_coords, indexing="ij")
    points = np.column_stack([m.ravel() for m in mesh])
    n_dofs = points.shape[0]
    idx = np.arange(n_dofs).reshape(shape)

    role = np.full(shape, INTERIOR, dtype=np.int8)
    for a in range(dim):
        if a in periodic_axes:
            continue
        lo_face = [slice(None)] * dim
        lo_face[a] = 0
        hi_face = [slice(None)] * dim
        hi_face[a] = shape[a] - 1
        role[tuple(lo_face)] = DIRICHLET
        role[tuple(hi_face)] = DIRICHLET
    role = role.ravel()

    sample = coord_map(points) if coord_map is not None else points
    a_vals = []
    for a in range(dim):
        vals = op.diffusion(a)(sample)
        if np.any(vals <= 0):
            bad = points[int(np.argmin(vals))]
            raise ValueError(f"nonpositive axis-{a} diffusion coefficient at {bad}")
        a_vals.append(vals)
    c_vals = op.c(sample)

    interior = np.flatnonzero(role == INTERIOR)
    inv_h2 = 1.0 / (h * h)
    rows = []
    cols = []
    values = []

    diag = c_vals[interior].copy()
    for a in range(dim):
        diag += 2.0 * a_vals[a][interior] * inv_h2
    rows.append(interior)
    cols.append(interior)
    values.append(diag)

    # interior rows exclude the non-periodic boundary layers, so the roll
    # wrap-around only ever produces valid neighbors
    for a in range(dim):
        for shift in (-1, 1):
            nb = np.roll(idx, -shift, axis=a).ravel()
            rows.append(interior)
            cols.append(nb[interior])
            values.append(-a_vals[a][interior] * inv_h2)

    dir_idx = np.flatnonzero(role == DIRICHLET)
    rows.append(dir_idx)
    cols.append(dir_idx)
    values.append(np.ones(len(dir_idx)))

    matrix = sp.coo_matrix(
        (np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_dofs, n_dofs),
    ).tocsr()
    return SparseSystem(
        matrix=matrix,
        points=points,
        role=role,
        backend="fd",
        params={"h": h, "region": region, "periodic_axes": tuple(periodic_axes)},
        coord_tol=1e-6 * h,
        coord_map=coord_map,
    )
