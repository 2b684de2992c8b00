"""Multidomain Chebyshev spectral collocation backend.

The region is tiled by tensor-product cells, each carrying a p x p (2D) or
p x p x p (3D) Chebyshev extreme grid; shared cell boundaries carry one merged
node set. Rows collocate the PDE at cell-interior nodes, enforce continuity of
the normal derivative (an unweighted one-sided jump) at shared face nodes, and
hold identities at region-boundary nodes. Cell corners (2D) and cell edges
(3D) are inactive and never referenced by any row, so they are simply removed
from the DOF set.
"""

import numpy as np
import scipy.sparse as sp

from slabsolve.chebyshev import cheb_nodes, clenshaw_curtis_weights, diff_matrix
from slabsolve.system import DIRICHLET, FACE, INTERIOR, SparseSystem


def assemble_hps(op, region, tiling, p, periodic_axes=(), coord_map=None):
    """Assemble the multidomain collocation system of `op` on a box region.

    tiling: number of cells per axis. p: Chebyshev order per cell (>= 4).
    Axes in `periodic_axes` wrap the cell lattice instead of carrying
    Dirichlet rows.
    """
    if p < 4:
        raise ValueError("spectral order p must be at least 4")
    region = [(float(lo), float(hi)) for lo, hi in region]
    dim = len(region)
    if dim not in (2, 3):
        raise ValueError("spectral backend supports dim 2 and 3")
    if dim != op.dim:
        raise ValueError(f"region dim {dim} != operator dim {op.dim}")
    tiling = tuple(int(t) for t in tiling)
    if len(tiling) != dim or any(t < 1 for t in tiling):
        raise ValueError("tiling must give a positive cell count per axis")

    widths = [(hi - lo) / t for (lo, hi), t in zip(region, tiling)]
    lat_size = [
        t * (p - 1) if a in periodic_axes else t * (p - 1) + 1
        for a, t in enumerate(tiling)
    ]

    # one consistent coordinate array per axis; shared endpoints appear once
    ref01 = (cheb_nodes(p) + 1.0) * 0.5
    axis_coords = []
    for a in range(dim):
        lo, _ = region[a]
        w = widths[a]
        coords = np.empty(lat_size[a])
        for c in range(tiling[a]):
            coords[c * (p - 1) : c * (p - 1) + p - 1] = lo + (c + ref01[: p - 1]) * w
        if a not in periodic_axes:
            coords[-1] = region[a][1]
        axis_coords.append(coords)

    vertex = [np.arange(lat_size[a]) % (p - 1) == 0 for a in range(dim)]
    on_boundary = []
    for a in range(dim):
        b = np.zeros(lat_size[a], dtype=bool)
        if a not in periodic_axes:
            b[0] = True
            b[-1] = True
        on_boundary.append(b)

    grids = np.meshgrid(*[np.arange(s) for s in lat_size], indexing="ij")
    nvert = sum(vertex[a][grids[a]].astype(np.int8) for a in range(dim))
    bnd = np.zeros(grids[0].shape, dtype=bool)
    for a in range(dim):
        bnd |= on_boundary[a][grids[a]]

    inactive = nvert >= 2
    role_grid = np.where(
        inactive, -1, np.where(bnd, DIRICHLET, np.where(nvert == 1, FACE, INTERIOR))
    ).astype(np.int8)

    active = role_grid.ravel() >= 0
    n_dofs = int(active.sum())
    gidx = np.full(role_grid.size, -1, dtype=np.int64)
    gidx[active] = np.arange(n_dofs)
    gidx = gidx.reshape(role_grid.shape)

    mesh = np.meshgrid(*axis_coords, indexing="ij")
    points = np.column_stack([m.ravel()[active] for m in mesh])
    role = role_grid.ravel()[active]

    sample = coord_map(points) if coord_map is not None else points
    a_vals = []
    for a in range(dim):
        vals = op.diffusion(a)(sample)
        if np.any(vals <= 0):
            bad = points[int(np.argmin(vals))]
            raise ValueError(f"nonpositive axis-{a} diffusion coefficient at {bad}")
        a_vals.append(vals)
    c_vals = op.c(sample)

    D = [diff_matrix(p, 0.0, widths[a]) for a in range(dim)]
    D2 = [d @ d for d in D]

    rows, cols, vals = [], [], []
    if dim == 2:
        _assemble_cells_2d(
            tiling, p, lat_size, periodic_axes, gidx, D, D2, a_vals, c_vals,
            rows, cols, vals,
        )
    else:
        _assemble_cells_3d(
            tiling, p, lat_size, periodic_axes, gidx, D, D2, a_vals, c_vals,
            rows, cols, vals,
        )

    dir_idx = np.flatnonzero(role == DIRICHLET)
    rows.append(dir_idx)
    cols.append(dir_idx)
    vals.append(np.ones(len(dir_idx)))

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    if np.any(rows < 0) or np.any(cols < 0):
        raise AssertionError("assembly referenced an inactive node")
    matrix = sp.coo_matrix((vals, (rows, cols)), shape=(n_dofs, n_dofs)).tocsr()
    return SparseSystem(
        matrix=matrix,
        points=points,
        role=role,
        backend="hps",
        params={"tiling": tiling, "p": p, "region": region,
                "periodic_axes": tuple(periodic_axes), "widths": tuple(widths)},
        coord_tol=1e-9 * max(w for w in widths),
        coord_map=coord_map,
    )


def _cell_lattice(c, p, size, periodic):
    g = c * (p - 1) + np.arange(p)
    return g % size if periodic else g


def _assemble_cells_2d(tiling, p, lat_size, periodic_axes, gidx, D, D2,
                       a_vals, c_vals, rows, cols, vals):
    ii = slice(1, p - 1)
    for cx in range(tiling[0]):
        gx = _cell_lattice(cx, p, lat_size[0], 0 in periodic_axes)
        for cy in range(tiling[1]):
            gy = _cell_lattice(cy, p, lat_size[1], 1 in periodic_axes)
            lid = gidx[np.ix_(gx, gy)]
            axx = a_vals[0][lid[ii, ii]]
            ayy = a_vals[1][lid[ii, ii]]
            cc = c_vals[lid[ii, ii]]

            # PDE rows at cell-interior nodes; couplings stay on the node's
            # own row/column of the tensor grid, so corners never appear
            r = np.broadcast_to(lid[ii, ii][:, :, None], (p - 2, p - 2, p))
            cx_cols = np.broadcast_to(lid[:, ii].T[None, :, :], (p - 2, p - 2, p))
            vx = -axx[:, :, None] * D2[0][ii, None, :]
            rows.append(r.ravel())
            cols.append(cx_cols.ravel())
            vals.append(vx.ravel())

            cy_cols = np.broadcast_to(lid[ii, :][:, None, :], (p - 2, p - 2, p))
            vy = -ayy[:, :, None] * D2[1][None, ii, :]
            rows.append(r.ravel())
            cols.append(cy_cols.ravel())
            vals.append(vy.ravel())

            rows.append(lid[ii, ii].ravel())
            cols.append(lid[ii, ii].ravel())
            vals.append(cc.ravel())

            # outward normal derivative contributions at shared internal faces;
            # the two adjacent cells accumulate into the jump row
            for loc, sign, internal in (
                (0, -1.0, cx > 0 or 0 in periodic_axes),
                (p - 1, 1.0, cx < tiling[0] - 1 or 0 in periodic_axes),
            ):
                if not internal:
                    continue
                face = lid[loc, ii]
                r2 = np.broadcast_to(face[:, None], (p - 2, p))
                c2 = lid[:, ii].T
                v2 = sign * np.broadcast_to(D[0][loc, None, :], (p - 2, p))
                rows.append(r2.ravel())
                cols.append(c2.ravel())
                vals.append(v2.ravel())
            for loc, sign, internal in (
                (0, -1.0, cy > 0 or 1 in periodic_axes),
                (p - 1, 1.0, cy < tiling[1] - 1 or 1 in periodic_axes),
            ):
                if not internal:
                    continue
                face = lid[ii, loc]
                r2 = np.broadcast_to(face[:, None], (p - 2, p))
                c2 = lid[ii, :]
                v2 = sign * np.broadcast_to(D[1][loc, None, :], (p - 2, p))
                rows.append(r2.ravel())
                cols.append(c2.ravel())
                vals.append(v2.ravel())


def _assemble_cells_3d(tiling, p, lat_size, periodic_axes, gidx, D, D2,
                       a_vals, c_vals, rows, cols, vals):
    ii = slice(1, p - 1)
    m = p - 2
    for cx in range(tiling[0]):
        gx = _cell_lattice(cx, p, lat_size[0], 0 in periodic_axes)
        for cy in range(tiling[1]):
            gy = _cell_lattice(cy, p, lat_size[1], 1 in periodic_axes)
            for cz in range(tiling[2]):
                gz = _cell_lattice(cz, p, lat_size[2], 2 in periodic_axes)
                lid = gidx[np.ix_(gx, gy, gz)]
                core = lid[ii, ii, ii]
                coeffs = [a[core] for a in a_vals]
                cc = c_vals[core]

                r = np.broadcast_to(core[:, :, :, None], (m, m, m, p))
                # x-derivative couples (l, j, k)
                c_x = np.broadcast_to(
                    lid[:, ii, ii].transpose(1, 2, 0)[None, :, :, :], (m, m, m, p)
                )
                v_x = -coeffs[0][:, :, :, None] * D2[0][ii, None, None, :]
                rows.append(r.ravel()); cols.append(c_x.ravel()); vals.append(v_x.ravel())
                # y-derivative couples (i, l, k)
                c_y = np.broadcast_to(
                    lid[ii, :, ii].transpose(0, 2, 1)[:, None, :, :], (m, m, m, p)
                )
                v_y = -coeffs[1][:, :, :, None] * D2[1][None, ii, None, :]
                rows.append(r.ravel()); cols.append(c_y.ravel()); vals.append(v_y.ravel())
                # z-derivative couples (i, j, l)
                c_z = np.broadcast_to(lid[ii, ii, :][:, :, None, :], (m, m, m, p))
                v_z = -coeffs[2][:, :, :, None] * D2[2][None, None, ii, :]
                rows.append(r.ravel()); cols.append(c_z.ravel()); vals.append(v_z.ravel())

                rows.append(core.ravel()); cols.append(core.ravel()); vals.append(cc.ravel())

                cell_pos = (cx, cy, cz)
                for axis in range(3):
                    for loc, sign in ((0, -1.0), (p - 1, 1.0)):
                        internal = (
                            (cell_pos[axis] > 0 if loc == 0
                             else cell_pos[axis] < tiling[axis] - 1)
                            or axis in periodic_axes
                        )
                        if not internal:
                            continue
                        sel = [ii, ii, ii]
                        sel[axis] = loc
                        face = lid[tuple(sel)]
                        r2 = np.broadcast_to(face[:, :, None], (m, m, p))
                        sel_c = [ii, ii, ii]
                        sel_c[axis] = slice(None)
                        block = lid[tuple(sel_c)]
                        # move the free axis last
                        order = [0, 1, 2]
                        order.remove(axis)
                        block = np.transpose(block, order + [axis])
                        v2 = sign * np.broadcast_to(D[axis][loc, None, None, :], (m, m, p))
                        rows.append(r2.ravel())
                        cols.append(block.ravel())
                        vals.append(v2.ravel())


def active_dof_count(tiling, p, periodic_axes=()):
    """Closed-form count of active nodes for a given tiling and order."""
    dim = len(tiling)
    lat = [t * (p - 1) if a in periodic_axes else t * (p - 1) + 1
           for a, t in enumerate(tiling)]
    nv = [t if a in periodic_axes else t + 1 for a, t in enumerate(tiling)]
    ne = [lat[a] - nv[a] for a in range(dim)]
    total = int(np.prod(lat))
    if dim == 2:
        return total - nv[0] * nv[1]
    if dim == 3:
        multi = (nv[0] * nv[1] * ne[2] + nv[0] * ne[1] * nv[2]
                 + ne[0] * nv[1] * nv[2] + nv[0] * nv[1] * nv[2])
        return total - multi
    raise ValueError("tiling must be 2D or 3D")


def interface_sqrt_weights(n_cells, p, length, dim=2):
    """Square roots of the quadrature weights at the active nodes of one
    interface plane, in canonical node order.

    2D problems have 1D interfaces (n_cells scalar); 3D problems have 2D
    interfaces (n_cells = (ny, nz)). Endpoint nodes of each cell edge are
    inactive, so their weights are dropped.
    """
    if dim == 2:
        w_cell = clenshaw_curtis_weights(p, 0.0, length / n_cells)[1:-1]
        return np.sqrt(np.tile(w_cell, n_cells))
    (ny, nz) = n_cells
    (Ly, Lz) = length
    wy = np.tile(clenshaw_curtis_weights(p, 0.0, Ly / ny)[1:-1], ny)
    wz = np.tile(clenshaw_curtis_weights(p, 0.0, Lz / nz)[1:-1], nz)
    return np.sqrt(np.outer(wy, wz).ravel())


def evaluate_on_grid(system: SparseSystem, u_full, n_eval):
    """Evaluate a spectral solution on an n_eval^dim uniform grid.

    Per cell, a full tensor Chebyshev fit is recovered from the active nodes by
    least squares (corners are inactive, so the Vandermonde is rectangular) and
    evaluated at the uniform points falling inside the cell.
    """
    if system.backend != "hps" or system.dim != 2:
        raise ValueError("grid evaluation is implemented for the 2D spectral backend")
    p = system.params["p"]
    tiling = system.params["tiling"]
    region = system.params["region"]
    widths = system.params["widths"]

    xg = np.linspace(region[0][0], region[0][1], n_eval)
    yg = np.linspace(region[1][0], region[1][1], n_eval)
    xx, yy = np.meshgrid(xg, yg, indexing="ij")
    targets = np.column_stack([xx.ravel(), yy.ravel()])

    # inactive corner values are recovered by extrapolating the 1D spectral
    # interpolant of each x-edge (the corner-less tensor fit is numerically
    # rank deficient); afterwards the full tensor interpolation is exact and
    # well conditioned
    ref = cheb_nodes(p)
    V_edge = np.polynomial.chebyshev.chebvander(ref[1:-1], p - 3)
    V_ends = np.polynomial.chebyshev.chebvander(np.array([-1.0, 1.0]), p - 3)
    extrap = V_ends @ np.linalg.inv(V_edge)  # (2, p-2): edge values -> endpoints
    V1 = np.polynomial.chebyshev.chebvander(ref, p - 1)
    V1_inv = np.linalg.inv(V1)

    # map each node to (cell, local slot)
    tol = system.coord_tol
    cell_of = np.minimum(
        ((targets[:, 0] - region[0][0]) / widths[0]).astype(int), tiling[0] - 1
    ), np.minimum(((targets[:, 1] - region[1][0]) / widths[1]).astype(int), tiling[1] - 1)

    values = np.zeros(targets.shape[0])
    node_lookup = _node_lookup(system, p, tiling, region, widths, tol)
    for cx in range(tiling[0]):
        for cy in range(tiling[1]):
            mask = (cell_of[0] == cx) & (cell_of[1] == cy)
            if not np.any(mask):
                continue
            ids = node_lookup[cx, cy]
            F = np.zeros((p, p))
            corner = np.zeros((p, p), dtype=bool)
            corner[np.ix_((0, p - 1), (0, p - 1))] = True
            F[~corner] = u_full[ids]
            F[np.ix_((0, p - 1), (0, p - 1))] = (extrap @ F[(0, p - 1), 1:-1].T).T
            C = V1_inv @ F @ V1_inv.T
            tx = 2.0 * (targets[mask, 0] - region[0][0] - cx * widths[0]) / widths[0] - 1.0
            ty = 2.0 * (targets[mask, 1] - region[1][0] - cy * widths[1]) / widths[1] - 1.0
            values[mask] = np.polynomial.chebyshev.chebval2d(tx, ty, C)
    return targets, values


def _node_lookup(system, p, tiling, region, widths, tol):
    """DOF ids of each cell's active tensor nodes, corner slots removed."""
    pts = system.points
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    lookup = {}
    # reconstruct lattice indices from coordinates
    ref01 = (cheb_nodes(p) + 1.0) * 0.5
    for cx in range(tiling[0]):
        gx = region[0][0] + (cx + ref01) * widths[0]
        for cy in range(tiling[1]):
            gy = region[1][0] + (cy + ref01) * widths[1]
            xx, yy = np.meshgrid(gx, gy, indexing="ij")
            want = np.column_stack([xx.ravel(), yy.ravel()])
            corner = np.zeros(p * p, dtype=bool)
            for ix in (0, p - 1):
                for iy in (0, p - 1):
                    corner[ix * p + iy] = True
            want = want[~corner]
            ids = _match_points(pts, order, want, tol)
            lookup[cx, cy] = ids
    return lookup


def _match_points(pts, order, want, tol):
    """Indices in pts of each row of `want`, via sorted binary search on x."""
    xs = pts[order, 0]
    ids = np.empty(want.shape[0], dtype=np.int64)
    for i, (x, y) in enumerate(want):
        lo = np.searchsorted(xs, x - 10 * tol)
        hi = np.searchsorted(xs, x + 10 * tol)
        cand = order[lo:hi]
        hit = cand[np.abs(pts[cand, 1] - y) <= 10 * tol]
        if len(hit) != 1:
            raise AssertionError(f"node lookup failed at ({x}, {y})")
        ids[i] = hit[0]
    return ids
