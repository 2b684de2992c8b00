"""Slab tessellation of a box domain and the DOF index bookkeeping.

The domain is cut by parallel interface planes perpendicular to axis 0. Each
interface carries a double-wide slab spanning its two neighboring single
slabs; the local Dirichlet problems live on those. All index sets used by the
assembly algorithms (interior, boundary, central interface, outer interfaces)
are derived here from the per-slab discretizations, together with the global
interface DOF layout.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np


class ConformityError(ValueError):
    """Discretizations of neighboring slabs disagree on a shared interface."""


@dataclass(frozen=True)
class SlabDecomposition:
    """Geometry of the interface planes cutting the box along axis 0.

    Interfaces are 0-indexed; double slab j is centered on interface j and
    spans (x_{j-1}, x_{j+1}), with x_{-1} = 0 and x_{n} = L for the open
    topology and cyclic neighbors for the periodic one.
    """

    extents: tuple
    interfaces: tuple
    topology: str = "open"

    def __post_init__(self):
        xs = np.asarray(self.interfaces, dtype=float)
        L = self.extents[0]
        if len(xs) < 1:
            raise ValueError("need at least one interface; no reduced system exists")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("interface coordinates must be strictly increasing")
        if self.topology == "open":
            if xs[0] <= 0 or xs[-1] >= L:
                raise ValueError("open-topology interfaces must be interior to the box")
        elif self.topology == "periodic":
            if xs[0] <= 0 or xs[-1] > L:
                raise ValueError("periodic interfaces must lie in (0, L]")
        else:
            raise ValueError(f"unknown topology {self.topology!r}")

    @property
    def dim(self):
        return len(self.extents)

    @property
    def n_interfaces(self):
        return len(self.interfaces)

    @property
    def H(self):
        """Uniform interface spacing (None when the spacing is irregular)."""
        xs = np.asarray(self.interfaces)
        L = self.extents[0]
        if self.topology == "open":
            gaps = np.diff(np.concatenate([[0.0], xs, [L]]))
        else:
            gaps = np.diff(np.concatenate([[xs[-1] - L], xs]))
        return float(gaps[0]) if np.allclose(gaps, gaps[0], rtol=1e-12) else None

    def neighbors(self, j):
        """Interface indices adjacent to interface j (the sources of its blocks)."""
        n = self.n_interfaces
        if self.topology == "periodic":
            if n == 1:
                return []
            if n == 2:
                return [(j + 1) % n]
            return [(j - 1) % n, (j + 1) % n]
        return [jj for jj in (j - 1, j + 1) if 0 <= jj < n]

    def interface_coord(self, j):
        return float(self.interfaces[j % self.n_interfaces])

    def double_slab_bounds(self, j):
        """Axis-0 bounds of the double slab around interface j (may be
        unwrapped past [0, L] under the periodic topology)."""
        xs = np.asarray(self.interfaces)
        n = self.n_interfaces
        L = self.extents[0]
        if self.topology == "open":
            lo = 0.0 if j == 0 else xs[j - 1]
            hi = L if j == n - 1 else xs[j + 1]
        else:
            lo = xs[j - 1] if j >= 1 else xs[n - 1] - L
            hi = xs[j + 1] if j + 1 < n else xs[0] + L
        return float(lo), float(hi)

    def single_slab_bounds(self, i):
        """Bounds of single slab i; open topology has n_interfaces+1 of them."""
        xs = np.asarray(self.interfaces)
        n = self.n_interfaces
        L = self.extents[0]
        if self.topology == "open":
            lo = 0.0 if i == 0 else xs[i - 1]
            hi = L if i == n else xs[i]
        else:
            lo = xs[i - 1] if i >= 1 else xs[n - 1] - L
            hi = xs[i]
        return float(lo), float(hi)

    @property
    def n_single_slabs(self):
        return self.n_interfaces + 1 if self.topology == "open" else self.n_interfaces

    def summary(self):
        return {
            "n_interfaces": self.n_interfaces,
            "H": self.H,
            "topology": self.topology,
        }


def decompose(extents, n_interfaces, topology="open"):
    """Uniformly spaced decomposition with n_interfaces cutting planes."""
    if n_interfaces < 1:
        raise ValueError("need at least one interface; no reduced system exists")
    extents = tuple(float(e) for e in extents)
    if any(e <= 0 for e in extents):
        raise ValueError("box extents must be positive")
    L = extents[0]
    if topology == "open":
        H = L / (n_interfaces + 1)
        xs = tuple((k + 1) * H for k in range(n_interfaces))
    elif topology == "periodic":
        H = L / n_interfaces
        xs = tuple((k + 1) * H for k in range(n_interfaces))
    else:
        raise ValueError(f"unknown topology {topology!r}")
    return SlabDecomposition(extents=extents, interfaces=xs, topology=topology)


@dataclass(frozen=True)
class SlabIndexSets:
    """Local DOF index sets of one double slab, as indices into its system."""

    interior: np.ndarray
    boundary: np.ndarray
    central: np.ndarray                  # subset of `interior`
    central_pos: np.ndarray              # positions of `central` inside `interior`
    outer: Dict[int, np.ndarray]         # interface index -> indices into the system
    physical: np.ndarray                 # Dirichlet DOFs carrying true data

    @property
    def n_central(self):
        return len(self.central)


@dataclass(frozen=True)
class IndexSets:
    """Index sets of all double slabs plus the global interface layout.

    The global interface vector concatenates per-interface blocks in interface
    order; within one interface, nodes follow the canonical order (lexicographic
    in the non-slab axes), which is what makes the cross-slab identification
    C_{j'} <-> J_{j,j'} a pure index computation.
    """

    per_slab: List[SlabIndexSets]
    block_sizes: np.ndarray
    block_offsets: np.ndarray

    @property
    def total(self):
        return int(self.block_offsets[-1])

    def block(self, j):
        """Slice of interface j inside the global interface vector."""
        return slice(int(self.block_offsets[j]), int(self.block_offsets[j + 1]))


def index_sets(decomp: SlabDecomposition, systems: Sequence, tol=None) -> IndexSets:
    """Build all index sets from the per-double-slab discretizations.

    `systems` holds one SparseSystem per interface, discretizing its double
    slab. Node sets on shared interfaces must conform; the check compares the
    canonically ordered coordinates seen from every slab touching the
    interface and names the offending interface on failure.
    """
    n = decomp.n_interfaces
    if len(systems) != n:
        raise ValueError(f"expected {n} slab systems, got {len(systems)}")
    L = decomp.extents[0]

    per_slab = []
    central_coords = {}
    outer_coords = {}
    for j, system in enumerate(systems):
        if tol is None:
            slab_tol = system.coord_tol
        else:
            slab_tol = tol
        xj = decomp.interface_coord(j)
        interior = system.interior_idx
        boundary = system.dirichlet_idx
        central = _select_plane(system, interior, xj, slab_tol, decomp.extents)
        if len(central) == 0:
            raise ConformityError(f"no central DOFs found on interface {j}")
        pos_map = np.full(system.n_dofs, -1, dtype=np.int64)
        pos_map[interior] = np.arange(len(interior))
        central_pos = pos_map[central]
        outer = {}
        for jj in decomp.neighbors(j):
            xjj = _neighbor_coord(decomp, j, jj)
            sel = _select_plane(system, boundary, xjj, slab_tol, decomp.extents)
            if len(sel) == 0:
                raise ConformityError(
                    f"slab {j} has no boundary DOFs on interface {jj}"
                )
            outer[jj] = sel
        outer_ids = (
            np.concatenate(list(outer.values())) if outer else np.array([], dtype=int)
        )
        physical = np.setdiff1d(boundary, outer_ids)
        per_slab.append(
            SlabIndexSets(
                interior=interior,
                boundary=boundary,
                central=central,
                central_pos=central_pos,
                outer=outer,
                physical=physical,
            )
        )
        central_coords[j] = _plane_coords(system, central, decomp.topology, L)
        for jj, sel in outer.items():
            outer_coords[(j, jj)] = _plane_coords(system, sel, decomp.topology, L)

    # conformity: every view of interface jj must list the same physical points
    # in the same canonical order
    for (j, jj), coords in outer_coords.items():
        ref = central_coords[jj]
        ctol = tol if tol is not None else systems[j].coord_tol
        if ref.shape != coords.shape or not np.allclose(ref, coords, atol=10 * ctol):
            raise ConformityError(
                f"interface {jj}: node set seen from slab {j} does not match its "
                f"central discretization ({coords.shape[0]} vs {ref.shape[0]} nodes)"
            )

    sizes = np.array([per_slab[j].n_central for j in range(n)], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    return IndexSets(per_slab=per_slab, block_sizes=sizes, block_offsets=offsets)


def _neighbor_coord(decomp, j, jj):
    """Coordinate of interface jj as seen from slab j (unwrapped if cyclic)."""
    x = decomp.interface_coord(jj)
    L = decomp.extents[0]
    if decomp.topology == "periodic":
        lo, hi = decomp.double_slab_bounds(j)
        for shift in (-L, 0.0, L):
            if lo - 1e-12 * L <= x + shift <= hi + 1e-12 * L:
                return x + shift
    return x


def _select_plane(system, candidates, coord, tol, extents):
    """Plane nodes among `candidates`, excluding the transverse physical walls
    (their values always come from the boundary data, never from the interface
    unknowns), in canonical order."""
    pts = system.points[candidates]
    mask = np.abs(pts[:, 0] - coord) <= tol
    for a in range(1, pts.shape[1]):
        mask &= (pts[:, a] > tol) & (pts[:, a] < extents[a] - tol)
    sel = candidates[mask]
    return sel[_canonical_order(system.points[sel])]


def _canonical_order(pts):
    if pts.shape[1] == 1:
        return np.arange(pts.shape[0])
    keys = tuple(pts[:, axis] for axis in range(pts.shape[1] - 1, 0, -1))
    return np.lexsort(keys)


def _plane_coords(system, idx, topology, L):
    """Transverse coordinates of plane nodes, canonical order (wrap-invariant)."""
    pts = system.points[idx]
    return pts[:, 1:] if pts.shape[1] > 1 else np.zeros((len(idx), 0))
