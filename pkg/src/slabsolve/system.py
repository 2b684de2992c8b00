"""Common sparse-system container shared by the FD and spectral backends."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

# DOF roles
INTERIOR = 0   # PDE collocation row
FACE = 1       # cross-cell derivative-continuity row (spectral backend only)
DIRICHLET = 2  # identity row carrying boundary data


@dataclass
class SparseSystem:
    """Square sparse discretization with node metadata.

    Rows at INTERIOR nodes collocate the PDE, FACE rows enforce continuity of
    normal derivatives across spectral cells, DIRICHLET rows are identities
    whose data is moved to the right-hand side when the interior block is
    solved. `coord_map` translates node coordinates into the coefficient
    sampling space (used to wrap unrolled periodic slabs).
    """

    matrix: sp.csr_matrix
    points: np.ndarray
    role: np.ndarray
    backend: str
    params: dict = field(default_factory=dict)
    coord_tol: float = 1e-9
    coord_map: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        self._interior = np.flatnonzero(self.role != DIRICHLET)
        self._dirichlet = np.flatnonzero(self.role == DIRICHLET)

    @property
    def n_dofs(self):
        return self.matrix.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def interior_idx(self):
        return self._interior

    @property
    def dirichlet_idx(self):
        return self._dirichlet

    def sample_points(self, idx=None):
        pts = self.points if idx is None else self.points[idx]
        return self.coord_map(pts) if self.coord_map is not None else pts

    def interior_matrix(self):
        return self.matrix[self._interior][:, self._interior].tocsc()

    def coupling_matrix(self, col_idx):
        """Interior-rows x given-columns coupling block A(I, J)."""
        return self.matrix[self._interior][:, col_idx].tocsc()

    def interface_nodes(self, coord, axis=0, tol=None):
        """Non-Dirichlet DOFs on the plane {x_axis = coord}, canonical order."""
        tol = self.coord_tol if tol is None else tol
        mask = np.abs(self.points[:, axis] - coord) <= tol
        idx = np.flatnonzero(mask & (self.role != DIRICHLET))
        pts = self.points[idx]
        if self.dim > 1:
            keys = tuple(pts[:, a] for a in range(self.dim - 1, 0, -1))
            idx = idx[np.lexsort(keys)]
        return idx


def build_rhs(op, data, system: SparseSystem):
    """Load vector over the interior DOFs with Dirichlet data eliminated.

    Interior PDE rows collocate the body load, derivative-continuity rows are
    homogeneous, and -A(I, J) f(J) carries the boundary data into the stencil
    rows that touch it.
    """
    if op.dim != system.dim:
        raise ValueError(f"operator dim {op.dim} != system dim {system.dim}")
    I = system.interior_idx
    J = system.dirichlet_idx
    b = np.zeros(len(I))
    pde_rows = system.role[I] == INTERIOR
    if np.any(pde_rows):
        pts = system.sample_points(I[pde_rows])
        b[pde_rows] = data.load(pts)
    if len(J):
        f = data.dirichlet(system.sample_points(J))
        b -= system.coupling_matrix(J) @ f
    return b


def collocation_rhs(op, data, system: SparseSystem):
    """Raw right-hand side over all DOFs: body load at PDE rows, zero at
    derivative-continuity rows, boundary data at Dirichlet rows."""
    if op.dim != system.dim:
        raise ValueError(f"operator dim {op.dim} != system dim {system.dim}")
    b = np.zeros(system.n_dofs)
    pde = np.flatnonzero(system.role == INTERIOR)
    if len(pde):
        b[pde] = data.load(system.sample_points(pde))
    J = system.dirichlet_idx
    if len(J):
        b[J] = data.dirichlet(system.sample_points(J))
    return b


def dirichlet_values(data, system: SparseSystem):
    J = system.dirichlet_idx
    return data.dirichlet(system.sample_points(J)) if len(J) else np.zeros(0)


def full_vector(system: SparseSystem, u_interior, u_dirichlet):
    u = np.zeros(system.n_dofs)
    u[system.interior_idx] = u_interior
    u[system.dirichlet_idx] = u_dirichlet
    return u
