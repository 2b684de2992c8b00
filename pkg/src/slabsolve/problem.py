"""PDE coefficient fields, boundary data, and reference solutions.

The operator class is a scalar elliptic operator with a diagonal second-order
part and a real zero-order term,

    A u = -a_xx(x) u_xx - a_yy(x) u_yy [- a_zz(x) u_zz] + c(x) u,

which covers Laplace (c = 0), Helmholtz (c = -kappa^2), and the
variable-coefficient test operators used throughout. Coefficient callbacks are
pure functions of point arrays of shape (n, dim) and may be evaluated
concurrently.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

CoefficientFn = Callable[[np.ndarray], np.ndarray]


def _const(value):
    def f(points):
        return np.full(points.shape[0], float(value))

    return f


@dataclass(frozen=True)
class EllipticOperator:
    """Diagonal-second-order elliptic operator with zero-order term."""

    dim: int
    axx: CoefficientFn
    ayy: Optional[CoefficientFn] = None
    azz: Optional[CoefficientFn] = None
    c: CoefficientFn = field(default_factory=lambda: _const(0.0))
    name: str = "operator"

    def diffusion(self, axis):
        coeff = (self.axx, self.ayy, self.azz)[axis]
        if coeff is None:
            raise ValueError(f"operator has no axis-{axis} coefficient")
        return coeff

    def check_points(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dim:
            raise ValueError(
                f"points have dim {points.shape[1]}, operator has dim {self.dim}"
            )
        return points

    def validate_at(self, points):
        """Assembly-time guard: diffusion coefficients must stay positive."""
        points = self.check_points(points)
        for axis in range(self.dim):
            vals = self.diffusion(axis)(points)
            if np.any(vals <= 0.0):
                bad = points[np.argmin(vals)]
                raise ValueError(
                    f"nonpositive axis-{axis} diffusion coefficient at {bad}"
                )


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data on the boundary and body load on the volume."""

    dirichlet: CoefficientFn
    load: CoefficientFn

    @staticmethod
    def zero():
        return BoundaryData(dirichlet=_const(0.0), load=_const(0.0))

    @staticmethod
    def from_functions(f=None, g=None):
        return BoundaryData(
            dirichlet=f if f is not None else _const(0.0),
            load=g if g is not None else _const(0.0),
        )


@dataclass(frozen=True)
class ReferenceSolution:
    """Known solution used for error reporting, with its provenance."""

    u: CoefficientFn
    provenance: str = "manufactured"

    def values(self, points):
        return self.u(np.atleast_2d(np.asarray(points, dtype=float)))


def make_helmholtz(kappa, dim):
    """Constant-coefficient operator -Delta u - kappa^2 u; kappa=0 is Laplace."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if dim not in (1, 2, 3):
        raise ValueError("dim must be 1, 2 or 3")
    name = "laplace" if kappa == 0 else f"helmholtz(kappa={kappa:g})"
    return EllipticOperator(
        dim=dim,
        axx=_const(1.0),
        ayy=_const(1.0) if dim >= 2 else None,
        azz=_const(1.0) if dim == 3 else None,
        c=_const(-(kappa**2)),
        name=name,
    )


def make_variable_coefficient_2d(kappa=0.0):
    """2D operator -(1 + cos(2 pi x)/2) u_xx - (1 + (x^2/2) sin(3 pi y)) u_yy.

    With kappa > 0 a damping term -kappa^2 u is added; conditioning statements
    are only made for the undamped (positive definite) case.
    """

    def axx(points):
        return 1.0 + 0.5 * np.cos(2.0 * np.pi * points[:, 0])

    def ayy(points):
        return 1.0 + 0.5 * points[:, 0] ** 2 * np.sin(3.0 * np.pi * points[:, 1])

    name = "vc2d" if kappa == 0.0 else f"vc2d_damped(kappa={kappa:g})"
    return EllipticOperator(
        dim=2, axx=axx, ayy=ayy, c=_const(-(kappa**2)), name=name
    )


@dataclass(frozen=True)
class GaussianBump:
    center: tuple
    width: float
    amplitude: float


def make_waveguide(kappa, bumps: Sequence[GaussianBump]):
    """Variable sound-speed Helmholtz problem -Delta u - kappa^2 (1 - b) u = 0.

    b is a sum of Gaussian bumps; the field 1 - b must stay inside (0, 1], so
    individual amplitudes >= 1 are rejected outright and the summed field is
    probed on a grid at construction time. Dirichlet data is the constant 1.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    bumps = list(bumps)
    for bump in bumps:
        if bump.amplitude >= 1.0:
            raise ValueError(
                f"bump amplitude {bump.amplitude} >= 1 would flip the operator sign"
            )
        if bump.amplitude < 0.0 or bump.width <= 0.0:
            raise ValueError("bump amplitude must be >= 0 and width > 0")

    def b_field(points):
        total = np.zeros(points.shape[0])
        for bump in bumps:
            d2 = np.zeros(points.shape[0])
            for axis, c in enumerate(bump.center):
                d2 += (points[:, axis] - c) ** 2
            total += bump.amplitude * np.exp(-d2 / (2.0 * bump.width**2))
        return total

    def c(points):
        return -(kappa**2) * (1.0 - b_field(points))

    op = EllipticOperator(
        dim=2,
        axx=_const(1.0),
        ayy=_const(1.0),
        c=c,
        name=f"waveguide(kappa={kappa:g})",
    )
    # probe the summed field; overlapping bumps may exceed 1 even when each
    # individual amplitude is admissible
    grid = np.linspace(0.0, 1.0, 101)
    xx, yy = np.meshgrid(grid, grid, indexing="ij")
    probe = np.column_stack([xx.ravel(), yy.ravel()])
    bmax = b_field(probe).max()
    if bmax >= 1.0:
        raise ValueError(f"summed bump field reaches {bmax:.3f} >= 1")
    data = BoundaryData.from_functions(f=_const(1.0), g=None)
    return op, data, b_field


def waveguide_lattice(kappa=156.703, rows=5, cols=9, amplitude=0.9, width=0.018):
    """Crystal-lattice bump preset: rows of bumps with the middle row removed,
    leaving a horizontal waveguide channel through the slab stack."""
    bumps = []
    ys = np.linspace(0.2, 0.8, rows)
    xs = np.linspace(0.1, 0.9, cols)
    mid = rows // 2
    for i, y in enumerate(ys):
        if i == mid:
            continue  # the channel
        for x in xs:
            bumps.append(GaussianBump(center=(x, y), width=width, amplitude=amplitude))
    return make_waveguide(kappa, bumps)


def point_source_reference(kappa, source=(-0.5, -0.5, -0.5)):
    """Exterior point-source solution cos(kappa r)/r of the 3D Helmholtz
    equation; the source must sit outside the domain (distance >= 0.25)."""
    source = np.asarray(source, dtype=float)

    def u(points):
        r = np.linalg.norm(points - source[None, :], axis=1)
        return np.cos(kappa * r) / r

    return ReferenceSolution(u=u, provenance=f"point source at {tuple(source)}")


def manufactured_sine(dim=2):
    """u = prod sin(pi x_i) with load g = -A u for the Laplace operator."""

    def u(points):
        vals = np.ones(points.shape[0])
        for axis in range(dim):
            vals *= np.sin(np.pi * points[:, axis])
        return vals

    def g(points):
        return dim * np.pi**2 * u(points)

    ref = ReferenceSolution(u=u, provenance="manufactured sine product")
    data = BoundaryData.from_functions(f=_const(0.0), g=g)
    return ref, data


def harmonic_reference():
    """Harmonic u = sinh(pi y) sin(pi x) (zero load) on the unit square."""

    def u(points):
        return np.sin(np.pi * points[:, 0]) * np.sinh(np.pi * points[:, 1]) / np.sinh(
            np.pi
        )

    ref = ReferenceSolution(u=u, provenance="harmonic sine/sinh")
    data = BoundaryData.from_functions(f=u, g=None)
    return ref, data


def random_smooth_dirichlet(seed, modes=4, dim=2):
    """Low-order trigonometric Dirichlet data with seeded coefficients.

    The same continuum function is produced for every discretization, so
    iteration counts can be compared across resolutions and orders.
    """
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((modes, modes)) / modes
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(2, modes))

    def f(points):
        vals = np.zeros(points.shape[0])
        for m in range(modes):
            fx = np.cos((m + 1) * np.pi * points[:, 0] + phases[0, m])
            for n in range(modes):
                fy = np.cos((n + 1) * np.pi * points[:, 1] + phases[1, n])
                vals += coeffs[m, n] * fx * fy
        return vals

    return BoundaryData.from_functions(f=f, g=None)
