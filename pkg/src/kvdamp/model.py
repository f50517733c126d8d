"""Geometry, radial grids and the per-mode Kelvin-Voigt operator.

The domain is the disc of radius ``R0`` split at ``r = 1``: the inner disc is
undamped, the annulus carries a constant viscoelastic coefficient.  After a
Fourier decomposition in the angle every field is a radial profile for one
integer mode ``m``.

Discretisation is a conservative finite-volume scheme in the r-weighted
inner product (equivalently lumped P1 elements).  With

* ``S1``  the stiffness form  sum_cells r |du|^2 / dr + m^2 |u|^2 / r^2 mass,
* ``Sa``  the same form weighted by the damping coefficient,
* ``M``   the lumped r-weighted mass,

the semi-discrete system is ``u' = v``, ``M v' = -S1 u - Sa v``.  The
transmission conditions at ``r = 1`` are built into the flux balance of the
interface cell, so no interface bookkeeping is needed elsewhere.

All norms carry the angular factor ``2 pi`` so that they are the true L^2 /
energy norms of ``f(r) exp(i m theta)`` on the disc.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels

ANGULAR = 2.0 * np.pi
INTERFACE = 1.0


@dataclass(frozen=True)
class DomainSpec:
    """Disc-in-disc geometry with constant damping on the outer annulus."""

    outer_radius: float = 2.0
    damping_value: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.outer_radius) or self.outer_radius <= INTERFACE:
            raise ValueError(f"outer_radius must exceed 1, got {self.outer_radius}")
        if not np.isfinite(self.damping_value) or self.damping_value < 0:
            raise ValueError(f"damping_value must be non-negative, got {self.damping_value}")

    @property
    def interface_radius(self) -> float:
        return INTERFACE

    def damping(self, r):
        """Damping coefficient a(r): zero inside the unit disc."""
        r = np.asarray(r, dtype=float)
        return np.where(r > INTERFACE, self.damping_value, 0.0)


@dataclass(frozen=True)
class RadialGrid:
    """Nodes on [0, R0] with a node sitting exactly on the interface."""

    nodes: np.ndarray
    interface_index: int
    spec: DomainSpec

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def max_spacing(self) -> float:
        return float(self.spacing.max())

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    def dual_bounds(self):
        """Lower and upper radii of the dual cell around every node."""
        r = self.nodes
        lo = np.empty_like(r)
        hi = np.empty_like(r)
        lo[0] = r[0]
        lo[1:] = self.midpoints
        hi[:-1] = self.midpoints
        hi[-1] = r[-1]
        return lo, hi

    def inner_mask(self) -> np.ndarray:
        """Nodes in the closed undamped disc (interface included)."""
        return np.arange(self.size) <= self.interface_index

    def outer_mask(self) -> np.ndarray:
        """Nodes in the closed damped annulus (interface included)."""
        return np.arange(self.size) >= self.interface_index


def build_grid(spec: DomainSpec, n_nodes: int, inner_fraction=None) -> RadialGrid:
    """Uniform pieces on [0, 1] and [1, R0] joined at the interface.

    ``n_nodes`` is the number of intervals in total.  By default the split is
    proportional to length so the spacing is (almost) uniform.
    """
    n_nodes = int(n_nodes)
    if n_nodes < 4:
        raise ValueError("need at least 4 intervals")
    R0 = spec.outer_radius
    if inner_fraction is None:
        inner_fraction = 1.0 / R0
    n_in = int(round(n_nodes * inner_fraction))
    n_in = min(max(n_in, 2), n_nodes - 2)
    n_out = n_nodes - n_in
    left = np.linspace(0.0, INTERFACE, n_in + 1)
    right = np.linspace(INTERFACE, R0, n_out + 1)
    nodes = np.concatenate([left, right[1:]])
    return RadialGrid(nodes=nodes, interface_index=n_in, spec=spec)


@dataclass
class ModeField:
    """Radial profile of one Fourier mode, one complex value per node."""

    m: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)


@dataclass
class ModeState:
    """Pair (u, v) = (displacement, velocity) for one Fourier mode."""

    u: ModeField
    v: ModeField

    @property
    def m(self) -> int:
        return self.u.m

    def copy(self):
        return ModeState(ModeField(self.m, self.u.values.copy()), ModeField(self.m, self.v.values.copy()))


def _cell_forms(grid: RadialGrid, m: int, coeff_cells, coeff_mass):
    """Diagonal/off-diagonal of sum_cells c r|du|^2/dr + m^2 sum_nodes w/r^2 |u|^2."""
    r = grid.nodes
    dr = grid.spacing
    rh = grid.midpoints
    c = coeff_cells * rh / dr
    d = np.zeros(grid.size)
    d[:-1] += c
    d[1:] += c
    if m != 0:
        ang = np.zeros(grid.size)
        ang[1:] = m * m / r[1:] ** 2
        d += ang * coeff_mass
    e = -c
    return d, e


@dataclass
class ModeOperators:
    """Finite-volume forms and the generator restricted to Fourier mode m.

    Vectors passed in and out are full-length (one entry per node).  Entries
    at constrained nodes (outer boundary, and the origin when m != 0) are
    ignored on input and returned as zero.
    """

    grid: RadialGrid
    m: int
    mass: np.ndarray = field(repr=False)
    damped_mass: np.ndarray = field(repr=False)
    stiff_d: np.ndarray = field(repr=False)
    stiff_e: np.ndarray = field(repr=False)
    damp_d: np.ndarray = field(repr=False)
    damp_e: np.ndarray = field(repr=False)
    free: np.ndarray = field(repr=False)

    @property
    def spec(self) -> DomainSpec:
        return self.grid.spec

    @property
    def n_free(self) -> int:
        return self.free.shape[0]

    # restriction helpers -------------------------------------------------
    def restrict(self, x):
        return np.asarray(x)[self.free]

    def extend(self, xf):
        out = np.zeros(self.grid.size, dtype=np.result_type(xf, float))
        out[self.free] = xf
        return out

    def free_forms(self):
        """(S1 diag, S1 off, Sa diag, Sa off, mass) on the free nodes."""
        f = self.free
        off = f[:-1]
        return (
            self.stiff_d[f],
            self.stiff_e[off],
            self.damp_d[f],
            self.damp_e[off],
            self.mass[f],
        )

    def _apply(self, d, e, x):
        x = np.asarray(x, dtype=complex)
        xf = x[self.free]
        f = self.free
        y = _kernels.tridiag_matvec(np.ascontiguousarray(d[f]), np.ascontiguousarray(e[f[:-1]]), np.ascontiguousarray(xf))
        return self.extend(y)

    def stiffness_apply(self, u):
        return self._apply(self.stiff_d, self.stiff_e, u)

    def damping_apply(self, v):
        return self._apply(self.damp_d, self.damp_e, v)

    # continuous operators --------------------------------------------------
    def laplacian(self, u):
        """Discrete radial Laplacian L_m u = u'' + u'/r - m^2 u / r^2."""
        out = np.zeros(self.grid.size, dtype=complex)
        s = self.stiffness_apply(u)
        out[self.free] = -s[self.free] / self.mass[self.free]
        return out

    def coupled_flux(self, u, v):
        """K_m(u, v) = L_m u + div(a grad v) in mode m, flux-balanced at r = 1."""
        out = np.zeros(self.grid.size, dtype=complex)
        s = self.stiffness_apply(u) + self.damping_apply(v)
        out[self.free] = -s[self.free] / self.mass[self.free]
        return out

    def generator(self, U: ModeState) -> ModeState:
        """A_m (u, v) = (v, K_m(u, v))."""
        if U.m != self.m:
            raise ValueError(f"state mode {U.m} does not match operator mode {self.m}")
        v = self.extend(self.restrict(U.v.values))
        return ModeState(ModeField(self.m, v), ModeField(self.m, self.coupled_flux(U.u.values, U.v.values)))

    # inner products ------------------------------------------------------
    def stiffness_form(self, f, g=None):
        g = f if g is None else g
        return ANGULAR * np.vdot(self.extend(self.restrict(g)), self.stiffness_apply(f))

    def mass_form(self, f, g=None):
        g = f if g is None else g
        mf = self.mass * self.extend(self.restrict(f))
        return ANGULAR * np.vdot(self.extend(self.restrict(g)), mf)

    def energy_inner(self, U: ModeState, V: ModeState) -> complex:
        """<U, V>_H = int grad u . conj(grad u') + v conj(v'), angular factor included."""
        return self.stiffness_form(U.u.values, V.u.values) + self.mass_form(U.v.values, V.v.values)

    def dissipation(self, v) -> float:
        """int_{annulus} a |grad v|^2 for the discrete field v."""
        return float(np.real(ANGULAR * np.vdot(self.extend(self.restrict(v)), self.damping_apply(v))))

    # sparse blocks ---------------------------------------------------------
    def sparse_forms(self):
        """(S1, Sa, M) as sparse matrices on the free nodes."""
        d1, e1, da, ea, mass = self.free_forms()
        S1 = sp.diags([e1, d1, e1], [-1, 0, 1], format="csc")
        Sa = sp.diags([ea, da, ea], [-1, 0, 1], format="csc")
        M = sp.diags(mass, 0, format="csc")
        return S1, Sa, M


def assemble_mode_operators(grid: RadialGrid, m: int) -> ModeOperators:
    """Build the finite-volume forms for mode ``m`` on ``grid``."""
    m = int(m)
    spec = grid.spec
    lo, hi = grid.dual_bounds()
    mass = 0.5 * (hi**2 - lo**2)
    # damped part of every dual cell
    r1 = INTERFACE
    dlo = np.maximum(lo, r1)
    dhi = np.maximum(hi, r1)
    damped_mass = spec.damping_value * 0.5 * (dhi**2 - dlo**2)
    cell_a = spec.damping(grid.midpoints)
    stiff_d, stiff_e = _cell_forms(grid, m, 1.0, mass)
    damp_d, damp_e = _cell_forms(grid, m, cell_a, damped_mass)
    n = grid.size
    free = np.arange(n - 1)
    if m != 0:
        free = free[1:]
    return ModeOperators(
        grid=grid,
        m=m,
        mass=mass,
        damped_mass=damped_mass,
        stiff_d=stiff_d,
        stiff_e=stiff_e,
        damp_d=damp_d,
        damp_e=damp_e,
        free=free,
    )


def energy_norm(U: ModeState, ops: ModeOperators) -> float:
    """sqrt(||grad u||^2 + ||v||^2) on the disc."""
    return float(np.sqrt(max(np.real(ops.energy_inner(U, U)), 0.0)))


def energy(U: ModeState, ops: ModeOperators) -> float:
    """E = (||grad u||^2 + ||v||^2) / 2."""
    return 0.5 * energy_norm(U, ops) ** 2


def graph_norm(U: ModeState, ops: ModeOperators) -> float:
    """||U||_H + ||A U||_H."""
    return energy_norm(U, ops) + energy_norm(ops.generator(U), ops)


def state_from_profiles(grid: RadialGrid, m: int, u_fun, v_fun) -> ModeState:
    """Sample callables u(r), v(r) on the grid (constrained nodes zeroed)."""
    r = grid.nodes
    u = np.asarray(u_fun(r), dtype=complex)
    v = np.asarray(v_fun(r), dtype=complex)
    u = u.copy()
    v = v.copy()
    u[-1] = v[-1] = 0.0
    if m != 0:
        u[0] = v[0] = 0.0
    return ModeState(ModeField(m, u), ModeField(m, v))
