"""Semiclassical elliptic problem in the damped annulus, one Fourier mode.

Solves  (hbar^2 L_m - i) w = 0  on 1 < r < R0  with  w'(1) = F  and
w(R0) = 0, where L_m is the radial Laplacian of mode m.  The Neumann
condition enters through the half dual cell at r = 1 (flux form), which keeps
the scheme second order and consistent with the time-domain operators.

The solution decays away from r = 1 on the scale 1/|kappa| with
kappa = sqrt(m^2 + i/hbar^2), so the grid must resolve that length; solves on
under-resolved grids are rejected.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import ANGULAR, DomainSpec, ModeField, RadialGrid, build_grid

LAYER_RESOLUTION = 8.0


def decay_rate(m: int, hbar: float) -> complex:
    """kappa = sqrt(m^2 + i / hbar^2), principal branch."""
    return np.sqrt(complex(m * m, 1.0 / hbar**2))


def dn_symbol(m: int, hbar: float) -> complex:
    """Half-space model of the DN value: -sqrt(hbar^2 m^2 + i)."""
    return -np.sqrt(complex((hbar * m) ** 2, 1.0))


def required_spacing(m: int, hbar: float) -> float:
    """Largest admissible spacing near r = 1: 1/(8 |kappa|)."""
    return 1.0 / (LAYER_RESOLUTION * abs(decay_rate(m, hbar)))


def elliptic_grid(spec: DomainSpec, m: int, hbar: float, per_layer: float = 32.0) -> RadialGrid:
    """Grid whose annulus spacing is 1/(per_layer |kappa|); the disc part is coarse."""
    dr = 1.0 / (per_layer * abs(decay_rate(m, hbar)))
    n_out = int(np.ceil((spec.outer_radius - 1.0) / dr))
    n_in = 8
    return build_grid(spec, n_in + n_out, inner_fraction=n_in / (n_in + n_out))


@dataclass
class EllipticSolution:
    hbar: float
    m: int
    w: ModeField
    neumann_data: complex
    norms: dict = field(default_factory=dict)

    @property
    def trace(self) -> complex:
        return complex(self.w.values[self._i0])

    _i0: int = 0


def _check_resolution(grid: RadialGrid, m: int, hbar: float):
    r = grid.nodes
    i0 = grid.interface_index
    dr = np.diff(r[i0:])
    kap = abs(decay_rate(m, hbar))
    near = (r[i0:-1] - 1.0) <= LAYER_RESOLUTION / kap
    worst = float(dr[near].max())
    need = required_spacing(m, hbar)
    if worst > need * (1 + 1e-9):
        raise ValueError(
            f"grid does not resolve the boundary layer: spacing {worst:.3e} > {need:.3e} "
            f"(m={m}, hbar={hbar})"
        )


def _annulus_system(grid: RadialGrid, m: int, hbar: float):
    r = grid.nodes
    i0 = grid.interface_index
    ro = r[i0:]
    dr = np.diff(ro)
    rh = 0.5 * (ro[1:] + ro[:-1])
    c = rh / dr
    lo = np.empty_like(ro)
    hi = np.empty_like(ro)
    lo[0] = ro[0]
    lo[1:] = rh
    hi[:-1] = rh
    hi[-1] = ro[-1]
    wts = 0.5 * (hi**2 - lo**2)
    d = np.zeros(ro.size)
    d[:-1] += c
    d[1:] += c
    d += m * m / ro**2 * wts
    return ro, c, d, wts


def solve_mixed_dn(grid: RadialGrid, m: int, hbar: float, F: complex) -> EllipticSolution:
    """Mixed Neumann (at r = 1) / Dirichlet (at R0) solve in the annulus."""
    m = int(m)
    if not (0 < hbar <= 1):
        raise ValueError(f"hbar must lie in (0, 1], got {hbar}")
    _check_resolution(grid, m, hbar)
    i0 = grid.interface_index
    ro, c, d, wts = _annulus_system(grid, m, hbar)
    h2 = hbar * hbar
    # unknowns: nodes i0 .. N-1 (the last node is the Dirichlet node)
    nd = ro.size - 1
    diag = (-h2 * d[:nd] - 1j * wts[:nd]).astype(complex)
    off = (h2 * c[: nd - 1]).astype(complex)
    rhs = np.zeros(nd, dtype=complex)
    rhs[0] = h2 * F * ro[0]
    sol = _kernels.tridiag_solve(off, diag, off.copy(), rhs)
    if not np.all(np.isfinite(sol)):
        raise np.linalg.LinAlgError("elliptic solve produced non-finite values")
    vals = np.zeros(grid.size, dtype=complex)
    vals[i0 : i0 + nd] = sol
    out = EllipticSolution(hbar=float(hbar), m=m, w=ModeField(m, vals), neumann_data=complex(F))
    out._i0 = i0
    out.norms = annulus_norms(grid, m, vals)
    out.norms["residual"] = _interior_residual(diag, off, sol, rhs)
    return out


def _interior_residual(diag, off, sol, rhs):
    res = diag * sol - rhs
    res[:-1] += off * sol[1:]
    res[1:] += off * sol[:-1]
    scale = max(np.max(np.abs(diag * sol)), 1e-300)
    return float(np.max(np.abs(res)) / scale)


def annulus_norms(grid: RadialGrid, m: int, vals) -> dict:
    """L^2, gradient, trace and Hessian norms of a mode profile on the annulus."""
    r = grid.nodes
    i0 = grid.interface_index
    ro, c, d, wts = _annulus_system(grid, m, 1.0)
    f = np.asarray(vals, dtype=complex)[i0:]
    l2 = np.sqrt(ANGULAR * np.sum(wts * np.abs(f) ** 2))
    grad2 = np.sum(c * np.abs(np.diff(f)) ** 2) + m * m * np.sum(wts / ro**2 * np.abs(f) ** 2)
    grad = np.sqrt(ANGULAR * grad2)
    fp = np.gradient(f, ro, edge_order=2)
    fpp = np.gradient(fp, ro, edge_order=2)
    hrr = fpp
    hrt = 1j * m * (fp / ro - f / ro**2)
    htt = fp / ro - m * m * f / ro**2
    dens = (np.abs(hrr) ** 2 + 2 * np.abs(hrt) ** 2 + np.abs(htt) ** 2) * ro
    hess = np.sqrt(ANGULAR * np.trapezoid(dens, ro))
    t = abs(f[0])
    return {
        "l2": float(l2),
        "grad": float(grad),
        "hessian": float(hess),
        "trace": float(t),
        "trace_h12": float(np.sqrt(ANGULAR) * (1 + m * m) ** 0.25 * t),
        "trace_hm12": float(np.sqrt(ANGULAR) * (1 + m * m) ** -0.25 * t),
        "trace_h0": float(np.sqrt(ANGULAR) * t),
    }


def neumann_scale(m: int, F: complex, s: float) -> float:
    """Per-mode surrogate for ||F||_{H^s(circle)}: sqrt(2 pi) (1+m^2)^{s/2} |F|."""
    return float(np.sqrt(ANGULAR) * (1 + m * m) ** (s / 2) * abs(F))


def apriori_constant(sol: EllipticSolution) -> float:
    """(hbar ||grad w|| + ||w||) / (hbar ||F||_{H^{-1/2}})."""
    num = sol.hbar * sol.norms["grad"] + sol.norms["l2"]
    return num / (sol.hbar * neumann_scale(sol.m, sol.neumann_data, -0.5))


def hessian_constant(sol: EllipticSolution) -> float:
    """||Hess w|| / (||F||_{H^{1/2}} + hbar^{-1} ||F||_{H^{-1/2}})."""
    F = sol.neumann_data
    den = neumann_scale(sol.m, F, 0.5) + neumann_scale(sol.m, F, -0.5) / sol.hbar
    return sol.norms["hessian"] / den


def dn_map_mode(grid: RadialGrid, m: int, hbar: float) -> complex:
    """nu(m, hbar) = hbar dw/dr(1) for the solve with w(1) = 1, w(R0) = 0."""
    sol = solve_mixed_dn(grid, m, hbar, 1.0)
    return complex(hbar / sol.trace)


def trace_localization_profile(neumann_modes: dict, hbar: float, grid: RadialGrid) -> dict:
    """|w_m(1)| for every prescribed Neumann datum F_m (modes solved independently)."""
    out = {}
    for m, F in sorted(neumann_modes.items()):
        out[int(m)] = abs(solve_mixed_dn(grid, int(m), hbar, F).trace)
    return out
