"""Whispering-gallery quasi-modes that saturate the 1/lambda resolvent bound.

Construction for m = alpha n and lambda = lambda_{m,n} (h = 1/lambda,
hbar = h^{1/2}):

1. Inside the unit disc take the normalized Dirichlet eigenfunction
   w_n = J_m(lambda r) / (lambda ||phi||), v2 = i lambda u2.
2. In the annulus solve (hbar^2 L_m - i) w = 0 with the Neumann datum of w_n
   and set u1 = w / (1 + i lambda), v1 = i lambda u1.  The displacement now
   jumps at r = 1 by u1(1).
3. Remove the jump with e = (a J_m + b Y_m)(lambda r) times a smooth cutoff
   that equals 1 near r = 1 and vanishes before the caustic r = m/lambda.
   (a, b) match e(1) = u1(1), e'(1) = 0 exactly, so both transmission
   conditions hold and the residual is supported where the cutoff bends.

The residual F = (i lambda - A) U is evaluated either from the closed form
(``continuum``) or by applying the discrete generator on the same grid.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.special import expit

from .bessel import (
    bessel_j,
    bessel_j_prime,
    bessel_y,
    bessel_y_prime,
    diagonal_zero,
    disc_eigenfunction,
    hyperbolicity_ratio,
)
from .elliptic import annulus_norms, decay_rate, solve_mixed_dn
from .fitting import loglog_fit
from .model import (
    ANGULAR,
    DomainSpec,
    ModeField,
    ModeOperators,
    ModeState,
    RadialGrid,
    build_grid,
    energy_norm,
)

MIN_GAP = 0.05
DEFAULT_CUTOFF = 0.3
MIN_NODES_PER_WAVELENGTH = 10.0


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, with two derivatives."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    tc = np.clip(t, 1e-3, 1 - 1e-3)
    x = 1.0 / (1.0 - tc) - 1.0 / tc
    s = expit(x)
    x1 = 1.0 / (1.0 - tc) ** 2 + 1.0 / tc**2
    x2 = 2.0 / (1.0 - tc) ** 3 - 2.0 / tc**3
    s1 = s * (1 - s) * x1
    s2 = s * (1 - s) * ((1 - 2 * s) * x1**2 + x2)
    val = np.where(t >= 1, 1.0, np.where(inside, s, 0.0))
    d1 = np.where(inside, s1, 0.0)
    d2 = np.where(inside, s2, 0.0)
    return val, d1, d2


def cutoff(r, width):
    """chi(r): 0 on [0, 1-width], 1 on [1-width/2, 1]; returns chi, chi', chi''."""
    k = 2.0 / width
    s, s1, s2 = smooth_step((np.asarray(r, dtype=float) - (1.0 - width)) * k)
    return s, s1 * k, s2 * k * k


@dataclass
class QuasiMode:
    alpha: int
    n: int
    m: int
    lam: float
    grid: RadialGrid
    u1: ModeField
    v1: ModeField
    u2: ModeField
    v2: ModeField
    g1: ModeField
    g2: ModeField
    u2_prime: np.ndarray = field(repr=False)
    correction: ModeField = None
    correction_prime: np.ndarray = field(default=None, repr=False)
    cutoff_width: float = None
    corrected: bool = False
    neumann_datum: complex = 0.0
    report: dict = field(default_factory=dict)

    @property
    def h(self) -> float:
        return 1.0 / self.lam

    @property
    def hbar(self) -> float:
        return self.lam**-0.5

    def state(self) -> ModeState:
        """Glue the two sides into one nodal state (annulus value at r = 1)."""
        inner = self.grid.inner_mask()
        inner[self.grid.interface_index] = False
        u = np.where(inner, self.u2.values, self.u1.values)
        v = np.where(inner, self.v2.values, self.v1.values)
        u[-1] = v[-1] = 0.0
        if self.m != 0:
            u[0] = v[0] = 0.0
        return ModeState(ModeField(self.m, u), ModeField(self.m, v))


def quasimode_grid(spec: DomainSpec, alpha: int, n: int, ppw: float = 32.0, per_layer: float = 16.0) -> RadialGrid:
    """Uniform grid with ``ppw`` nodes per wavelength and the annulus layer resolved."""
    z = diagonal_zero(alpha, n)
    lam = z.value
    dr = min(2 * np.pi / (ppw * lam), 1.0 / (per_layer * abs(decay_rate(z.m, lam**-0.5))))
    return build_grid(spec, int(np.ceil(spec.outer_radius / dr)))


def _inner_l2(grid, f):
    inner = grid.inner_mask()
    r = grid.nodes[inner]
    return float(np.sqrt(ANGULAR * simpson(np.abs(f[inner]) ** 2 * r, x=r)))


def _inner_grad(grid, m, f, fp):
    inner = grid.inner_mask()
    r = grid.nodes[inner]
    fi = f[inner]
    with np.errstate(divide="ignore", invalid="ignore"):
        ang = np.where(r > 0, m * m * np.abs(fi) ** 2 / r, 0.0)
    dens = np.abs(fp[inner]) ** 2 * r + ang
    return float(np.sqrt(ANGULAR * simpson(dens, x=r)))


def build_step0(alpha: int, n: int, grid: RadialGrid) -> QuasiMode:
    """Disc eigenfunction plus elliptic lift in the annulus (jump not yet removed)."""
    if grid.spec.damping_value != 1.0:
        raise ValueError("quasi-mode construction assumes damping_value = 1")
    z = diagonal_zero(alpha, n)
    m, lam = z.m, z.value
    gap = 1.0 - hyperbolicity_ratio(z)
    if gap < MIN_GAP:
        raise ValueError(f"mode is not hyperbolic enough: 1 - m/lambda = {gap:.3f} < {MIN_GAP}")
    eig = disc_eigenfunction(alpha, n, grid)
    u2 = eig.normalized.astype(complex)
    u2p = eig.normalized_derivative.astype(complex)
    F = complex(u2p[grid.interface_index])
    hbar = lam**-0.5
    sol = solve_mixed_dn(grid, m, hbar, F)
    outer = grid.outer_mask()
    u1 = np.where(outer, sol.w.values / (1 + 1j * lam), 0.0)
    v1 = 1j * lam * u1
    v2 = 1j * lam * u2
    q = QuasiMode(
        alpha=int(alpha),
        n=int(n),
        m=m,
        lam=lam,
        grid=grid,
        u1=ModeField(m, u1),
        v1=ModeField(m, v1),
        u2=ModeField(m, u2),
        v2=ModeField(m, v2),
        g1=ModeField(m, -v1),
        g2=ModeField(m, np.zeros(grid.size, dtype=complex)),
        u2_prime=u2p,
        neumann_datum=F,
    )
    q.report = _report(q)
    q.report["elliptic_residual"] = sol.norms["residual"]
    return q


def build_corrected(alpha: int, n: int, grid: RadialGrid, cutoff_width: float = DEFAULT_CUTOFF) -> QuasiMode:
    """Step-0 bundle with the interface jump removed by a cut-off J/Y pair."""
    if not (0 < cutoff_width <= 0.5):
        raise ValueError("cutoff_width must lie in (0, 0.5]")
    q = build_step0(alpha, n, grid)
    m, lam = q.m, q.lam
    gap = 1.0 - m / lam
    if cutoff_width >= gap:
        raise ValueError(f"cutoff support reaches the caustic: width {cutoff_width} >= 1 - m/lambda = {gap:.3f}")
    i0 = grid.interface_index
    jump = q.u1.values[i0] - q.u2.values[i0]
    J, Jp = bessel_j(m, lam), bessel_j_prime(m, lam)
    Y, Yp = bessel_y(m, lam), bessel_y_prime(m, lam)
    wr = J * Yp - Jp * Y
    if not np.isfinite(wr) or abs(wr * np.pi * lam / 2 - 1) > 1e-10:
        raise ArithmeticError(f"Wronskian check failed at m={m}, lambda={lam}: {wr}")
    det = lam * wr
    a = jump * lam * Yp / det
    b = -jump * lam * Jp / det
    r = grid.nodes
    chi, chi1, chi2 = cutoff(r, cutoff_width)
    supp = (chi > 0) | (chi1 != 0)
    supp &= grid.inner_mask()
    e = np.zeros(grid.size, dtype=complex)
    ep = np.zeros(grid.size, dtype=complex)
    x = lam * r[supp]
    e[supp] = a * bessel_j(m, x) + b * bessel_y(m, x)
    ep[supp] = lam * (a * bessel_j_prime(m, x) + b * bessel_y_prime(m, x))
    inner = grid.inner_mask()
    ce = np.where(inner, chi * e, 0.0)
    cep = np.where(inner, chi1 * e + chi * ep, 0.0)
    u2 = q.u2.values + ce
    u2p = q.u2_prime + cep
    g2 = np.zeros(grid.size, dtype=complex)
    rs = r[supp]
    g2[supp] = -(chi2[supp] * e[supp] + 2 * chi1[supp] * ep[supp] + chi1[supp] * e[supp] / rs)
    q.u2 = ModeField(m, u2)
    q.v2 = ModeField(m, 1j * lam * u2)
    q.u2_prime = u2p
    q.g2 = ModeField(m, g2)
    q.correction = ModeField(m, ce)
    q.correction_prime = cep
    q.cutoff_width = float(cutoff_width)
    q.corrected = True
    rep = _report(q)
    rep["elliptic_residual"] = q.report["elliptic_residual"]
    rep["correction_coefficients"] = [complex(a), complex(b)]
    rep["wronskian_defect"] = float(abs(wr * np.pi * lam / 2 - 1))
    q.report = rep
    return q


def _report(q: QuasiMode) -> dict:
    g = q.grid
    m, lam = q.m, q.lam
    i0 = g.interface_index
    n1 = annulus_norms(g, m, q.u1.values)
    nv1 = annulus_norms(g, m, q.v1.values)
    grad_u2 = _inner_grad(g, m, q.u2.values, q.u2_prime)
    l2_v2 = _inner_l2(g, q.v2.values)
    norm_U = float(np.sqrt(grad_u2**2 + l2_v2**2 + n1["grad"] ** 2 + nv1["l2"] ** 2))
    # Neumann datum of the annulus field is imposed through the flux balance
    flux_u1v1 = q.neumann_datum
    dir_mis = abs(q.u2.values[i0] - q.u1.values[i0])
    neu_mis = abs(q.u2_prime[i0] - flux_u1v1)
    rep = {
        "alpha": q.alpha,
        "n": q.n,
        "m": m,
        "lambda": lam,
        "h": 1 / lam,
        "hbar": lam**-0.5,
        "caustic_ratio": m / lam,
        "norm_U": norm_U,
        "grad_u2": grad_u2,
        "l2_v2": l2_v2,
        "grad_v1": nv1["grad"],
        "l2_v1": nv1["l2"],
        "grad_u1": n1["grad"],
        "l2_u1": n1["l2"],
        "trace_u1_h12": n1["trace_h12"],
        "trace_v1_h12": nv1["trace_h12"],
        "dirichlet_mismatch": float(dir_mis),
        "dirichlet_mismatch_h12": float(np.sqrt(ANGULAR) * (1 + m * m) ** 0.25 * dir_mis),
        "neumann_mismatch": float(neu_mis),
        "neumann_trace": float(np.sqrt(ANGULAR) * abs(q.neumann_datum)),
        "corrected": q.corrected,
    }
    if q.corrected:
        g2n = _inner_l2(g, q.g2.values)
        g1n = n1["l2"] * lam
        rep["g2_norm"] = g2n
        rep["g2_scaled"] = g2n / lam
        rep["g1_norm"] = g1n
        rep["correction_h1"] = float(
            np.sqrt(_inner_l2(g, q.correction.values) ** 2 + _inner_grad(g, m, q.correction.values, q.correction_prime) ** 2)
        )
        rep["norm_F"] = float(np.hypot(g2n, g1n))
        rep["ratio"] = rep["norm_F"] * lam / norm_U
    else:
        # the jump keeps the step-0 state out of the operator domain
        rep["norm_F"] = float("inf")
        rep["ratio"] = float("inf")
    return rep


def residual_norms(Q: QuasiMode, ops: ModeOperators = None) -> dict:
    """||U||, ||(i lambda - A) U|| and lambda ||F|| / ||U||.

    With ``ops`` the discrete generator on the same grid is applied; without
    it the closed-form residual of the corrected construction is used.
    """
    if ops is None:
        rep = Q.report
        return {"norm_U": rep["norm_U"], "norm_F": rep["norm_F"], "ratio": rep["ratio"]}
    if ops.m != Q.m:
        raise ValueError("operator mode does not match the quasi-mode")
    if ops.grid.size != Q.grid.size or not np.array_equal(ops.grid.nodes, Q.grid.nodes):
        raise ValueError("operators and quasi-mode live on different grids")
    need = 2 * np.pi / (MIN_NODES_PER_WAVELENGTH * Q.lam)
    if ops.grid.max_spacing > need:
        raise ValueError(
            f"grid too coarse for lambda={Q.lam:.1f}: spacing {ops.grid.max_spacing:.3e} > {need:.3e}"
        )
    U = Q.state()
    lam = Q.lam
    AU = ops.generator(U)
    Fs = ModeState(
        ModeField(Q.m, 1j * lam * U.u.values - AU.u.values),
        ModeField(Q.m, 1j * lam * U.v.values - AU.v.values),
    )
    nU = energy_norm(U, ops)
    nF = energy_norm(Fs, ops)
    return {"norm_U": nU, "norm_F": nF, "ratio": nF * lam / nU}


APRIORI_KEYS = ("grad_v1", "l2_v1", "grad_u1", "l2_u1", "trace_u1_h12")
APRIORI_TARGETS = {"grad_v1": 0.5, "l2_v1": 1.0, "grad_u1": 1.5, "l2_u1": 2.0, "trace_u1_h12": 1.5}


def apriori_check(modes) -> dict:
    """Norm table of the annulus fields and their power-law exponents in h.

    ``modes`` is a sequence of quasi-modes (at least three for the fits).  The
    exponent of a quantity q is the slope of log q against log h.
    """
    if isinstance(modes, QuasiMode):
        modes = [modes]
    h = np.array([q.h for q in modes])
    table = {k: [q.report[k] for q in modes] for k in APRIORI_KEYS + ("trace_v1_h12",)}
    out = {"h": h.tolist(), "table": table, "exponents": {}, "fits": {}}
    if len(modes) >= 3:
        for k, vals in table.items():
            fit = loglog_fit(h, vals)
            out["exponents"][k] = fit.slope
            out["fits"][k] = fit.as_dict()
        out["targets"] = dict(APRIORI_TARGETS, trace_v1_h12=0.5)
    return out


def quasimode_sweep(alpha: int, ns, spec: DomainSpec = None, cutoff_width: float = DEFAULT_CUTOFF, ppw: float = 32.0):
    """Corrected quasi-modes for every n, each on its own resolved grid."""
    spec = spec or DomainSpec()
    return [build_corrected(alpha, n, quasimode_grid(spec, alpha, n, ppw=ppw), cutoff_width) for n in ns]


def sweep_summary(modes) -> dict:
    """Exponents (with confidence intervals) of every reported scaling."""
    lam = np.array([q.lam for q in modes])
    h = 1 / lam
    rep = [q.report for q in modes]
    fits = {}
    fits["norm_F_vs_lambda"] = loglog_fit(lam, [r["norm_F"] for r in rep]).as_dict()
    for k in ("g2_norm", "g2_scaled", "correction_h1"):
        fits[k + "_vs_h"] = loglog_fit(h, [r[k] for r in rep]).as_dict()
    # the annulus field is the same before and after the correction, so the
    # step-0 jump |u1(1)| (1+m^2)^{1/4} is the H^{1/2} trace of u1
    fits["step0_jump_h12_vs_h"] = loglog_fit(h, [r["trace_u1_h12"] for r in rep]).as_dict()
    fits["step0_l2_u1_vs_h"] = loglog_fit(h, [r["l2_u1"] for r in rep]).as_dict()
    ap = apriori_check(modes)
    return {
        "alpha": modes[0].alpha,
        "n": [q.n for q in modes],
        "lambda": lam.tolist(),
        "norm_U": [r["norm_U"] for r in rep],
        "ratio": [r["ratio"] for r in rep],
        "fits": fits,
        "apriori_exponents": ap["exponents"],
        "apriori_fits": ap["fits"],
        "apriori_targets": ap.get("targets", {}),
    }
