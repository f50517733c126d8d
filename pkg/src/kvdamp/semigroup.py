"""Time evolution of the damped wave semigroup, one Fourier mode at a time.

Implicit midpoint on  u' = v,  M v' = -S1 u - Sa v.  Per step

    (M + dt^2/4 S1 + dt/2 Sa) w = M v - dt/2 S1 u
    u+ = u + dt w,   v+ = 2 w - v

with w = (v + v+)/2 the midpoint velocity.

The left matrix is real, symmetric positive definite and tridiagonal; it is
factored once.  The scheme is A-stable and its energy balance is exact:
E(t_k) + sum_j dt int a |grad v_{j+1/2}|^2 = E(0) up to round-off.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .model import (
    ANGULAR,
    INTERFACE,
    ModeField,
    ModeOperators,
    ModeState,
    assemble_mode_operators,
    build_grid,
    energy_norm,
    graph_norm,
    state_from_profiles,
)


@dataclass
class Trajectory:
    m: int
    dt: float
    times: np.ndarray
    energy: np.ndarray
    dissipated: np.ndarray
    drift: np.ndarray
    final: ModeState
    steps: int
    aborted: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def norm(self) -> np.ndarray:
        return np.sqrt(2.0 * self.energy)

    def dissipation_defect(self) -> float:
        """max_k |E(t_k) + D(t_k) - E(0)| / E(0)."""
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy + self.dissipated - e0)) / e0)

    def monotone(self, rtol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.energy) <= rtol * self.energy[0]))


def undamped(ops: ModeOperators) -> ModeOperators:
    """Same mode and grid with the viscous term switched off."""
    z = np.zeros_like(ops.damp_d)
    return replace(ops, damp_d=z, damp_e=np.zeros_like(ops.damp_e), damped_mass=np.zeros_like(ops.damped_mass))


def evolve(U0: ModeState, ops: ModeOperators, T: float, dt: float, record_every: int = 1, reference: ModeState = None, reference_rate: float = None) -> Trajectory:
    """Integrate from U0 over [0, T] with step dt.

    With ``reference`` and ``reference_rate`` lam the energy distance to
    rho^k * reference is recorded, rho = (1 + i lam dt/2)/(1 - i lam dt/2)
    being the scheme's amplification factor for the eigenvalue i lam.
    """
    if not (dt > 0 and np.isfinite(dt)):
        raise ValueError(f"dt must be positive, got {dt}")
    if not (T >= 0 and np.isfinite(T)):
        raise ValueError(f"T must be non-negative, got {T}")
    if U0.m != ops.m:
        raise ValueError("state and operator modes differ")
    every = max(1, int(record_every))
    nsteps = int(round(T / dt))
    # whole recording blocks, so the final state sits on the last record
    nsteps = every * int(np.ceil(nsteps / every))
    d1, e1, da, ea, mass = (np.ascontiguousarray(a) for a in ops.free_forms())
    u = np.ascontiguousarray(ops.restrict(U0.u.values).astype(complex))
    v = np.ascontiguousarray(ops.restrict(U0.v.values).astype(complex))
    if reference is not None:
        lam = float(reference_rate)
        rho = (1 + 0.5j * lam * dt) / (1 - 0.5j * lam * dt)
        ru = np.ascontiguousarray(ops.restrict(reference.u.values).astype(complex))
        rv = np.ascontiguousarray(ops.restrict(reference.v.values).astype(complex))
    else:
        rho = 1.0 + 0j
        ru = rv = np.zeros(0, dtype=complex)
    uf, vf, en, dis, dr, rec = _kernels.midpoint_run(d1, e1, da, ea, mass, u, v, float(dt), nsteps, every, ru, rv, complex(rho), ANGULAR)
    rec = int(rec)
    times = np.arange(rec) * every * dt
    aborted = rec < nsteps // every + 1 or not np.isfinite(en[rec - 1])
    final = ModeState(ModeField(ops.m, ops.extend(uf)), ModeField(ops.m, ops.extend(vf)))
    return Trajectory(
        m=ops.m,
        dt=float(dt),
        times=times,
        energy=en[:rec],
        dissipated=dis[:rec],
        drift=dr[:rec] if reference is not None else None,
        final=final,
        steps=(rec - 1) * every,
        aborted=bool(aborted),
    )


# --------------------------------------------------------------------------
# decay profile over a fixed sample family
# --------------------------------------------------------------------------

SAMPLE_MODES = (0, 1, 2, 4, 8)


def smooth_samples(grid, modes=SAMPLE_MODES, per_mode: int = 2, seed: int = 7, terms: int = 4):
    """Random smooth states in the operator domain.

    u(r) = r^|m| (R0^2 - r^2) p(r),  v(r) = r^|m| (R0 - r)(r - 1)^2 q(r)
    with p, q random cosine sums.  The factor (r - 1)^2 makes the viscous
    flux vanish at the interface, so the transmission condition holds and
    A U is square integrable.
    """
    rng = np.random.default_rng(seed)
    R0 = grid.spec.outer_radius
    out = []
    for m in modes:
        ops = assemble_mode_operators(grid, m)
        for _ in range(per_mode):
            cu = rng.normal(size=terms) + 1j * rng.normal(size=terms)
            cv = rng.normal(size=terms) + 1j * rng.normal(size=terms)
            k = np.arange(terms)

            def p(r, c=cu):
                return np.cos(np.outer(r, k) * np.pi / R0) @ c

            def q(r, c=cv):
                return np.cos(np.outer(r, k) * np.pi / R0) @ c

            U = state_from_profiles(
                grid,
                m,
                lambda r, p=p, m=m: r ** abs(m) * (R0**2 - r**2) * p(r),
                lambda r, q=q, m=m: r ** abs(m) * (R0 - r) * (r - INTERFACE) ** 2 * q(r),
            )
            out.append((U, ops))
    return out


def decay_profile(samples, T: float, dt: float, record_every: int = 10) -> dict:
    """sup over samples of ||e^{tA} U0|| / ||U0||_D, and (1 + t) times it."""
    prof = None
    per = []
    defects = []
    for U0, ops in samples:
        gn = graph_norm(U0, ops)
        tr = evolve(U0, ops, T, dt, record_every=record_every)
        ratio = tr.norm / gn
        per.append(ratio)
        defects.append(tr.dissipation_defect())
        prof = ratio if prof is None else np.maximum(prof, ratio)
    t = tr.times
    weighted = (1 + t) * prof
    return {
        "times": t,
        "profile": prof,
        "weighted": weighted,
        "max_weighted": float(weighted.max()),
        "per_sample": per,
        "dissipation_defect": float(max(defects)),
    }


# --------------------------------------------------------------------------
# quasi-mode persistence
# --------------------------------------------------------------------------


def quasimode_persistence(Q, ops: ModeOperators, dt: float = None, residual: float = None, record_every: int = 1) -> dict:
    """Evolve a quasi-mode and measure how long it keeps its energy.

    drift(t) = ||U(t) - rho^k U0|| is compared with t/lam: C = sup drift lam / t.
    The run is extended until t* = lam/(4 C) is reached and the energy ratio
    E(t*)/E(0) is reported.
    """
    from .quasimode import residual_norms

    lam = Q.lam
    if dt is None:
        dt = 0.1 / lam
    if dt > 0.1 / lam * (1 + 1e-12):
        raise ValueError(f"dt must not exceed 0.1/lambda = {0.1 / lam:.3e}")
    U0 = Q.state()
    if residual is None:
        residual = residual_norms(Q, ops)["norm_F"]
    c_bound = residual * lam
    t_run = lam / (4 * c_bound) * 1.05
    times, energy, drift, dissipated = [], [], [], []
    state, ref, t0, k0, d0 = U0, U0, 0.0, 0, 0.0
    rho = (1 + 0.5j * lam * dt) / (1 - 0.5j * lam * dt)
    while True:
        span = t_run - t0
        tr = evolve(state, ops, span, dt, record_every=record_every, reference=ref, reference_rate=lam)
        if tr.aborted:
            raise FloatingPointError("non-finite energy during persistence run")
        start = 0 if not times else 1
        times.extend((t0 + tr.times)[start:])
        energy.extend(tr.energy[start:])
        drift.extend(tr.drift[start:])
        dissipated.extend((d0 + tr.dissipated)[start:])
        d0 += tr.dissipated[-1]
        k0 += tr.steps
        t0 = t0 + tr.steps * dt
        t = np.array(times)
        d = np.array(drift)
        C = float(np.max(d[1:] * lam / t[1:]))
        t_star = lam / (4 * C)
        if t_star <= t0:
            break
        t_run = t_star * 1.05
        state = tr.final
        ref = ModeState(ModeField(Q.m, rho**k0 * U0.u.values), ModeField(Q.m, rho**k0 * U0.v.values))
    t = np.array(times)
    e = np.array(energy)
    dis = np.array(dissipated)
    idx = int(np.searchsorted(t, t_star))
    idx = min(idx, t.size - 1)
    return {
        "lambda": lam,
        "dt": dt,
        "times": t,
        "energy": e,
        "drift": np.array(drift),
        "dissipated": dis,
        "dissipation_defect": float(np.max(np.abs(e + dis - e[0])) / e[0]),
        "C": C,
        "residual_bound": c_bound,
        "t_star": t_star,
        "energy_ratio_at_t_star": float(e[idx] / e[0]),
    }


def saturation_value(Q, ops: ModeOperators, t_end: float = None, dt: float = None) -> float:
    """(1 + t) ||U(t)|| / ||U0||_D at t = t_end (default lambda) for quasi-mode data."""
    lam = Q.lam
    t_end = lam if t_end is None else t_end
    dt = 0.1 / lam if dt is None else dt
    U0 = Q.state()
    tr = evolve(U0, ops, t_end, dt, record_every=max(1, int(round(t_end / dt))))
    return float((1 + tr.times[-1]) * tr.norm[-1] / graph_norm(U0, ops))


def default_decay_grid(spec, n_nodes: int = 2000):
    return build_grid(spec, n_nodes)


def energy_of(U: ModeState, ops: ModeOperators) -> float:
    return 0.5 * energy_norm(U, ops) ** 2
