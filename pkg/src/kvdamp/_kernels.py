"""Hot loops with a numba backend and a numpy/scipy fallback.

The backend is picked once at import time.  Set ``KVDAMP_BACKEND=numpy`` to
force the fallback (useful for debugging and for the benchmark).  When numba
is not importable the fallback is used silently.
"""

import os

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solve_banded

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

_requested = os.environ.get("KVDAMP_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"KVDAMP_BACKEND must be 'numba' or 'numpy', got {_requested!r}")
BACKEND = "numba" if (HAVE_NUMBA and _requested == "numba") else "numpy"


def _njit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


# --------------------------------------------------------------------------
# symmetric tridiagonal apply: y = T x, T given by diagonal d and off-diagonal e
# --------------------------------------------------------------------------


def tridiag_matvec_np(d, e, x):
    y = d * x
    y[:-1] += e * x[1:]
    y[1:] += e * x[:-1]
    return y


@_njit
def tridiag_matvec_nb(d, e, x):
    n = d.shape[0]
    y = np.empty_like(x)
    for i in range(n):
        acc = d[i] * x[i]
        if i > 0:
            acc += e[i - 1] * x[i - 1]
        if i < n - 1:
            acc += e[i] * x[i + 1]
        y[i] = acc
    return y


# --------------------------------------------------------------------------
# general (complex) tridiagonal solve, no pivoting (diagonally dominant use)
# sub[i] = T[i+1, i], diag[i] = T[i, i], sup[i] = T[i, i+1]
# --------------------------------------------------------------------------


def tridiag_solve_np(sub, diag, sup, rhs):
    n = diag.shape[0]
    ab = np.zeros((3, n), dtype=np.result_type(sub, diag, sup, rhs))
    ab[0, 1:] = sup
    ab[1] = diag
    ab[2, :-1] = sub
    return solve_banded((1, 1), ab, rhs)


@_njit
def tridiag_solve_nb(sub, diag, sup, rhs):
    n = diag.shape[0]
    cp = np.empty(n, dtype=np.complex128)
    dp = np.empty(n, dtype=np.complex128)
    piv = diag[0] + 0j
    if piv == 0:
        raise ZeroDivisionError("zero pivot in tridiagonal solve")
    cp[0] = (sup[0] / piv) if n > 1 else 0.0
    dp[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - sub[i - 1] * cp[i - 1]
        if piv == 0:
            raise ZeroDivisionError("zero pivot in tridiagonal solve")
        if i < n - 1:
            cp[i] = sup[i] / piv
        dp[i] = (rhs[i] - sub[i - 1] * dp[i - 1]) / piv
    x = np.empty(n, dtype=np.complex128)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


# --------------------------------------------------------------------------
# implicit midpoint for  u' = v,  M v' = -S1 u - Sa v
# --------------------------------------------------------------------------


@_njit
def _ldl_factor(d, e):
    n = d.shape[0]
    dd = np.empty(n)
    ll = np.empty(max(n - 1, 0))
    dd[0] = d[0]
    for i in range(1, n):
        ll[i - 1] = e[i - 1] / dd[i - 1]
        dd[i] = d[i] - ll[i - 1] * e[i - 1]
    return dd, ll


@_njit
def _ldl_solve(dd, ll, b):
    n = dd.shape[0]
    y = np.empty(n, dtype=np.complex128)
    y[0] = b[0]
    for i in range(1, n):
        y[i] = b[i] - ll[i - 1] * y[i - 1]
    for i in range(n):
        y[i] = y[i] / dd[i]
    for i in range(n - 2, -1, -1):
        y[i] = y[i] - ll[i] * y[i + 1]
    return y


@_njit
def _quad(d, e, x):
    # real part of x^H T x for symmetric real tridiagonal T; summed row by
    # row so the diagonal and off-diagonal parts cancel locally
    n = d.shape[0]
    acc = 0.0
    for i in range(n):
        y = d[i] * x[i]
        if i > 0:
            y += e[i - 1] * x[i - 1]
        if i < n - 1:
            y += e[i] * x[i + 1]
        acc += x[i].real * y.real + x[i].imag * y.imag
    return acc


@_njit
def midpoint_run_nb(d1, e1, da, ea, mass, u, v, dt, nsteps, every, ref_u, ref_v, rho, angular):
    n = mass.shape[0]
    nrec = nsteps // every + 1
    energy = np.full(nrec, np.nan)
    dissipated = np.full(nrec, np.nan)
    drift = np.full(nrec, np.nan)
    track = ref_u.shape[0] == n
    h2 = 0.25 * dt * dt
    h1 = 0.5 * dt
    pd = mass + h2 * d1 + h1 * da
    pe = h2 * e1 + h1 * ea
    dd, ll = _ldl_factor(pd, pe)
    inv = 1.0 / dd
    u = u.astype(np.complex128)
    v = v.astype(np.complex128)
    zeros_e = np.zeros(max(n - 1, 0))
    w = np.empty(n, dtype=np.complex128)
    du = np.empty(n, dtype=np.complex128)
    dv = np.empty(n, dtype=np.complex128)
    phase = 1.0 + 0.0j
    lost = 0.0
    energy[0] = 0.5 * angular * (_quad(d1, e1, u) + _quad(mass, zeros_e, v))
    dissipated[0] = 0.0
    if track:
        drift[0] = 0.0
    rec = 1
    for k in range(1, nsteps + 1):
        # P w = M v - dt/2 S1 u, with forward elimination fused into the sweep
        for i in range(n):
            acc = mass[i] * v[i] - h1 * d1[i] * u[i]
            if i > 0:
                acc -= h1 * e1[i - 1] * u[i - 1]
            if i < n - 1:
                acc -= h1 * e1[i] * u[i + 1]
            if i > 0:
                acc -= ll[i - 1] * w[i - 1]
            w[i] = acc
        w[n - 1] = w[n - 1] * inv[n - 1]
        for i in range(n - 2, -1, -1):
            w[i] = w[i] * inv[i] - ll[i] * w[i + 1]
        # w is the midpoint velocity; dissipation int a |grad w|^2
        acc = _quad(da, ea, w)
        for i in range(n):
            u[i] = u[i] + dt * w[i]
            v[i] = 2.0 * w[i] - v[i]
        lost += angular * dt * acc
        phase = phase * rho
        if k % every == 0:
            en = 0.5 * angular * (_quad(d1, e1, u) + _quad(mass, zeros_e, v))
            energy[rec] = en
            dissipated[rec] = lost
            if track:
                for i in range(n):
                    du[i] = u[i] - phase * ref_u[i]
                    dv[i] = v[i] - phase * ref_v[i]
                drift[rec] = np.sqrt(max(angular * (_quad(d1, e1, du) + _quad(mass, zeros_e, dv)), 0.0))
            rec += 1
            if not np.isfinite(en):
                break
    return u, v, energy, dissipated, drift, rec


def midpoint_run_np(d1, e1, da, ea, mass, u, v, dt, nsteps, every, ref_u, ref_v, rho, angular):
    n = mass.shape[0]
    nrec = nsteps // every + 1
    energy = np.full(nrec, np.nan)
    dissipated = np.full(nrec, np.nan)
    drift = np.full(nrec, np.nan)
    track = ref_u.shape[0] == n
    pd = mass + 0.25 * dt * dt * d1 + 0.5 * dt * da
    pe = 0.25 * dt * dt * e1 + 0.5 * dt * ea
    ab = np.zeros((2, n))
    ab[0, 1:] = pe
    ab[1] = pd
    cb = cholesky_banded(ab, lower=False)
    u = np.asarray(u, dtype=complex).copy()
    v = np.asarray(v, dtype=complex).copy()

    def quad(d, e, x):
        return float(np.real(np.vdot(x, tridiag_matvec_np(d, e, x))))

    def en_of(uu, vv):
        return 0.5 * angular * (quad(d1, e1, uu) + float(np.sum(mass * np.abs(vv) ** 2)))

    energy[0] = en_of(u, v)
    dissipated[0] = 0.0
    if track:
        drift[0] = 0.0
    phase = 1.0 + 0.0j
    lost = 0.0
    rec = 1
    for k in range(1, nsteps + 1):
        vmid = cho_solve_banded((cb, False), mass * v - 0.5 * dt * tridiag_matvec_np(d1, e1, u))
        lost += angular * dt * quad(da, ea, vmid)
        u = u + dt * vmid
        v = 2.0 * vmid - v
        phase *= rho
        if k % every == 0:
            en = en_of(u, v)
            energy[rec] = en
            dissipated[rec] = lost
            if track:
                ddu = u - phase * ref_u
                ddv = v - phase * ref_v
                drift[rec] = np.sqrt(max(2.0 * en_of(ddu, ddv), 0.0))
            rec += 1
            if not np.isfinite(en):
                break
    return u, v, energy, dissipated, drift, rec


# --------------------------------------------------------------------------
# batched billiard in a disc: specular reflection, returns tangential momenta
# --------------------------------------------------------------------------


def billiard_batch_np(x, y, dx, dy, radius, bounces):
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    dx = np.array(dx, dtype=float)
    dy = np.array(dy, dtype=float)
    nray = x.shape[0]
    hx = np.empty((nray, bounces))
    hy = np.empty((nray, bounces))
    ht = np.empty((nray, bounces))
    hdx = np.empty((nray, bounces))
    hdy = np.empty((nray, bounces))
    clock = np.zeros(nray)
    for b in range(bounces):
        p = x * dx + y * dy
        q = x * x + y * y - radius * radius
        t = -p + np.sqrt(np.maximum(p * p - q, 0.0))
        x = x + t * dx
        y = y + t * dy
        s = radius / np.hypot(x, y)
        x = x * s
        y = y * s
        clock = clock + t
        hx[:, b] = x
        hy[:, b] = y
        ht[:, b] = clock
        hdx[:, b] = dx
        hdy[:, b] = dy
        nx = x / radius
        ny = y / radius
        dn = dx * nx + dy * ny
        dx = dx - 2.0 * dn * nx
        dy = dy - 2.0 * dn * ny
    return hx, hy, ht, hdx, hdy


@_njit
def billiard_batch_nb(x, y, dx, dy, radius, bounces):
    nray = x.shape[0]
    hx = np.empty((nray, bounces))
    hy = np.empty((nray, bounces))
    ht = np.empty((nray, bounces))
    hdx = np.empty((nray, bounces))
    hdy = np.empty((nray, bounces))
    for j in range(nray):
        px = x[j]
        py = y[j]
        ux = dx[j]
        uy = dy[j]
        clock = 0.0
        for b in range(bounces):
            p = px * ux + py * uy
            q = px * px + py * py - radius * radius
            t = -p + np.sqrt(max(p * p - q, 0.0))
            px = px + t * ux
            py = py + t * uy
            s = radius / np.hypot(px, py)
            px *= s
            py *= s
            clock += t
            hx[j, b] = px
            hy[j, b] = py
            ht[j, b] = clock
            hdx[j, b] = ux
            hdy[j, b] = uy
            nx = px / radius
            ny = py / radius
            dn = ux * nx + uy * ny
            ux = ux - 2.0 * dn * nx
            uy = uy - 2.0 * dn * ny
    return hx, hy, ht, hdx, hdy


if BACKEND == "numba":
    tridiag_matvec = tridiag_matvec_nb
    tridiag_solve = tridiag_solve_nb
    midpoint_run = midpoint_run_nb
    billiard_batch = billiard_batch_nb
else:
    tridiag_matvec = tridiag_matvec_np
    tridiag_solve = tridiag_solve_np
    midpoint_run = midpoint_run_np
    billiard_batch = billiard_batch_np
