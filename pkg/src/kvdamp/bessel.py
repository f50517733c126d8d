"""Bessel functions of integer order, their zeros, and disc eigenfunctions.

Evaluation is delegated to ``scipy.special`` (AMOS based, double precision).
The zero finder is local: the n-th zero of J_m is bracketed by a sign scan
that starts at z = m (there are no zeros below the order) and is refined by a
Newton iteration that falls back to bisection whenever a step leaves the
bracket.  An asymptotic initial guess (McMahon for low order, Olver's uniform
expansion otherwise) only decides how far the scan has to go.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .model import ModeField, RadialGrid

_TINY = np.finfo(float).tiny
# magnitudes beyond which products of J and Y lose relative accuracy
_GUARD = 1e-280


class BracketError(RuntimeError):
    """Raised when a zero cannot be bracketed; carries the scanned interval."""

    def __init__(self, m, n, interval):
        self.m = m
        self.n = n
        self.interval = tuple(float(x) for x in interval)
        super().__init__(f"could not bracket zero n={n} of J_{m} in [{self.interval[0]:g}, {self.interval[1]:g}]")


def _check_order(m):
    m = np.asarray(m)
    if np.any(m < 0):
        raise ValueError("order m must be non-negative")
    return m


def bessel_j(m, z, with_flag=False):
    """J_m(z) for integer m >= 0 and real z >= 0.

    Subnormal results are flushed to zero.  With ``with_flag`` the boolean
    underflow mask is returned as well.
    """
    m = _check_order(m)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("argument z must be non-negative")
    val = special.jv(m, z)
    under = (np.abs(val) < _TINY) & (z > 0) & (m > z)
    val = np.where(under, 0.0, val)
    if np.ndim(val) == 0:
        val = float(val)
        under = bool(under)
    return (val, under) if with_flag else val


def bessel_y(m, z):
    """Y_m(z) for integer m >= 0 and real z > 0."""
    m = _check_order(m)
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("Y_m is singular at z = 0; need z > 0")
    val = special.yv(m, z)
    return float(val) if np.ndim(val) == 0 else val


def bessel_j_prime(m, z):
    """J_m'(z) = (J_{m-1}(z) - J_{m+1}(z)) / 2."""
    m = _check_order(m)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("argument z must be non-negative")
    val = special.jvp(m, z)
    return float(val) if np.ndim(val) == 0 else val


def bessel_y_prime(m, z):
    """Y_m'(z) = (Y_{m-1}(z) - Y_{m+1}(z)) / 2."""
    m = _check_order(m)
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("Y_m is singular at z = 0; need z > 0")
    val = special.yvp(m, z)
    return float(val) if np.ndim(val) == 0 else val


def recurrence_residual(m, z):
    """|J_{m+1} + J_{m-1} - (2m/z) J_m| relative to max |J| of the triple.

    NaN where the triple reaches the subnormal range (no relative accuracy
    is representable there).
    """
    a = special.jv(m - 1, z)
    b = special.jv(m, z)
    c = special.jv(m + 1, z)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.abs(c))
    tiny = np.minimum(np.minimum(np.abs(a), np.abs(b)), np.abs(c))
    res = np.abs(c + a - 2.0 * m / z * b) / np.where(scale > 0, scale, 1.0)
    return np.where((tiny < _GUARD) & (m > z), np.nan, res)


def wronskian_residual(m, z):
    """Relative defect of J_m Y_m' - J_m' Y_m = 2 / (pi z).

    NaN where J underflows or Y overflows.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        j = special.jv(m, z)
        y = special.yv(m, z)
        w = j * special.yvp(m, z) - special.jvp(m, z) * y
    ref = 2.0 / (np.pi * np.asarray(z, dtype=float))
    res = np.abs(w - ref) / np.abs(ref)
    bad = (np.abs(j) < _GUARD) & (np.asarray(m) > z) | ~np.isfinite(y) | (np.abs(y) > 1 / _GUARD)
    return np.where(bad, np.nan, res)


# --------------------------------------------------------------------------
# zeros
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BesselZero:
    m: int
    n: int
    value: float
    residual: float


def _olver_z(c):
    """Root z > 1 of sqrt(z^2 - 1) - arcsec(z) = c."""
    if c <= 0:
        return 1.0
    g = lambda z: np.sqrt(z * z - 1.0) - np.arccos(1.0 / z) - c
    return brentq(g, 1.0, c + np.pi / 2 + 2.0, xtol=1e-15, rtol=1e-15)


def zero_guess(m: int, n: int) -> float:
    """Asymptotic estimate of the n-th positive zero of J_m."""
    if m == 0 or n > 4 * m:
        mu = 4.0 * m * m
        b = (n + 0.5 * m - 0.25) * np.pi
        return b - (mu - 1) / (8 * b) - 4 * (mu - 1) * (7 * mu - 31) / (3 * (8 * b) ** 3)
    a_k = special.ai_zeros(n)[0][-1]
    zeta = m ** (-2.0 / 3.0) * a_k
    c = 2.0 / 3.0 * (-zeta) ** 1.5
    return m * _olver_z(c)


def _refine(m, a, b, fa):
    """Safeguarded Newton on [a, b] with f(a) f(b) < 0."""
    x = 0.5 * (a + b)
    for _ in range(200):
        fx = special.jv(m, x)
        if fx == 0.0:
            return x
        if np.sign(fx) == np.sign(fa):
            a, fa = x, fx
        else:
            b = x
        dfx = special.jvp(m, x)
        step = fx / dfx if dfx != 0 else np.inf
        xn = x - step
        if not (a < xn < b):
            xn = 0.5 * (a + b)
        if abs(xn - x) <= 4 * np.finfo(float).eps * max(1.0, abs(x)):
            return xn
        x = xn
    return x


@lru_cache(maxsize=None)
def _zero_table(m: int, n: int):
    """First n zeros of J_m by a sign scan from z = m and local refinement."""
    step = 0.25
    start = float(m)
    end = zero_guess(m, n) + 4 * np.pi
    zeros = []
    lo = start
    while len(zeros) < n:
        z = np.arange(lo, end + step, step)
        f = special.jv(m, z)
        s = np.sign(f)
        nz = s != 0
        z, f, s = z[nz], f[nz], s[nz]
        idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
        for i in idx:
            zeros.append(_refine(m, z[i], z[i + 1], f[i]))
            if len(zeros) == n:
                break
        if len(zeros) < n:
            if end > 8 * (start + n * np.pi + 20):
                raise BracketError(m, n, (start, end))
            lo = z[-1] if z.size else end
            end = end + (n - len(zeros) + 2) * np.pi
    return tuple(zeros)


def bessel_zero(m: int, n: int) -> BesselZero:
    """n-th positive zero of J_m (n = 1 is the first)."""
    m = int(m)
    n = int(n)
    if m < 0:
        raise ValueError("order m must be non-negative")
    if n < 1:
        raise ValueError("zero index n must be >= 1")
    val = _zero_table(m, n)[n - 1]
    return BesselZero(m=m, n=n, value=float(val), residual=float(abs(special.jv(m, val))))


def bessel_zeros(m: int, n_max: int):
    """List of the first ``n_max`` zeros of J_m as BesselZero records."""
    tab = _zero_table(int(m), int(n_max))
    return [BesselZero(int(m), k + 1, float(v), float(abs(special.jv(m, v)))) for k, v in enumerate(tab)]


def diagonal_zero(alpha: int, n: int) -> BesselZero:
    """lambda_{alpha n, n}: the n-th zero of J_{alpha n}."""
    return bessel_zero(int(alpha) * int(n), n)


# --------------------------------------------------------------------------
# iota(alpha) = lim lambda_{alpha n, n} / n
# --------------------------------------------------------------------------


def iota_limit(alpha: float) -> float:
    """Closed-form limit from the uniform (Airy-type) expansion of the zeros.

    With m = alpha n and the n-th Airy zero a_n ~ -(3 pi n / 2)^{2/3}, the
    leading term gives lambda / m -> z where sqrt(z^2-1) - arcsec z = pi/alpha.
    """
    return alpha * _olver_z(np.pi / alpha)


def bracket_statistic(alpha: float, iota: float) -> float:
    """s(alpha) = (iota / alpha - 1) alpha^{2/3}."""
    return (iota / alpha - 1.0) * alpha ** (2.0 / 3.0)


def iota_estimate(alpha: int, n_max: int):
    """Sequence lambda_{alpha n, n}/n for n = 1..n_max and its extrapolated limit.

    The sequence behaves like iota + c1/n + c2/n^2 + ...; the limit is read off
    a least-squares fit in 1/n over the upper half of the sequence.
    """
    alpha = int(alpha)
    n_max = int(n_max)
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    if n_max < 4:
        raise ValueError("n_max must be >= 4")
    ns = np.arange(1, n_max + 1)
    seq = np.array([diagonal_zero(alpha, k).value / k for k in ns])
    tail = ns >= max(2, n_max // 2)
    x = 1.0 / ns[tail]
    deg = min(3, int(tail.sum()) - 1)
    coef = np.polyfit(x, seq[tail], deg)
    iota = float(coef[-1])
    diffs = np.diff(seq)
    return {
        "alpha": alpha,
        "n": ns.tolist(),
        "sequence": seq.tolist(),
        "iota": iota,
        "iota_limit": iota_limit(alpha),
        "increasing": bool(np.all(diffs > 0)),
        "below_limit": bool(np.all(seq < iota)),
        "statistic": bracket_statistic(alpha, iota),
        "delta": 1.0 - alpha / iota,
    }


# --------------------------------------------------------------------------
# disc eigenfunctions
# --------------------------------------------------------------------------


@dataclass
class DiscEigenfunction:
    """phi(r) = J_m(lambda r) on the inner disc, and its sampled field."""

    m: int
    n: int
    lam: float
    l2_norm: float
    field: ModeField
    derivative: np.ndarray

    @property
    def normalized(self) -> np.ndarray:
        """w_n = phi / (lambda ||phi||) sampled on the grid."""
        return self.field.values / (self.lam * self.l2_norm)

    @property
    def normalized_derivative(self) -> np.ndarray:
        return self.derivative / (self.lam * self.l2_norm)


def disc_eigenfunction(alpha: int, n: int, grid: RadialGrid) -> DiscEigenfunction:
    """Dirichlet eigenfunction of the unit disc with m = alpha n, sampled on grid."""
    z = diagonal_zero(alpha, n)
    m, lam = z.m, z.value
    r = grid.nodes
    inner = grid.inner_mask()
    vals = np.zeros(grid.size)
    der = np.zeros(grid.size)
    vals[inner] = bessel_j(m, lam * r[inner])
    der[inner] = lam * bessel_j_prime(m, lam * r[inner])
    vals[grid.interface_index] = 0.0
    nrm = np.sqrt(np.pi) * abs(special.jv(m + 1, lam))
    return DiscEigenfunction(m=m, n=n, lam=lam, l2_norm=float(nrm), field=ModeField(m, vals), derivative=der)


def neumann_trace(e: DiscEigenfunction) -> float:
    """L^2 norm on the unit circle of the radial derivative of w_n."""
    return float(np.sqrt(2 * np.pi) * abs(e.lam * special.jvp(e.m, e.lam)) / (e.lam * e.l2_norm))


def hyperbolicity_ratio(e) -> float:
    """m / lambda: radius of the caustic of the mode (< 1 always)."""
    if isinstance(e, BesselZero):
        return e.m / e.value
    return e.m / e.lam
