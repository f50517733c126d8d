"""Straight-line billiards in discs and the geometric control time.

Rays in the undamped disc travel on chords and reflect specularly at r = 1.
At a hit, with d the unit direction and n the outward normal, the tangential
momentum is xi = d - (d.n) n and r0 = 1 - |xi|^2 = (d.n)^2 is the normal
symbol: r0 > 0 hyperbolic (transversal), r0 = 0 glancing.  For the disc the
normal curvature term in geodesic normal coordinates (y pointing into the
disc) is -2 |xi|^2, negative at every glancing point.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels

GLANCING_TOL = 1e-12


@dataclass(frozen=True)
class RayState:
    x: float
    y: float
    dx: float
    dy: float
    time: float = 0.0

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("time must be non-negative")
        nrm = np.hypot(self.dx, self.dy)
        if not np.isfinite(nrm) or nrm == 0:
            raise ValueError("direction must be a non-zero finite vector")


@dataclass(frozen=True)
class BoundaryHit:
    x: float
    y: float
    time: float
    r0: float
    tangential: float
    kind: str
    delta_margin: float
    curvature_term: float


def classify_hit(x, y, dx, dy, time: float = 0.0, radius: float = 1.0) -> BoundaryHit:
    """Classify an arrival at the circle of given radius."""
    rr = np.hypot(x, y)
    if abs(rr - radius) > 1e-10 * max(1.0, radius):
        raise ValueError(f"point ({x}, {y}) is not on the circle r = {radius}")
    nrm = np.hypot(dx, dy)
    dx, dy = dx / nrm, dy / nrm
    nx, ny = x / rr, y / rr
    dn = dx * nx + dy * ny
    tang = abs(dx * ny - dy * nx)
    r0 = dn * dn
    kind = "glancing" if r0 <= GLANCING_TOL else "hyperbolic"
    return BoundaryHit(
        x=float(x),
        y=float(y),
        time=float(time),
        r0=float(r0),
        tangential=float(tang),
        kind=kind,
        delta_margin=float(min(r0, 1.0 - r0)),
        curvature_term=float(-2.0 * tang * tang / radius),
    )


def trace_billiard(start: RayState, bounces: int, radius: float = 1.0):
    """Successive boundary hits of a ray inside the disc of given radius."""
    if bounces < 1:
        raise ValueError("bounces must be >= 1")
    if np.hypot(start.x, start.y) > radius * (1 + 1e-12):
        raise ValueError("start point lies outside the disc")
    nrm = np.hypot(start.dx, start.dy)
    hx, hy, ht, hdx, hdy = _kernels.billiard_batch(
        np.array([start.x]), np.array([start.y]), np.array([start.dx / nrm]), np.array([start.dy / nrm]), float(radius), int(bounces)
    )
    return [classify_hit(hx[0, b], hy[0, b], hdx[0, b], hdy[0, b], ht[0, b], radius) for b in range(bounces)]


def phase_space_samples(n: int = 64, radius: float = 2.0):
    """Deterministic n x n sample: n positions (area-uniform radii, golden angles) x n directions."""
    k = np.arange(n)
    rho = radius * np.sqrt((k + 0.5) / n)
    phi = k * np.pi * (3.0 - np.sqrt(5.0))
    psi = 2 * np.pi * (k + 0.5) / n
    X = np.repeat(rho * np.cos(phi), n)
    Y = np.repeat(rho * np.sin(phi), n)
    DX = np.tile(np.cos(psi), n)
    DY = np.tile(np.sin(psi), n)
    return X, Y, DX, DY


def first_interface_hit(x, y, dx, dy, radius: float = 1.0):
    """Time to reach the circle r = radius from inside, and the hit point."""
    p = x * dx + y * dy
    q = x * x + y * y - radius * radius
    t = -p + np.sqrt(np.maximum(p * p - q, 0.0))
    return t, x + t * dx, y + t * dy


def gcc_time(grid_n: int = 64, outer_radius: float = 2.0, max_bounces: int = 64) -> dict:
    """Time for every sampled ray to enter the damped annulus 1 <= r <= R0.

    Rays starting in the annulus need zero time.  Rays starting in the disc
    travel straight until they hit r = 1 (reflections at r = R0 cannot occur
    before that).  The first hit is classified and r0 is cross-checked
    against 1 - sin^2 of the incidence angle computed independently.
    """
    if outer_radius <= 1:
        raise ValueError("outer_radius must exceed 1")
    X, Y, DX, DY = phase_space_samples(grid_n, outer_radius)
    r = np.hypot(X, Y)
    inside = r < 1.0
    times = np.zeros(X.size)
    t, hx, hy = first_interface_hit(X[inside], Y[inside], DX[inside], DY[inside])
    times[inside] = t
    flagged = np.nonzero(~np.isfinite(times) | (times > max_bounces * 2 * outer_radius))[0].tolist()
    nx, ny = hx, hy
    dn = DX[inside] * nx + DY[inside] * ny
    r0 = dn * dn
    theta = np.arccos(np.clip(np.abs(dn), 0.0, 1.0))
    r0_angle = 1.0 - np.sin(theta) ** 2
    return {
        "n_rays": int(X.size),
        "n_inside": int(inside.sum()),
        "max_time": float(times.max()),
        "bound": 2.0 * outer_radius,
        "flagged": flagged,
        "min_r0": float(r0.min()) if r0.size else float("nan"),
        "r0_defect": float(np.max(np.abs(r0 - r0_angle))) if r0.size else 0.0,
        "times": times,
    }


def caustic_family(impact: float, bounces: int = 16):
    """Hits of the chord family tangent to the caustic of radius ``impact``."""
    if not (0 <= impact < 1):
        raise ValueError("impact parameter must lie in [0, 1)")
    start = RayState(x=impact, y=0.0, dx=0.0, dy=1.0)
    return trace_billiard(start, bounces)
