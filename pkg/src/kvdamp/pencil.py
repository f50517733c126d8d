"""Resolvent norms and spectra of the per-mode generator.

The resolvent (i lambda - A_m)^{-1} is measured in the energy norm.  With the
Gram matrix G = diag(S1, M) and its factor C (C^H C = G) the energy norm of
the resolvent is the spectral norm of T = C (i lambda - A_m)^{-1} C^{-1}.

* ``dense``  : form T explicitly and take the largest singular value.
* ``sparse`` : one sparse LU of the block system, then Lanczos on T^H T.

Both solve the same block system
    [ i lambda I   -I              ] [u]   [f  ]
    [ S1           i lambda M + Sa ] [v] = [M g]
which is (i lambda - A_m)(u, v) = (f, g) with the second row scaled by M.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bessel import diagonal_zero
from .fitting import loglog_fit
from .model import DomainSpec, ModeOperators, assemble_mode_operators, build_grid

DENSE_LIMIT = 1500
MIN_NODES_PER_WAVELENGTH = 10.0


def nodes_for(lam: float, floor: int = 8000, factor: float = 1.0) -> int:
    """Grid size that converges the resolvent norm at frequency lam.

    The limiting mode concentrates on a layer of width ~ 1/lambda at r = 1 in
    the damped side, with a sharp profile from the Kelvin-Voigt term, so the
    grid has to scale like lambda^2.
    """
    return int(max(floor, factor * lam * lam))


def _check_frequency(lam, ops):
    if abs(lam) < 1:
        raise ValueError(f"|lambda| must be >= 1, got {lam}")
    need = 2 * np.pi / (MIN_NODES_PER_WAVELENGTH * abs(lam))
    if ops.grid.max_spacing > need:
        raise ValueError(f"grid too coarse for lambda={lam}: spacing {ops.grid.max_spacing:.3e} > {need:.3e}")


def _blocks(lam, ops):
    S1, Sa, M = ops.sparse_forms()
    n = ops.n_free
    I = sp.identity(n, format="csc")
    B = sp.bmat([[1j * lam * I, -I], [S1, 1j * lam * M + Sa]], format="csc")
    return B, S1, M.diagonal()


def _dense_norm(lam, ops):
    B, S1, mass = _blocks(lam, ops)
    n = ops.n_free
    U1 = sla.cholesky(S1.toarray(), lower=False)
    sm = np.sqrt(mass)
    C = sla.block_diag(U1, np.diag(sm))
    Cinv = sla.block_diag(sla.solve_triangular(U1, np.eye(n)), np.diag(1 / sm))
    D = np.concatenate([np.ones(n), mass])
    T = C @ np.linalg.solve(B.toarray(), D[:, None] * Cinv)
    return float(np.linalg.svd(T, compute_uv=False)[0])


def _sparse_norm(lam, ops, tol=1e-10):
    B, S1, mass = _blocks(lam, ops)
    n = ops.n_free
    lu = spla.splu(B)
    ab = np.zeros((2, n))
    ab[0, 1:] = S1.diagonal(1)
    ab[1] = S1.diagonal()
    cu = sla.cholesky_banded(ab, lower=False)
    abl = np.zeros((2, n))
    abl[0] = cu[1]
    abl[1, :-1] = cu[0, 1:]
    sm = np.sqrt(mass)

    def c_mul(x):
        u = cu[1] * x[:n]
        u[:-1] += cu[0, 1:] * x[1:n]
        return np.concatenate([u, sm * x[n:]])

    def ch_mul(x):
        u = cu[1] * x[:n]
        u[1:] += cu[0, 1:] * x[: n - 1]
        return np.concatenate([u, sm * x[n:]])

    def c_inv(y):
        return np.concatenate([sla.solve_banded((0, 1), cu, y[:n]), y[n:] / sm])

    def ch_inv(y):
        return np.concatenate([sla.solve_banded((1, 0), abl, y[:n]), y[n:] / sm])

    def T(x):
        F = c_inv(x)
        return c_mul(lu.solve(np.concatenate([F[:n], mass * F[n:]])))

    def TH(y):
        z = lu.solve(ch_mul(y), trans="H")
        z = np.concatenate([z[:n], mass * z[n:]])
        return ch_inv(z)

    op = spla.LinearOperator((2 * n, 2 * n), matvec=lambda x: TH(T(x)), dtype=complex)
    v0 = np.ones(2 * n, dtype=complex)
    val = spla.eigsh(op, k=1, which="LA", v0=v0, tol=tol, return_eigenvectors=False)
    return float(np.sqrt(val[0]))


def resolvent_norm(lam: float, ops: ModeOperators, method: str = "auto") -> float:
    """||(i lambda - A_m)^{-1}|| in the energy norm."""
    _check_frequency(lam, ops)
    if method == "auto":
        method = "dense" if ops.n_free <= DENSE_LIMIT else "sparse"
    if method == "dense":
        return _dense_norm(lam, ops)
    if method == "sparse":
        return _sparse_norm(lam, ops)
    raise ValueError(f"unknown method {method!r}")


@dataclass
class ScanResult:
    lambdas: np.ndarray
    modes: list
    per_mode: np.ndarray
    failures: list = field(default_factory=list)

    @property
    def global_norm(self) -> np.ndarray:
        filled = np.where(np.isnan(self.per_mode), -np.inf, self.per_mode)
        out = filled.max(axis=1)
        return np.where(np.isneginf(out), np.nan, out)

    @property
    def argmax_mode(self) -> list:
        idx = np.nanargmax(np.where(np.isnan(self.per_mode), -np.inf, self.per_mode), axis=1)
        return [self.modes[i] for i in idx]


def default_modes(lam: float) -> list:
    """All modes up to the cutoff ceil(2 lambda)."""
    return list(range(0, int(np.ceil(2 * abs(lam))) + 1))


def resolvent_scan(lambdas, mode_set, grid, method: str = "auto", executor=None) -> ScanResult:
    """Per-mode resolvent norms on a common grid; failing points become NaN."""
    lambdas = np.asarray(list(lambdas), dtype=float)
    modes = [int(m) for m in mode_set]
    out = np.full((lambdas.size, len(modes)), np.nan)
    failures = []
    ops_cache = {m: assemble_mode_operators(grid, m) for m in modes}
    tasks = [(i, j) for i in range(lambdas.size) for j in range(len(modes))]

    def work(ij):
        i, j = ij
        try:
            return ij, resolvent_norm(lambdas[i], ops_cache[modes[j]], method), None
        except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            return ij, np.nan, str(exc)

    results = executor.map(work, tasks) if executor is not None else map(work, tasks)
    for (i, j), val, err in results:
        out[i, j] = val
        if err is not None:
            failures.append({"lambda": float(lambdas[i]), "m": modes[j], "error": err})
    return ScanResult(lambdas=lambdas, modes=modes, per_mode=out, failures=failures)


def envelope_along_diagonal(alpha: int, ns, spec: DomainSpec = None, floor: int = 8000, factor: float = 1.0, refine: bool = False) -> dict:
    """||R(i lambda_{alpha n, n})|| restricted to m = alpha n, plus a log-log fit.

    With ``refine`` every point is recomputed on a grid twice as fine and the
    relative change is reported.
    """
    spec = spec or DomainSpec()
    lam, norms, fine, ms = [], [], [], []
    for n in ns:
        z = diagonal_zero(alpha, n)
        N = nodes_for(z.value, floor, factor)
        val = resolvent_norm(z.value, assemble_mode_operators(build_grid(spec, N), z.m))
        lam.append(z.value)
        ms.append(z.m)
        norms.append(val)
        if refine:
            fine.append(resolvent_norm(z.value, assemble_mode_operators(build_grid(spec, 2 * N), z.m)))
    fit = loglog_fit(lam, norms)
    out = {"n": list(ns), "m": ms, "lambda": lam, "norm": norms, "norm_over_lambda": list(np.array(norms) / np.array(lam)), "fit": fit.as_dict()}
    if refine:
        out["norm_refined"] = fine
        out["refinement_change"] = list(np.abs(np.array(fine) - np.array(norms)) / np.array(fine))
    return out


# --------------------------------------------------------------------------
# spectrum
# --------------------------------------------------------------------------


@dataclass
class SpectrumResult:
    m: int
    shift: complex
    eigenvalues: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray
    backward_errors: np.ndarray = None
    vectors: np.ndarray = field(default=None, repr=False)

    @property
    def max_real(self) -> float:
        return float(np.max(self.eigenvalues.real)) if self.eigenvalues.size else -np.inf


def _generator_matrix(ops):
    S1, Sa, M = ops.sparse_forms()
    minv = sp.diags(1.0 / M.diagonal())
    n = ops.n_free
    Z = sp.csc_matrix((n, n))
    I = sp.identity(n, format="csc")
    return sp.bmat([[Z, I], [-(minv @ S1), -(minv @ Sa)]], format="csc"), S1, M.diagonal()


def _gram_norm(S1, mass, x):
    n = mass.size
    u, v = x[:n], x[n:]
    return float(np.sqrt(max(np.real(np.vdot(u, S1 @ u)) + np.sum(mass * np.abs(v) ** 2), 0.0)))


def spectrum_mode(m: int, grid, shift: complex, count: int = 8, tol: float = 1e-8, refine_steps: int = 3) -> SpectrumResult:
    """Eigenvalues of A_m nearest ``shift`` by shift-invert Arnoldi.

    Every returned pair is polished by a few inverse-iteration steps and
    carries its relative residual ||(A - mu) V|| / ||V|| in the energy norm.  Pairs above ``tol`` are flagged as not converged.
    """
    ops = assemble_mode_operators(grid, m)
    A, S1, mass = _generator_matrix(ops)
    A = A.astype(complex)
    k = min(int(count), 2 * ops.n_free - 2)
    try:
        vals, vecs = spla.eigs(A, k=k, sigma=shift, which="LM", tol=1e-12, maxiter=5000, v0=np.ones(A.shape[0], dtype=complex))
    except spla.ArpackNoConvergence as exc:
        vals, vecs = exc.eigenvalues, exc.eigenvectors
    I = sp.identity(A.shape[0], format="csc")
    res = np.empty(vals.size)
    for j in range(vals.size):
        mu, x = vals[j], vecs[:, j]
        lu = spla.splu((A - mu * I).tocsc())
        for _ in range(refine_steps):
            # inverse iteration at the fixed Arnoldi shift, then a Rayleigh update
            y = lu.solve(x)
            x = y / np.linalg.norm(y)
            Ax = A @ x
            mu = np.vdot(x, Ax) / np.vdot(x, x)
        vals[j] = mu
        vecs[:, j] = x
        r = A @ x - mu * x
        res[j] = _gram_norm(S1, mass, r) / _gram_norm(S1, mass, x)
    order = np.argsort(np.abs(vals - shift))
    vals, vecs, res = vals[order], vecs[:, order], res[order]
    bwd = res / (generator_norm_bound(ops) + np.abs(vals))
    return SpectrumResult(
        m=int(m),
        shift=complex(shift),
        eigenvalues=vals,
        residuals=res,
        converged=res <= tol,
        backward_errors=bwd,
        vectors=vecs,
    )


def generator_norm_bound(ops: ModeOperators) -> float:
    """Cheap upper estimate of ||A_m|| from row sums of the two blocks."""
    d1, e1, da, ea, mass = ops.free_forms()
    pad = lambda e: np.concatenate([[0.0], np.abs(e)]) + np.concatenate([np.abs(e), [0.0]])
    visc = np.max((np.abs(da) + pad(ea)) / mass)
    elast = np.sqrt(np.max((np.abs(d1) + pad(e1)) / mass))
    return float(visc + elast + 1.0)
