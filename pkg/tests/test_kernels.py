import os
import subprocess
import sys

import numpy as np
import pytest

from kvdamp import _kernels as K
from kvdamp.model import DomainSpec, assemble_mode_operators, build_grid
from kvdamp.semigroup import smooth_samples

pytestmark = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")


def _forms(n=300, m=3):
    grid = build_grid(DomainSpec(), n)
    U0, ops = smooth_samples(grid, modes=(m,), per_mode=1)[0]
    forms = [np.ascontiguousarray(a) for a in ops.free_forms()]
    return forms, np.ascontiguousarray(ops.restrict(U0.u.values)), np.ascontiguousarray(ops.restrict(U0.v.values))


def test_matvec_backends_agree():
    rng = np.random.default_rng(0)
    d, e = rng.normal(size=50), rng.normal(size=49)
    x = rng.normal(size=50) + 1j * rng.normal(size=50)
    np.testing.assert_allclose(K.tridiag_matvec_nb(d, e, x), K.tridiag_matvec_np(d, e, x), rtol=1e-14)


def test_solve_backends_agree_and_solve():
    rng = np.random.default_rng(1)
    n = 80
    sub = rng.normal(size=n - 1) + 1j * rng.normal(size=n - 1)
    sup = rng.normal(size=n - 1) + 1j * rng.normal(size=n - 1)
    diag = 6 + rng.normal(size=n) + 1j * rng.normal(size=n)
    b = rng.normal(size=n) + 0j
    x1 = K.tridiag_solve_nb(sub, diag, sup, b)
    x2 = K.tridiag_solve_np(sub, diag, sup, b)
    T = np.diag(diag) + np.diag(sub, -1) + np.diag(sup, 1)
    np.testing.assert_allclose(T @ x1, b, atol=1e-12)
    np.testing.assert_allclose(x1, x2, rtol=1e-12, atol=1e-14)


def test_zero_pivot_raises():
    with pytest.raises(ZeroDivisionError):
        K.tridiag_solve_nb(np.zeros(1, complex), np.zeros(2, complex), np.zeros(1, complex), np.ones(2, complex))


def test_midpoint_backends_agree():
    (d1, e1, da, ea, mass), u, v = _forms()
    ref_u, ref_v = u.copy(), v.copy()
    rho = (1 + 0.5j) / (1 - 0.5j)
    a = K.midpoint_run_nb(d1, e1, da, ea, mass, u, v, 0.01, 100, 10, ref_u, ref_v, rho, 2 * np.pi)
    b = K.midpoint_run_np(d1, e1, da, ea, mass, u, v, 0.01, 100, 10, ref_u, ref_v, rho, 2 * np.pi)
    for x, y in zip(a[:5], b[:5]):
        np.testing.assert_allclose(x, y, rtol=1e-11, atol=1e-13)
    assert a[5] == b[5] == 11


def test_billiard_backends_agree():
    rng = np.random.default_rng(2)
    phi = rng.uniform(0, 2 * np.pi, 40)
    x, y = 0.5 * rng.uniform(size=40) * np.cos(phi), 0.5 * rng.uniform(size=40) * np.sin(phi)
    dx, dy = np.cos(phi + 1), np.sin(phi + 1)
    for p, q in zip(K.billiard_batch_nb(x, y, dx, dy, 1.0, 10), K.billiard_batch_np(x, y, dx, dy, 1.0, 10)):
        np.testing.assert_allclose(p, q, rtol=1e-12, atol=1e-12)


def test_backend_flag_selects_fallback():
    env = dict(os.environ, KVDAMP_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", "from kvdamp import _kernels as K; print(K.BACKEND, K.midpoint_run is K.midpoint_run_np)"], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]


def test_backend_flag_rejects_unknown():
    env = dict(os.environ, KVDAMP_BACKEND="fortran")
    out = subprocess.run([sys.executable, "-c", "import kvdamp._kernels"], env=env, capture_output=True, text=True)
    assert out.returncode != 0 and "KVDAMP_BACKEND" in out.stderr
