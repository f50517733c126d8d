"""Compare the numba kernels with their numpy/scipy fallbacks.

Run:  python3 benchmarks/bench_kernels.py [--nodes 20000] [--steps 2000]
Both variants are called directly, so the KVDAMP_BACKEND flag is not needed.
"""

import argparse
import time

import numpy as np

from kvdamp import _kernels as K
from kvdamp.model import DomainSpec, assemble_mode_operators, build_grid
from kvdamp.rays import phase_space_samples
from kvdamp.semigroup import smooth_samples


def best_of(fn, repeat=3):
    fn()  # warm-up (numba compilation, caches)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nodes", type=int, default=20000)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--rays", type=int, default=128)
    args = p.parse_args()

    grid = build_grid(DomainSpec(), args.nodes)
    U0, ops = smooth_samples(grid, modes=(4,), per_mode=1)[0]
    d1, e1, da, ea, mass = (np.ascontiguousarray(a) for a in ops.free_forms())
    u = np.ascontiguousarray(ops.restrict(U0.u.values))
    v = np.ascontiguousarray(ops.restrict(U0.v.values))
    empty = np.zeros(0, dtype=complex)
    dt = 0.01

    def stepper(fn):
        return lambda: fn(d1, e1, da, ea, mass, u, v, dt, args.steps, 100, empty, empty, 1.0 + 0j, 2 * np.pi)

    X, Y, DX, DY = phase_space_samples(args.rays, 1.0)
    sub = -e1.astype(complex)
    diag = (d1 + 1j * mass).astype(complex)
    rhs = (np.ones_like(d1) + 0j)

    cases = [
        ("midpoint_run", stepper(K.midpoint_run_np), stepper(K.midpoint_run_nb), args.nodes * args.steps),
        ("tridiag_solve", lambda: K.tridiag_solve_np(sub, diag, sub, rhs), lambda: K.tridiag_solve_nb(sub, diag, sub, rhs), args.nodes),
        ("tridiag_matvec", lambda: K.tridiag_matvec_np(d1, e1, u), lambda: K.tridiag_matvec_nb(d1, e1, u), args.nodes),
        ("billiard_batch", lambda: K.billiard_batch_np(X, Y, DX, DY, 1.0, 32), lambda: K.billiard_batch_nb(X, Y, DX, DY, 1.0, 32), X.size * 32),
    ]
    ua, va, ea_, *_ = K.midpoint_run_np(d1, e1, da, ea, mass, u, v, dt, 200, 100, empty, empty, 1.0 + 0j, 2 * np.pi)
    ub, vb, eb, *_ = K.midpoint_run_nb(d1, e1, da, ea, mass, u, v, dt, 200, 100, empty, empty, 1.0 + 0j, 2 * np.pi)
    agree = np.max(np.abs(ua - ub)) / np.max(np.abs(ua))
    print(f"numba available: {K.HAVE_NUMBA}; midpoint_run numpy/numba state difference after 200 steps: {agree:.2e}")
    print(f"{'kernel':16s} {'numpy [s]':>11s} {'numba [s]':>11s} {'speedup':>8s} {'ns/item (numba)':>16s}")
    for name, f_np, f_nb, items in cases:
        t_np = best_of(f_np)
        t_nb = best_of(f_nb)
        print(f"{name:16s} {t_np:11.4f} {t_nb:11.4f} {t_np / t_nb:8.2f} {1e9 * t_nb / items:16.2f}")


if __name__ == "__main__":
    main()
