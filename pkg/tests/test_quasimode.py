from functools import lru_cache

import numpy as np
import pytest

from kvdamp import quasimode as qm
from kvdamp.fitting import loglog_fit
from kvdamp.model import DomainSpec, assemble_mode_operators, build_grid

SPEC = DomainSpec()
NS = tuple(range(4, 41, 4))


@lru_cache(maxsize=None)
def sweep():
    return qm.quasimode_sweep(8, NS, SPEC)


@lru_cache(maxsize=None)
def step0_sweep():
    return [qm.build_step0(8, n, qm.quasimode_grid(SPEC, 8, n)) for n in NS]


def _slope_vs_h(modes, key):
    return loglog_fit([q.h for q in modes], [q.report[key] for q in modes]).slope


def test_smooth_step_and_cutoff():
    t = np.linspace(-0.5, 1.5, 401)
    s, s1, s2 = qm.smooth_step(t)
    assert np.all(s[t <= 0] == 0) and np.all(s[t >= 1] == 1)
    assert np.all(np.diff(s) >= 0)
    chi, c1, c2 = qm.cutoff(np.array([0.0, 0.69, 0.85, 1.0]), 0.3)
    np.testing.assert_allclose(chi, [0, 0, 1, 1])
    # derivative consistency by central differences
    x = np.linspace(0.05, 0.95, 50)
    h = 1e-6
    num = (qm.smooth_step(x + h)[0] - qm.smooth_step(x - h)[0]) / (2 * h)
    np.testing.assert_allclose(qm.smooth_step(x)[1], num, rtol=1e-5, atol=1e-8)


def test_step0_flux_identity():
    for q in step0_sweep():
        assert q.report["neumann_mismatch"] <= 1e-12
        assert q.report["elliptic_residual"] <= 1e-12


def test_step0_dirichlet_jump_scales_like_h_three_halves():
    assert _slope_vs_h(step0_sweep(), "dirichlet_mismatch_h12") == pytest.approx(1.5, abs=0.2)


@pytest.mark.xfail(strict=True, reason="annulus field decays on the scale 1/m ~ h, giving ||u1|| ~ h^{5/2}")
def test_step0_u1_l2_scales_like_h_squared():
    assert _slope_vs_h(step0_sweep(), "l2_u1") == pytest.approx(2.0, abs=0.2)


def test_step0_u1_l2_measured_exponent():
    assert _slope_vs_h(step0_sweep(), "l2_u1") == pytest.approx(2.5, abs=0.1)


def test_corrected_transmission_exact():
    for q in sweep():
        assert q.report["dirichlet_mismatch"] <= 1e-10 * q.report["norm_U"]
        assert q.report["neumann_mismatch"] <= 1e-10 * q.report["norm_U"]


def test_energy_normalisation():
    for q in sweep():
        assert 0.5 <= q.report["norm_U"] <= 2.0
        assert q.report["neumann_trace"] == pytest.approx(np.sqrt(2), rel=1e-10)


def test_residual_slope():
    modes = sweep()
    fit = loglog_fit([q.lam for q in modes], [q.report["norm_F"] for q in modes])
    assert fit.slope == pytest.approx(-1.0, abs=0.15)
    assert 50 <= modes[0].lam and modes[-1].lam <= 800


def test_correction_h1_scales_like_h():
    assert _slope_vs_h(sweep(), "correction_h1") == pytest.approx(1.0, abs=0.2)


@pytest.mark.xfail(strict=True, reason="commutator term is O(h) in L^2: slope 1, the residual needs nothing smaller")
def test_commutator_scales_like_h_three_halves():
    assert _slope_vs_h(sweep(), "g2_norm") == pytest.approx(1.5, abs=0.25)


def test_commutator_measured_exponents():
    modes = sweep()
    assert _slope_vs_h(modes, "g2_norm") == pytest.approx(1.0, abs=0.1)
    assert _slope_vs_h(modes, "g2_scaled") == pytest.approx(2.0, abs=0.1)


def test_discrete_residual_matches_closed_form():
    n = 8
    grid = build_grid(SPEC, 16000)
    q = qm.build_corrected(8, n, grid)
    ops = assemble_mode_operators(grid, q.m)
    disc = qm.residual_norms(q, ops)
    cont = qm.residual_norms(q)
    assert disc["ratio"] == pytest.approx(cont["ratio"], rel=0.02)
    assert disc["norm_U"] == pytest.approx(cont["norm_U"], rel=1e-3)


def test_step0_residual_larger_than_corrected():
    grid = build_grid(SPEC, 16000)
    q0 = qm.build_step0(8, 8, grid)
    q1 = qm.build_corrected(8, 8, grid)
    ops = assemble_mode_operators(grid, q1.m)
    assert qm.residual_norms(q0, ops)["norm_F"] > 10 * qm.residual_norms(q1, ops)["norm_F"]


def test_apriori_exponents_that_hold():
    ex = qm.apriori_check(list(sweep()))["exponents"]
    assert ex["grad_v1"] == pytest.approx(0.5, abs=0.2)
    assert ex["grad_u1"] == pytest.approx(1.5, abs=0.2)
    assert ex["trace_u1_h12"] == pytest.approx(1.5, abs=0.2)


@pytest.mark.xfail(strict=True, reason="||v1|| ~ h^{3/2}: the L^2 bound o(h) holds but is not attained")
def test_apriori_v1_exponent_one():
    ex = qm.apriori_check(list(sweep()))["exponents"]
    assert ex["l2_v1"] == pytest.approx(1.0, abs=0.2)


def test_apriori_single_mode_table_only():
    out = qm.apriori_check(sweep()[0])
    assert out["exponents"] == {} and len(out["h"]) == 1


def test_rejections():
    grid = qm.quasimode_grid(SPEC, 8, 4)
    with pytest.raises(ValueError):
        qm.build_corrected(8, 4, grid, cutoff_width=0.6)
    with pytest.raises(ValueError):
        qm.build_corrected(8, 4, grid, cutoff_width=0.0)
    with pytest.raises(ValueError):
        qm.build_step0(8, 4, build_grid(DomainSpec(damping_value=2.0), grid.size - 1))
    # alpha = 1000: the caustic is too close to the boundary
    with pytest.raises(ValueError):
        qm.build_step0(1000, 1, build_grid(SPEC, 4000))
    q = qm.build_corrected(8, 4, grid)
    with pytest.raises(ValueError):
        qm.residual_norms(q, assemble_mode_operators(grid, q.m + 1))
    with pytest.raises(ValueError):
        qm.residual_norms(q, assemble_mode_operators(build_grid(SPEC, 500), q.m))


def test_coarse_grid_rejected():
    with pytest.raises(ValueError, match="boundary layer"):
        qm.build_corrected(8, 4, build_grid(SPEC, 80))
