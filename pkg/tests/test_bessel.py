import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kvdamp import bessel
from kvdamp.model import DomainSpec, build_grid


@pytest.mark.parametrize("m,z", [(0, 0.5), (1, 3.0), (5, 10.0), (20, 15.0), (50, 80.0), (200, 250.0), (1000, 1200.0)])
def test_values_against_mpmath(m, z):
    with mpmath.workdps(40):
        j = float(mpmath.besselj(m, z))
        y = float(mpmath.bessely(m, z))
        jp = float(mpmath.besselj(m, z, derivative=1))
        yp = float(mpmath.bessely(m, z, derivative=1))
    assert bessel.bessel_j(m, z) == pytest.approx(j, rel=1e-12)
    assert bessel.bessel_y(m, z) == pytest.approx(y, rel=1e-12)
    assert bessel.bessel_j_prime(m, z) == pytest.approx(jp, rel=1e-11)
    assert bessel.bessel_y_prime(m, z) == pytest.approx(yp, rel=1e-11)


def test_values_at_origin():
    assert bessel.bessel_j(0, 0.0) == 1.0
    assert bessel.bessel_j(1, 0.0) == 0.0


def test_y_rejects_nonpositive():
    with pytest.raises(ValueError):
        bessel.bessel_y(0, 0.0)
    with pytest.raises(ValueError):
        bessel.bessel_j(-1, 1.0)


def test_underflow_flagged():
    val, flag = bessel.bessel_j(2000, 10.0, with_flag=True)
    assert val == 0.0 and flag
    val, flag = bessel.bessel_j(5, 10.0, with_flag=True)
    assert val != 0.0 and not flag


def test_wronskian_single_point():
    assert bessel.wronskian_residual(5, 10.0) <= 1e-12


def test_identity_lattice():
    ms = np.array([0, 1, 2, 5, 10, 50, 100, 500, 1000, 2000])
    z = np.geomspace(0.5, 3000.0, 60)
    M, Z = np.meshgrid(ms, z)
    assert np.nanmax(bessel.recurrence_residual(M, Z)) <= 1e-10
    assert np.nanmax(bessel.wronskian_residual(M, Z)) <= 1e-10


def test_first_zeros():
    assert bessel.bessel_zero(0, 1).value == pytest.approx(2.404825557695773, abs=1e-12)
    assert bessel.bessel_zero(1, 1).value == pytest.approx(3.831705970207512, abs=1e-12)
    assert abs(bessel.bessel_j(0, 2.40482555769577)) <= 1e-12


@pytest.mark.parametrize("m,n", [(0, 1), (3, 2), (8, 5), (40, 3), (120, 10)])
def test_zeros_against_mpmath(m, n):
    with mpmath.workdps(30):
        ref = float(mpmath.besseljzero(m, n))
    assert bessel.bessel_zero(m, n).value == pytest.approx(ref, abs=1e-12 * max(1.0, ref))


def test_interlacing_example():
    a, b, c = bessel.bessel_zero(2, 2).value, bessel.bessel_zero(3, 2).value, bessel.bessel_zero(2, 3).value
    assert a < b < c


@settings(max_examples=25, deadline=None)
@given(m=st.integers(0, 300), n=st.integers(1, 12))
def test_interlacing_property(m, n):
    assert bessel.bessel_zero(m, n).value < bessel.bessel_zero(m + 1, n).value < bessel.bessel_zero(m, n + 1).value


def test_zero_residual_and_ratio_below_one():
    for m in range(0, 513, 32):
        z = bessel.bessel_zero(m, 1)
        assert z.residual <= 1e-14
        if m:
            assert bessel.hyperbolicity_ratio(z) < 1


def test_zero_preconditions():
    with pytest.raises(ValueError):
        bessel.bessel_zero(0, 0)
    with pytest.raises(ValueError):
        bessel.bessel_zero(-2, 1)


def test_iota_sequence_below_limit_alpha_one():
    est = bessel.iota_estimate(1, 8)
    assert est["below_limit"] and est["increasing"]


def test_iota_closed_form_matches_extrapolation():
    for a in (4, 8, 16):
        est = bessel.iota_estimate(a, 20)
        assert est["iota"] == pytest.approx(est["iota_limit"], rel=1e-6)


def test_bracket_statistic_window():
    s = {a: bessel.iota_estimate(a, 20)["statistic"] for a in (8, 16, 32, 64)}
    assert 0.5 <= s[8] <= 3.0
    assert max(s.values()) / min(s.values()) <= 2.0


def test_iota_preconditions():
    with pytest.raises(ValueError):
        bessel.iota_estimate(0, 8)
    with pytest.raises(ValueError):
        bessel.iota_estimate(8, 3)


def test_eigenfunction_trace_vanishes():
    e = bessel.disc_eigenfunction(8, 4, build_grid(DomainSpec(), 200))
    assert e.field.values[200 // 2] == 0.0


def test_neumann_trace_band_and_gap():
    g = build_grid(DomainSpec(), 8)
    tr = [bessel.neumann_trace(bessel.disc_eigenfunction(8, n, g)) for n in range(1, 21)]
    assert max(tr) / min(tr) <= 3
    # J_m'(z) = -J_{m+1}(z) at zeros of J_m gives the exact value sqrt(2)
    np.testing.assert_allclose(tr, np.sqrt(2), rtol=1e-12)
    gaps = [1 - bessel.hyperbolicity_ratio(bessel.diagonal_zero(8, n)) for n in range(1, 41)]
    assert min(gaps) > 0.05
    lim = 8 / bessel.iota_limit(8)
    assert bessel.hyperbolicity_ratio(bessel.diagonal_zero(8, 40)) == pytest.approx(lim, abs=2e-2)
