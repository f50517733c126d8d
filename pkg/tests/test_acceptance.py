"""Acceptance checks, one test per criterion.

Every test prints a single ``[PASS]`` / ``[FAIL]`` line and then asserts the
tolerances below against the measured values.  The literals here are the
pinned tolerances; they are checked independently of ``CriterionResult.passed``.
"""

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from kvdamp import acceptance

SLOPE_TOL = 0.15
EXPONENT_TOL = 0.2
ORDER_TOL = 0.2
TRANSMISSION_TOL = 1e-10
ELLIPTIC_SPREAD = 3.0
DELTA_MIN = 0.05
TRACE_BAND = 3.0
DECAY_CAP = 20.0
ENERGY_RATIO = 0.25
DISSIPATION_TOL = 1e-6
CONSERVATION_TOL = 1e-10
EIG_BAND = 4.0
IDENTITY_TOL = 1e-10


@pytest.fixture(scope="module")
def result(request):
    number = request.param
    r = acceptance.evaluate(number, full=True)
    print()
    print(r.line())
    request.config.stash[ACCEPTANCE_LINES].append(r.line())
    return r


def crit(number):
    return pytest.mark.parametrize("result", [number], indirect=True, ids=[f"criterion_{number:02d}"])


@crit(1)
def test_resolvent_grows_linearly(result):
    m = result.measured
    assert abs(m["slope"] - 1.0) <= SLOPE_TOL
    assert m["max_refinement_change"] <= 1e-2
    assert result.passed


@crit(2)
def test_quasimode_residual_rate(result):
    m = result.measured
    assert abs(m["slope"] + 1.0) <= SLOPE_TOL
    assert 0.5 <= m["norm_U_min"] and m["norm_U_max"] <= 2.0
    assert m["lambda_range"][0] >= 50 and m["lambda_range"][1] <= 800
    assert result.passed


@crit(3)
def test_apriori_exponents(result):
    m = result.measured
    for key, target in m["targets"].items():
        assert abs(m["exponents"][key] - target) <= EXPONENT_TOL, f"{key}: {m['exponents'][key]:.3f} vs {target}"
    assert result.passed


@crit(4)
def test_transmission_exact(result):
    m = result.measured
    assert m["dirichlet"] <= TRANSMISSION_TOL and m["neumann"] <= TRANSMISSION_TOL
    assert result.passed


@crit(5)
def test_elliptic_constant_uniform(result):
    assert result.measured["spread"] <= ELLIPTIC_SPREAD
    assert result.passed


@crit(6)
def test_dn_symbol_rate(result):
    m = result.measured
    assert m["refinement_change"] <= 0.05
    assert m["spread_over_hbar"] <= 2.0
    assert result.passed


@crit(7)
def test_iota_law(result):
    m = result.measured
    assert 0.5 <= m["stat_min"] and m["stat_max"] <= 3.0
    for per in m["per_alpha"].values():
        assert per["increasing"] and per["below_limit"]
    assert result.passed


@crit(8)
def test_hyperbolic_localization(result):
    m = result.measured
    assert m["delta_min"] >= DELTA_MIN
    assert m["trace_band"] <= TRACE_BAND
    assert result.passed


@crit(9)
def test_decay_and_persistence(result):
    m = result.measured
    assert m["max_weighted"] <= DECAY_CAP
    assert m["tail_growth"] <= 2.0
    assert m["C_spread"] <= 2.0
    assert m["energy_ratio_min"] >= ENERGY_RATIO
    assert all(c <= b * (1 + 1e-9) for c, b in zip(m["C"], m["residual_bound"]))
    assert result.passed


@crit(10)
def test_dissipation_identity(result):
    m = result.measured
    assert m["dissipation_defect"] <= DISSIPATION_TOL
    assert m["undamped_defect"] <= CONSERVATION_TOL
    assert result.passed


@crit(11)
def test_spectrum_left_half_plane(result):
    m = result.measured
    assert m["max_real"] < 0
    assert m["band"] <= EIG_BAND
    assert result.passed


@crit(12)
def test_geometric_control(result):
    m = result.measured
    assert m["max_time"] <= m["bound"] == pytest.approx(4.0)
    assert m["n_flagged"] == 0 and m["min_r0"] > 0
    assert result.passed


@crit(13)
def test_numerics_hygiene(result):
    m = result.measured
    for key in ("laplacian", "elliptic", "midpoint"):
        assert abs(m[key] - 2.0) <= ORDER_TOL, key
    assert m["recurrence"] <= IDENTITY_TOL and m["wronskian"] <= IDENTITY_TOL
    assert result.passed


def test_quick_report_is_json_clean():
    r = acceptance.evaluate(12, full=False)
    d = r.as_dict()
    assert d["number"] == 12 and "_headline" not in d["measured"]
    assert isinstance(d["passed"], bool) and np.isfinite(d["seconds"])
