import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from hetplan.coverage import (above_one_constant, ccdf_curve, ccdf_from_weight, macro_weight,
                              mean_rate_equivalent, mean_rate_macro, rate_above_one,
                              rate_above_one_exact, rate_from_weight, series_coefficients,
                              sir_ccdf, sir_ccdf_point, tail_rate_integral)
from hetplan.model import InfeasibleDesignError, NetworkParams, solve_equivalent_pmacro
from hetplan.specfun import QuadratureSpec, gamma_product


@pytest.mark.parametrize("tau,expected", [(1.0, 2 / math.pi), (4.0, 1 / math.pi), (100.0, 0.2 / math.pi)])
def test_homogeneous_tail_above_one(homogeneous, tau, expected):
    pt = sir_ccdf_point(homogeneous, tau)
    assert pt.prob == pytest.approx(expected, rel=1e-13)
    assert pt.method == "closed-form"


def test_macro_weight_halves_tail():
    net = NetworkParams(1e-3, 0.5, 1.0, 1.0, 4.0)
    assert macro_weight(net) == pytest.approx(0.5, rel=1e-15)
    assert sir_ccdf(net, 2.0) == pytest.approx(0.5 * 2 ** -0.5 * 2 / math.pi, rel=1e-13)


def test_series_matches_closed_form_at_one():
    for beta in (2.5, 3.0, 4.0, 6.0):
        c = series_coefficients(beta, 1.0)
        assert len(c) == 1
        assert c[0] == pytest.approx(1.0 / gamma_product(beta), rel=1e-14)


def test_continuity_across_one(homogeneous):
    below, above = sir_ccdf(homogeneous, 1.0 - 1e-9), sir_ccdf(homogeneous, 1.0 + 1e-9)
    assert below == pytest.approx(above, abs=1e-7)


@given(t1=st.floats(0.13, 30.0), t2=st.floats(0.13, 30.0), u=st.floats(0.05, 1.0))
def test_tail_non_increasing_in_threshold(t1, t2, u):
    lo, hi = sorted((t1, t2))
    a, b = ccdf_from_weight(4.0, u, lo).prob, ccdf_from_weight(4.0, u, hi).prob
    assert 0.0 <= b <= a + 1e-9 <= 1.0 + 1e-9


@given(u1=st.floats(0.0, 1.0), u2=st.floats(0.0, 1.0), tau=st.floats(0.13, 10.0))
def test_tail_non_decreasing_in_weight(u1, u2, tau):
    lo, hi = sorted((u1, u2))
    assert ccdf_from_weight(3.0, lo, tau).prob <= ccdf_from_weight(3.0, hi, tau).prob + 1e-9


def test_truncated_points_carry_valid_bracket(homogeneous):
    curve = ccdf_curve(homogeneous, [0.02, 0.05, 0.1, 0.5])
    assert curve.methods[:2] == ("truncated", "truncated")
    assert np.all(curve.lower <= curve.probs) and np.all(curve.probs <= curve.upper)
    assert np.all(np.diff(curve.probs) <= 1e-12)
    # the exact tail at tau = 1/8 is a valid floor for smaller thresholds
    floor = sir_ccdf(homogeneous, 0.125)
    assert curve.lower[0] >= floor


def test_empty_macro_tier_has_no_coverage():
    net = NetworkParams(1e-3, 0.0, 1.0, 1.0, 4.0)
    assert sir_ccdf(net, 0.5) == 0.0
    assert float(mean_rate_macro(net)) == 0.0


def test_micro_off_design_equals_homogeneous(homogeneous):
    net = NetworkParams(1e-3, 0.4, 6.25, 0.0, 4.0)
    for tau in (0.3, 1.0, 3.0):
        assert sir_ccdf(net, tau) == pytest.approx(sir_ccdf(homogeneous, tau), rel=1e-13)


def test_invalid_threshold():
    with pytest.raises(ValueError):
        ccdf_from_weight(4.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        ccdf_from_weight(4.0, 1.0, math.inf)


@pytest.mark.parametrize("beta", [2.5, 3.0, 4.0, 6.0])
def test_tail_rate_integral_against_quadrature(beta):
    a = 2.0 / beta
    f = lambda t: math.exp(-a * (t * math.log(2.0) + math.log1p(-math.exp(-t * math.log(2.0)))))
    ref, _ = integrate.quad(f, 1.0, math.inf, epsabs=0, epsrel=1e-12, limit=200)
    assert tail_rate_integral(beta) == pytest.approx(ref, rel=1e-10)


def test_above_one_constant_at_four():
    assert above_one_constant(4.0) == pytest.approx(1 / math.log(2.0), rel=1e-13)


def test_above_one_heuristic_values():
    r = rate_above_one(NetworkParams(1e-3, 0.5, 4.0, 1.0, 4.0))
    assert float(r) == pytest.approx(1 / math.log(2.0), rel=1e-13) and not r.extrapolated
    r0 = rate_above_one(NetworkParams(1e-3, 0.5, 4.0, 0.0, 4.0, P_ref=1.0))
    assert float(r0) == pytest.approx(float(r)) and r0.extrapolated
    assert float(rate_above_one(NetworkParams(1e-3, 0.0, 4.0, 1.0, 4.0))) == 0.0


def test_exact_above_one_rate_is_linear_in_weight():
    net = NetworkParams(1e-3, 0.5, 1.0, 1.0, 4.0)
    assert rate_above_one_exact(net) == pytest.approx(0.5 / math.log(2.0), rel=1e-13)


def test_mean_rate_bracket_and_value(homogeneous):
    est = mean_rate_macro(homogeneous)
    assert est.lower <= est.value <= est.upper
    assert est.half_width < 1e-4
    assert est.value == pytest.approx(2.3092, abs=2e-4)


@given(u1=st.floats(0.0, 1.0), u2=st.floats(0.0, 1.0))
def test_mean_rate_non_decreasing_in_weight(u1, u2):
    lo, hi = sorted((u1, u2))
    a, b = rate_from_weight(4.0, lo), rate_from_weight(4.0, hi)
    assert a.lower <= b.upper


def test_mean_rate_vanishes_with_weight():
    assert float(rate_from_weight(4.0, 0.0)) == 0.0
    est = rate_from_weight(4.0, 1e-6)
    # only the small-SIR bracket survives; its width is one grid cell
    assert 0 < est.lower < 1e-5 and est.upper < 4e-3


def test_equivalent_rate_is_design_independent():
    ref = mean_rate_equivalent(NetworkParams(1e-3, 1.0, 1.0, 1.0, 4.0))
    for p, pu, pm in [(0.4, 0.0, 6.25), (0.5, 0.5, solve_equivalent_pmacro(0.5, 0.5, 1.0, 4.0))]:
        assert mean_rate_equivalent(NetworkParams(1e-3, p, pm, pu, 4.0)).value == ref.value
    with pytest.raises(InfeasibleDesignError):
        mean_rate_equivalent(NetworkParams(1e-3, 0.5, 1.0, 0.0, 4.0))


def test_quadrature_spec_is_threaded_through(homogeneous):
    coarse = QuadratureSpec(points=32, rel_tol=1e-6)
    assert sir_ccdf(homogeneous, 0.3, coarse) == pytest.approx(sir_ccdf(homogeneous, 0.3), rel=1e-6)
