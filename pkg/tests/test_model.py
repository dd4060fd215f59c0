import math

import pytest
from hypothesis import given, strategies as st

from hetplan.model import (DesignPoint, InfeasibleDesignError, NetworkParams, UserParams,
                           equivalence_residual, solve_equivalent_pmacro, validate)


def test_valid_parameters_give_empty_report(homogeneous, users):
    rep = validate(homogeneous, users)
    assert rep.ok and not rep.violations


def test_beta_two_is_rejected():
    rep = validate(NetworkParams(1e-3, 1.0, 1.0, 1.0, 2.0))
    assert "beta must exceed 2" in rep.violations


def test_fraction_out_of_range_is_rejected():
    rep = validate(NetworkParams(1e-3, 1.5, 1.0, 1.0, 4.0))
    assert "p outside [0,1]" in rep.violations


def test_report_lists_every_violation(users):
    rep = validate(NetworkParams(-1.0, 0.0, -1.0, 0.0, 1.5, A=0.0, P_ref=0.0), users)
    assert len(rep.violations) == 6
    assert "no service: p = 0 and P_micro = 0" in rep.violations


def test_no_service_only_matters_with_users():
    net = NetworkParams(1e-3, 0.0, 1.0, 0.0, 4.0)
    assert validate(net).ok
    assert not validate(net, UserParams(0.0, 0.0, 0.0)).violations
    assert validate(net, UserParams(1e-3, 0.0, 0.0)).violations


def test_homogeneous_identity():
    assert solve_equivalent_pmacro(1.0, 0.37, 1.0, 4.0) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("p,expected", [(0.5, 4.0), (0.4, 6.25)])
def test_micro_off_power(p, expected):
    pm = solve_equivalent_pmacro(p, 0.0, 1.0, 4.0)
    assert pm == pytest.approx(expected, rel=1e-14)
    assert equivalence_residual(p, 0.0, pm, 1.0, 4.0) < 1e-14


def test_zero_fraction_is_an_error():
    with pytest.raises(InfeasibleDesignError):
        solve_equivalent_pmacro(0.0, 0.5, 1.0, 4.0)


def test_micro_over_budget_is_infeasible():
    with pytest.raises(InfeasibleDesignError):
        solve_equivalent_pmacro(0.5, 5.0, 1.0, 4.0)


@given(p=st.floats(0.01, 1.0), ratio=st.floats(0.0, 1.0), beta=st.floats(2.1, 8.0),
       p_ref=st.floats(1e-3, 1e3))
def test_solved_design_satisfies_equivalence(p, ratio, beta, p_ref):
    pu = ratio * p_ref
    pm = solve_equivalent_pmacro(p, pu, p_ref, beta)
    assert equivalence_residual(p, pu, pm, p_ref, beta) < 1e-12
    assert DesignPoint(p, pu, pm).is_feasible(p_ref, beta)


@given(p=st.floats(0.01, 1.0), beta=st.floats(2.1, 8.0))
def test_micro_off_closed_form(p, beta):
    assert solve_equivalent_pmacro(p, 0.0, 1.0, beta) == pytest.approx(p ** (-beta / 2), rel=1e-12)


@given(p=st.floats(0.01, 1.0), ratio=st.floats(0.0, 1.0), beta=st.floats(2.1, 8.0))
def test_weight_equals_macro_share_of_reference(p, ratio, beta):
    pm = solve_equivalent_pmacro(p, ratio, 1.0, beta)
    net = NetworkParams(1e-3, p, pm, ratio, beta)
    assert 1.0 + net.kappa() == pytest.approx(1.0 / (p * pm ** (2 / beta)), rel=1e-12)


def test_kappa_limits():
    assert NetworkParams(1e-3, 0.0, 1.0, 1.0, 4.0).kappa() == math.inf
    assert NetworkParams(1e-3, 0.5, 4.0, 0.0, 4.0).kappa() == 0.0


def test_scaling_and_surrogate(homogeneous):
    s = homogeneous.scaled(10.0)
    assert (s.P_macro, s.P_micro, s.P_ref) == (10.0, 10.0, 10.0)
    h = NetworkParams(1e-3, 0.3, 7.0, 0.2, 3.0, P_ref=2.0).homogeneous_surrogate()
    assert (h.p, h.P_macro, h.P_micro) == (1.0, 2.0, 2.0)
