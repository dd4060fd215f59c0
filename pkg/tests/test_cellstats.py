import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hetplan import cellstats as cs
from hetplan.model import NetworkParams, ParameterError, UserParams, solve_equivalent_pmacro

from conftest import LAMBDA_BS, LAMBDA_L, LAMBDA_MU, LAMBDA_SU


def dart_union(dp, n=400_000, seed=3):
    rng = np.random.default_rng(seed)
    lo = np.minimum(np.subtract(dp.c1, dp.r1), np.subtract(dp.c2, dp.r2))
    hi = np.maximum(np.add(dp.c1, dp.r1), np.add(dp.c2, dp.r2))
    pts = rng.uniform(lo, hi, size=(n, 2))
    inside = (np.hypot(*(pts - dp.c1).T) <= dp.r1) | (np.hypot(*(pts - dp.c2).T) <= dp.r2)
    return inside.mean() * np.prod(hi - lo)


@pytest.mark.parametrize("dp,expected", [
    (cs.DiscPair((0, 0), (0, 0), 1, 1), math.pi),
    (cs.DiscPair((0, 0), (5, 0), 1, 2), 5 * math.pi),
    (cs.DiscPair((0, 0), (0.5, 0), 3, 1), 9 * math.pi),
    (cs.DiscPair((0, 0), (2, 0), 1, 1), 2 * math.pi),
    (cs.DiscPair((0, 0), (1, 0), 1, 1), 2 * math.pi - (2 * math.pi / 3 - math.sqrt(3) / 2)),
])
def test_union_area_cases(dp, expected):
    assert cs.union_area(dp) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("dp", [cs.DiscPair((0, 0), (1.3, 0.4), 1.0, 0.7),
                                cs.DiscPair((-1, 2), (0.5, 1), 2.0, 1.5)])
def test_union_area_against_darts(dp):
    assert cs.union_area(dp) == pytest.approx(dart_union(dp), rel=5e-3)


@given(x=st.tuples(st.floats(-5, 5), st.floats(-5, 5)), y=st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_union_area_bounds(x, y):
    r1, r2 = math.hypot(*x), math.hypot(*y)
    a = cs.area_A(x, y)
    assert math.pi * max(r1, r2) ** 2 * (1 - 1e-12) <= a <= math.pi * (r1 * r1 + r2 * r2) * (1 + 1e-12) + 1e-300


def test_scaled_areas():
    net = NetworkParams(1e-3, 0.5, 16.0, 1.0, 4.0)
    x, y = (1.0, 0.0), (0.0, 2.0)
    # centres stay put, only the radii scale
    assert cs.area_B(x, y, net) == pytest.approx(1.25 * math.pi, rel=1e-12)
    assert cs.area_D(x, y, net) == pytest.approx(cs.union_area(cs.DiscPair(x, y, 2.0, 4.0)), rel=1e-12)
    assert cs.area_D(x, y, NetworkParams(1e-3, 0.5, 16.0, 0.0, 4.0)) == math.inf


def test_crossing_intensity_examples():
    net = NetworkParams(LAMBDA_BS, 1.0, 1.0, 1.0, 4.0)
    assert cs.crossing_intensity(net) == pytest.approx(4 / (50 * math.pi), rel=1e-14)
    assert cs.crossing_intensity(net.with_design(net.design().__class__(0.25, 1.0, 1.0))) == \
        pytest.approx(2 / (50 * math.pi), rel=1e-14)


def test_zero_cell_integral_matches_known_constant():
    ci = cs.cell_integral(0.0)
    assert ci.converged
    assert ci.value == pytest.approx(1.280176, abs=2e-6)


def test_disc_term_against_monte_carlo():
    # importance sampling with Gaussian proposals in R^4
    rng = np.random.default_rng(8)
    n, sig = 400_000, 0.6
    x, y = rng.normal(0, sig, (n, 2)), rng.normal(0, sig, (n, 2))
    rx, ry = np.hypot(*x.T), np.hypot(*y.T)
    d = np.hypot(*(x - y).T)
    g = np.pi * (rx ** 2 + ry ** 2) - cs.lens_area(d, rx, ry) + np.pi * ry ** 2
    pdf = np.exp(-(rx ** 2 + ry ** 2) / (2 * sig * sig)) / (2 * np.pi * sig * sig) ** 2
    vals = np.exp(-g) / pdf
    est, se = vals.mean(), vals.std() / math.sqrt(n)
    assert abs(cs.cell_integral(1.0).value - est) < 4 * se


@given(c=st.floats(0.0, 5.0))
def test_equal_power_union_term_rescales(c):
    ref = cs.cell_integral(0.0).value
    assert cs.cell_integral(0.0, c, 1.0).value == pytest.approx(ref / (1 + c) ** 2, rel=1e-6)


def test_mobile_count_reference(users):
    net = NetworkParams(LAMBDA_BS, 1.0, 1.0, 1.0, 4.0)
    assert cs.n_mu_macro(net, users) == pytest.approx(8.0853, abs=1e-3)
    assert cs.n_mu_macro(net, UserParams(LAMBDA_SU, 0.0, LAMBDA_L)) == 1.0


def test_empty_macro_tier_is_reported(users):
    with pytest.raises(ParameterError):
        cs.n_mu_macro(NetworkParams(LAMBDA_BS, 0.0, 1.0, 1.0, 4.0), users)


@given(p=st.floats(0.05, 1.0), ratio=st.floats(0.0, 1.0))
def test_static_count_sandwich(p, ratio):
    pm = solve_equivalent_pmacro(p, ratio, 1.0, 3.5)
    net, usr = NetworkParams(LAMBDA_BS, p, pm, ratio, 3.5), UserParams(LAMBDA_SU, LAMBDA_MU, LAMBDA_L)
    lo, mid, hi = cs.n_su_macro_hat(net, usr), cs.n_su_macro(net, usr), cs.n_su_macro_ub(net, usr)
    assert lo <= mid * (1 + 1e-9) and mid <= hi * (1 + 1e-9)


def test_homogeneous_upper_bound_is_attained(users):
    net = NetworkParams(LAMBDA_BS, 1.0, 1.0, 1.0, 4.0)
    # the bound uses the four-digit constant 1.2802
    assert cs.n_su_macro(net, users) == pytest.approx(cs.n_su_macro_ub(net, users), rel=2e-5)


@pytest.mark.parametrize("p", [0.2, 0.5, 1.0])
def test_equal_powers_reduce_to_homogeneous(p, users):
    net = NetworkParams(LAMBDA_BS, p, 1.0, 1.0, 4.0)
    expected = 1 + cs.cell_integral(0.0).value * LAMBDA_SU / LAMBDA_BS
    assert cs.n_su_het(net, users) == pytest.approx(expected, rel=1e-6)


def test_micro_only_network(users):
    net = NetworkParams(LAMBDA_BS, 0.0, 0.0, 1.0, 4.0)
    assert cs.n_mu_het(net, users) == 0.0
    assert cs.n_su_het(net, users) == pytest.approx(1 + 1.280176 * LAMBDA_SU / LAMBDA_BS, rel=1e-5)


@given(scale=st.floats(0.1, 10.0))
def test_counts_linear_in_user_densities(scale):
    net = NetworkParams(LAMBDA_BS, 0.4, 4.0, 0.5, 4.0)
    a = UserParams(LAMBDA_SU, LAMBDA_MU, LAMBDA_L)
    b = UserParams(scale * LAMBDA_SU, scale * LAMBDA_MU, LAMBDA_L)
    assert cs.n_su_het(net, b) - 1 == pytest.approx(scale * (cs.n_su_het(net, a) - 1), rel=1e-12)
    assert cs.n_mu_het(net, b) == pytest.approx(scale * cs.n_mu_het(net, a), rel=1e-12)
    assert cs.n_mu_macro(net, b) - 1 == pytest.approx(scale * (cs.n_mu_macro(net, a) - 1), rel=1e-12)


@given(p=st.floats(0.05, 1.0), ratio=st.floats(0.0, 1.0))
def test_mass_transport_identity(p, ratio):
    usr = UserParams(LAMBDA_SU, LAMBDA_MU, LAMBDA_L)
    net = NetworkParams(LAMBDA_BS, p, solve_equivalent_pmacro(p, ratio, 1.0, 4.0), ratio, 4.0)
    lhs = usr.lambda_su * cs.n_mu_het(net, usr)
    rhs = usr.lambda_l * usr.lambda_mu * cs.n_su_macro(net, usr)
    assert lhs == pytest.approx(rhs, rel=1e-12)
