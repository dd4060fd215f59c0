"""SIR tail of the typical mobile user and mean Shannon rates.

For fixed ``beta`` the tail probability at threshold ``tau`` is a
polynomial in ``u = 1/(1 + kappa)`` whose coefficients depend only on
``(beta, tau)``.  Everything below caches those coefficients per
``beta`` so that sweeps over designs only re-evaluate polynomials.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .model import InfeasibleDesignError, NetworkParams, TOL_EQ
from .specfun import DEFAULT_QUAD, QuadratureSpec, gamma_product, j_n_beta

log = logging.getLogger(__name__)

#: raw series values outside [0, 1] by more than this are reported
CLAMP_WARN = 1e-6


@dataclass(frozen=True)
class CcdfPoint:
    """Tail probability at one threshold.

    ``lower``/``upper`` bracket the true value; they coincide with ``prob``
    except for ``method == "truncated"`` (series longer than ``n_max``).
    """

    tau: float
    prob: float
    lower: float
    upper: float
    method: str


@dataclass(frozen=True)
class CcdfCurve:
    taus: np.ndarray
    probs: np.ndarray
    methods: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True)
class RateEstimate:
    """Mean rate in bits/s/Hz with a rigorous bracket on the small-SIR piece.

    ``value`` is the bracket midpoint; ``quad_error`` estimates the
    quadrature error on the rest of the integral.
    """

    value: float
    lower: float
    upper: float
    quad_error: float

    def __float__(self) -> float:
        return float(self.value)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower) + self.quad_error


@dataclass(frozen=True)
class AboveOneRate:
    value: float
    extrapolated: bool

    def __float__(self) -> float:
        return float(self.value)


def macro_weight(net: NetworkParams) -> float:
    """``u = 1/(1 + kappa)``; 0 when no macro power reaches the user."""
    k = net.kappa()
    if math.isinf(k):
        return 0.0
    return 1.0 / (1.0 + k)


def _check_tau(tau: float) -> None:
    if not tau > 0 or not math.isfinite(tau):
        raise ValueError(f"tau must be positive and finite, got {tau}")


def _terms_needed(tau: float) -> int:
    # largest n with (n-1) tau < 1
    n = math.ceil(1.0 / tau)
    while n > 1 and (n - 1) * tau >= 1.0 - 1e-14:
        n -= 1
    return n


@lru_cache(maxsize=65536)
def series_coefficients(beta: float, tau: float, quad: QuadratureSpec = DEFAULT_QUAD) -> tuple[float, ...]:
    """Signed coefficients ``c_n`` with ``ccdf = sum_n c_n u**n``.

    At most ``quad.n_max`` coefficients are returned; compare the length
    with :func:`_terms_needed` to detect truncation.
    """
    _check_tau(tau)
    gp = gamma_product(beta)
    base = 2.0 / (beta * gp)
    n_all = _terms_needed(tau)
    out = []
    for n in range(1, min(n_all, quad.n_max) + 1):
        if n == 1:
            out.append(tau ** (-2.0 / beta) / gp)
            continue
        tn = tau / (1.0 - (n - 1) * tau)
        mag = tn ** (-2.0 * n / beta) * j_n_beta(n, beta, tn, quad) * (beta / 2.0) * base ** n
        out.append(mag if n % 2 else -mag)
    return tuple(out)


def _bonferroni(coeffs, u: float) -> tuple[float, float]:
    """Best lower/upper bounds from partial sums of a truncated alternating series."""
    lower, upper = 0.0, 1.0
    acc = []
    for n, c in enumerate(coeffs, start=1):
        acc.append(c * u ** n)
        s = math.fsum(acc)
        if n % 2:
            upper = min(upper, s)
        else:
            lower = max(lower, s)
    return lower, upper


def _clamp(raw: float, tau: float) -> tuple[float, bool]:
    if -CLAMP_WARN <= raw <= 1.0 + CLAMP_WARN:
        return min(max(raw, 0.0), 1.0), False
    log.warning("tail probability %.3g at tau=%g outside [0, 1]; clamped", raw, tau)
    return min(max(raw, 0.0), 1.0), True


def _point_from_u(beta: float, u: float, tau: float, quad: QuadratureSpec,
                  tau_cut: float) -> CcdfPoint:
    if u == 0.0:
        return CcdfPoint(tau, 0.0, 0.0, 0.0, "closed-form")
    if tau >= 1.0:
        val = u * tau ** (-2.0 / beta) / gamma_product(beta)
        return CcdfPoint(tau, val, val, val, "closed-form")
    coeffs = series_coefficients(beta, tau, quad)
    if len(coeffs) < _terms_needed(tau):
        lo, hi = _bonferroni(coeffs, u)
        if tau < tau_cut:
            # monotone in tau: partial-sum floors at larger thresholds still apply
            lo = max(lo, ccdf_from_weight(beta, u, tau_cut, quad).prob)
            for t2 in np.geomspace(tau, tau_cut, 9)[1:-1]:
                lo = max(lo, _bonferroni(series_coefficients(beta, float(t2), quad), u)[0])
        lo, hi = min(lo, hi), max(lo, hi)
        return CcdfPoint(tau, 0.5 * (lo + hi), lo, hi, "truncated")
    raw = math.fsum(c * u ** n for n, c in enumerate(coeffs, start=1))
    val, clamped = _clamp(raw, tau)
    return CcdfPoint(tau, val, val, val, "clamped" if clamped else "series")


def ccdf_from_weight(beta: float, u: float, tau: float,
                     quad: QuadratureSpec = DEFAULT_QUAD) -> CcdfPoint:
    """Tail probability as a function of the macro weight ``u`` only."""
    _check_tau(tau)
    return _point_from_u(beta, u, tau, quad, 1.0 / quad.n_max)


def sir_ccdf_point(net: NetworkParams, tau: float, quad: QuadratureSpec = DEFAULT_QUAD) -> CcdfPoint:
    """``P(SIR_macro(0) > tau)`` with method tag and bracket."""
    _check_tau(tau)
    return _point_from_u(net.beta, macro_weight(net), tau, quad, 1.0 / quad.n_max)


def sir_ccdf(net: NetworkParams, tau: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """``P(SIR_macro(0) > tau)`` for the nearest-macro association of a mobile user."""
    return sir_ccdf_point(net, tau, quad).prob


def ccdf_curve(net: NetworkParams, taus, quad: QuadratureSpec = DEFAULT_QUAD) -> CcdfCurve:
    taus = np.sort(np.asarray(taus, dtype=float))
    pts = [sir_ccdf_point(net, float(t), quad) for t in taus]
    # bounds at one threshold also bound every smaller (upper) or larger (lower) one
    lower = np.maximum.accumulate(np.array([q.lower for q in pts])[::-1])[::-1]
    upper = np.minimum.accumulate(np.array([q.upper for q in pts]))
    exact = np.array([q.method != "truncated" for q in pts])
    probs = np.where(exact, [q.prob for q in pts], 0.5 * (lower + upper))
    return CcdfCurve(taus=taus, probs=probs, methods=tuple(q.method for q in pts),
                     lower=lower, upper=upper)


def tail_rate_integral(beta: float) -> float:
    """``int_1^inf (2**t - 1)**(-2/beta) dt`` in closed form.

    With ``s = 2**-t`` this is a Beta-type integral that reduces to
    ``(psi((a+1)/2) - psi(a/2)) / (2 ln 2)``, ``a = 2/beta``.
    """
    a = 2.0 / beta
    return float(0.5 * (special.digamma((a + 1.0) / 2.0) - special.digamma(a / 2.0)) / math.log(2.0))


def above_one_constant(beta: float) -> float:
    """The constant ``C = int_1^inf (2**t - 1)**(-2/beta) dt / gamma_product(beta)``."""
    return tail_rate_integral(beta) / gamma_product(beta)


@dataclass(frozen=True)
class _RateProfile:
    # E[R] = sum_n mid[n-1] u**n + tail * u + (small-t bracket)
    mid: np.ndarray
    mid_err: np.ndarray
    tail: float
    t_grid: np.ndarray
    low_coeffs: tuple
    t_cut: float


def _segment_rule(a: float, b: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    return a + (b - a) * (x + 1.0) / 2.0, w * (b - a) / 2.0


def _integrate_coeffs(beta, quad, t_breaks, m):
    acc = np.zeros(quad.n_max)
    for a, b in zip(t_breaks[:-1], t_breaks[1:]):
        ts, ws = _segment_rule(a, b, m)
        for t, w in zip(ts, ws):
            c = series_coefficients(beta, float(2.0 ** t - 1.0), quad)
            acc[:len(c)] += w * np.asarray(c)
    return acc


@lru_cache(maxsize=32)
def _rate_profile(beta: float, quad: QuadratureSpec, nodes: int = 20, low_points: int = 48) -> _RateProfile:
    tau_cut = 1.0 / quad.n_max
    t_cut = math.log2(1.0 + tau_cut)
    # new series terms switch on at tau = 1/k
    t_breaks = [t_cut] + [math.log2(1.0 + 1.0 / k) for k in range(quad.n_max - 1, 0, -1)]
    fine = _integrate_coeffs(beta, quad, t_breaks, nodes)
    coarse = _integrate_coeffs(beta, quad, t_breaks, max(4, (2 * nodes) // 3))
    t_grid = np.linspace(0.0, t_cut, low_points + 1)
    low = tuple(series_coefficients(beta, float(2.0 ** t - 1.0), quad) if t > 0 else ()
                for t in t_grid)
    return _RateProfile(fine, np.abs(fine - coarse), tail_rate_integral(beta) / gamma_product(beta),
                        t_grid, low, t_cut)


def _low_bracket(prof: _RateProfile, beta: float, u: float, quad: QuadratureSpec) -> tuple[float, float]:
    """Bracket of ``int_0^t_cut ccdf(2**t - 1) dt`` using monotonicity on a grid."""
    ub = np.ones(len(prof.t_grid))
    lb = np.zeros(len(prof.t_grid))
    cut = ccdf_from_weight(beta, u, 1.0 / quad.n_max, quad).prob
    for i, c in enumerate(prof.low_coeffs):
        if not c:
            continue
        lo, hi = _bonferroni(c, u)
        lb[i] = max(lo, cut)
        ub[i] = min(hi, 1.0)
    lb[-1] = ub[-1] = cut
    dt = np.diff(prof.t_grid)
    return float(dt @ lb[1:]), float(dt @ ub[:-1])


def rate_from_weight(beta: float, u: float, quad: QuadratureSpec = DEFAULT_QUAD) -> RateEstimate:
    """``E[log2(1 + SIR)]`` as a function of the macro weight ``u``."""
    if u == 0.0:
        return RateEstimate(0.0, 0.0, 0.0, 0.0)
    prof = _rate_profile(beta, quad)
    powers = u ** np.arange(1, len(prof.mid) + 1)
    upper_piece = float(prof.mid @ powers) + prof.tail * u
    err = float(prof.mid_err @ powers)
    lo, hi = _low_bracket(prof, beta, u, quad)
    return RateEstimate(upper_piece + 0.5 * (lo + hi), upper_piece + lo, upper_piece + hi, err)


def mean_rate_macro(net: NetworkParams, quad: QuadratureSpec = DEFAULT_QUAD) -> RateEstimate:
    """Mean Shannon rate of the typical mobile user served by the nearest macro BS."""
    return rate_from_weight(net.beta, macro_weight(net), quad)


def mean_rate_equivalent(net: NetworkParams, quad: QuadratureSpec = DEFAULT_QUAD,
                         tol: float = TOL_EQ) -> RateEstimate:
    """Mean rate of a static user under max-power association.

    Equals the homogeneous-network rate whenever the design satisfies the
    power-equivalence constraint; raises otherwise.
    """
    if not net.is_feasible(tol):
        raise InfeasibleDesignError(
            f"design violates power equivalence (residual {net.equivalence_residual():.3g})")
    return rate_from_weight(net.beta, 1.0, quad)


def rate_above_one(net: NetworkParams) -> AboveOneRate:
    """Heuristic ``C p (P_macro/P_micro)**(2/beta)`` for the rate restricted to SIR > 1.

    With ``P_micro = 0`` the ratio is undefined; ``P_ref`` replaces
    ``P_micro`` and the result is flagged as extrapolated.
    """
    c = above_one_constant(net.beta)
    if net.p == 0.0:
        return AboveOneRate(0.0, False)
    if net.P_micro > 0.0:
        return AboveOneRate(c * net.p * (net.P_macro / net.P_micro) ** net.delta, False)
    return AboveOneRate(c * net.p * (net.P_macro / net.P_ref) ** net.delta, True)


def rate_above_one_exact(net: NetworkParams) -> float:
    """Exact ``E[R 1(SIR > 1)] = C u`` from the closed-form tail."""
    return above_one_constant(net.beta) * macro_weight(net)
