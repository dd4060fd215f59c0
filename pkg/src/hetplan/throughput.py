"""Per-user throughputs: mean rate shared among mean co-served users."""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import cellstats as cs
from .coverage import mean_rate_equivalent, mean_rate_macro
from .model import InfeasibleDesignError, MetricBundle, NetworkParams, TOL_EQ, UserParams
from .specfun import DEFAULT_QUAD, QuadratureSpec

MODES = ("approx", "exact")


@dataclass(frozen=True)
class MuThroughput:
    """Mobile-user throughput; ``raw`` keeps the sign of the handoff factor."""

    raw: float
    clamped: float
    vacuous: bool

    def __float__(self) -> float:
        return self.raw


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def handoff_factor(net: NetworkParams, usr: UserParams) -> float:
    """``1 - lambda_c v T_h``; may be negative."""
    return 1.0 - cs.crossing_intensity(net) * usr.v * usr.t_h


def handoff_vacuous(net: NetworkParams, usr: UserParams) -> bool:
    """True when the handoff lower bound carries no information (factor <= 0)."""
    return handoff_factor(net, usr) <= 0.0


def mu_denominator(net: NetworkParams, usr: UserParams, mode: str = "approx",
                   cq: cs.CellQuadrature = cs.DEFAULT_CELL_QUAD) -> float:
    _check_mode(mode)
    su = cs.n_su_macro(net, usr, cq) if mode == "exact" else cs.n_su_macro_hat(net, usr)
    return su + cs.n_mu_macro(net, usr)


def su_denominator(net: NetworkParams, usr: UserParams, mode: str = "approx",
                   cq: cs.CellQuadrature = cs.DEFAULT_CELL_QUAD) -> float:
    _check_mode(mode)
    if mode == "exact":
        return cs.n_su_het(net, usr, cq) + cs.n_mu_het(net, usr, cq)
    return cs.n_su_het_hat(net, usr) + cs.n_mu_het_hat(net, usr)


def r_mu(net: NetworkParams, usr: UserParams, quad: QuadratureSpec = DEFAULT_QUAD,
         mode: str = "approx", cq: cs.CellQuadrature = cs.DEFAULT_CELL_QUAD) -> MuThroughput:
    """Mean mobile-user throughput (bits/s/Hz per user)."""
    h = handoff_factor(net, usr)
    raw = h * float(mean_rate_macro(net, quad)) / mu_denominator(net, usr, mode, cq)
    return MuThroughput(raw, max(raw, 0.0), h <= 0.0)


def r_su(net: NetworkParams, usr: UserParams, quad: QuadratureSpec = DEFAULT_QUAD,
         mode: str = "approx", cq: cs.CellQuadrature = cs.DEFAULT_CELL_QUAD,
         tol: float = TOL_EQ) -> float:
    """Mean static-user throughput (bits/s/Hz per user); the design must satisfy power equivalence."""
    if not net.is_feasible(tol):
        raise InfeasibleDesignError(
            f"design violates power equivalence (residual {net.equivalence_residual():.3g})")
    return float(mean_rate_equivalent(net, quad, tol)) / su_denominator(net, usr, mode, cq)


def metric_bundle(net: NetworkParams, usr: UserParams, quad: QuadratureSpec = DEFAULT_QUAD,
                  mode: str = "approx", cq: cs.CellQuadrature = cs.DEFAULT_CELL_QUAD) -> MetricBundle:
    """All analytic outputs at one design point.

    Both exact and approximate counts are filled; ``mode`` only selects
    the denominators used for ``r_mu`` and ``r_su``.  Quantities that
    need a macro tier are ``nan`` when ``p = 0``.
    """
    has_macro = net.p * net.lambda_bs > 0
    nan = math.nan
    e_macro = float(mean_rate_macro(net, quad))
    e_equiv = float(mean_rate_equivalent(net, quad)) if net.is_feasible() else nan
    return MetricBundle(
        e_rate_macro=e_macro,
        e_rate_equivalent=e_equiv,
        lambda_c=cs.crossing_intensity(net),
        handoff_factor=handoff_factor(net, usr),
        n_mu_macro=cs.n_mu_macro(net, usr) if has_macro else nan,
        n_su_macro=cs.n_su_macro(net, usr, cq) if has_macro else nan,
        n_su_macro_hat=cs.n_su_macro_hat(net, usr) if has_macro else nan,
        n_su_macro_ub=cs.n_su_macro_ub(net, usr) if has_macro else nan,
        n_su_het=cs.n_su_het(net, usr, cq),
        n_su_het_hat=cs.n_su_het_hat(net, usr),
        n_mu_het=cs.n_mu_het(net, usr, cq),
        n_mu_het_hat=cs.n_mu_het_hat(net, usr),
        r_mu=r_mu(net, usr, quad, mode, cq).raw if has_macro else nan,
        r_su=r_su(net, usr, quad, mode, cq) if net.is_feasible() else nan,
    )
