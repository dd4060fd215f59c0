"""Grid search over equivalent two-tier designs.

Every design on the grid satisfies the power-equivalence constraint, so
the static-user rate is the same everywhere and only the user counts
move; the mobile-user rate changes through the macro weight and the
handoff factor.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import cellstats as cs
from .coverage import mean_rate_equivalent, mean_rate_macro, rate_above_one
from .model import DesignPoint, NetworkParams, ParameterError, UserParams, solve_equivalent_pmacro
from .specfun import DEFAULT_QUAD, QuadratureSpec
from .throughput import handoff_factor, mu_denominator, su_denominator

#: relative slack for monotonicity/convexity checks on xi sweeps
TAU_MONO = 1e-9
#: points re-scored with exact denominators when requested
TOP_K = 10
#: default xi sweep
DEFAULT_XI = (0.001, 0.01, 0.1, 0.2, 0.3, 1.0)


@dataclass(frozen=True)
class SearchGrid:
    """Candidate macro fractions and micro powers (relative to ``P_ref``)."""

    p_values: tuple[float, ...] = tuple(np.round(np.arange(0, 101) / 100, 2))
    pmicro_values: tuple[float, ...] = tuple(np.round(np.arange(0, 21) / 20, 2))

    def designs(self, P_ref: float, beta: float) -> list[DesignPoint]:
        """Feasible designs ordered by (p, P_micro); p = 0 has no macro tier and is skipped."""
        out = []
        for p in sorted(self.p_values):
            if p <= 0 or p > 1:
                continue
            for ratio in sorted(self.pmicro_values):
                pu = float(ratio) * P_ref
                try:
                    pm = solve_equivalent_pmacro(p, pu, P_ref, beta)
                except ValueError:
                    continue
                out.append(DesignPoint(float(p), pu, pm))
        return out


@dataclass
class GridEvaluation:
    """Analytic metrics on every feasible grid design, in (p, P_micro) order."""

    template: NetworkParams
    users: UserParams
    designs: list[DesignPoint]
    mode: str
    e_rate_macro: np.ndarray
    handoff: np.ndarray
    r_mu: np.ndarray
    r_su: np.ndarray
    above_one: np.ndarray
    quad: QuadratureSpec = DEFAULT_QUAD
    cell_quad: cs.CellQuadrature = cs.DEFAULT_CELL_QUAD
    exact_cache: dict = field(default_factory=dict)

    @property
    def p(self) -> np.ndarray:
        return np.array([d.p for d in self.designs])

    @property
    def pmicro_ratio(self) -> np.ndarray:
        return np.array([d.P_micro for d in self.designs]) / self.template.P_ref

    @property
    def pmacro_ratio(self) -> np.ndarray:
        return np.array([d.P_macro for d in self.designs]) / self.template.P_ref

    def net(self, i: int) -> NetworkParams:
        return self.template.with_design(self.designs[i])

    def exact_scores(self, i: int) -> tuple[float, float]:
        """``(r_mu, r_su)`` of design ``i`` with exact cell integrals (memoized)."""
        if i not in self.exact_cache:
            net = self.net(i)
            mu = self.handoff[i] * self.e_rate_macro[i] / mu_denominator(net, self.users, "exact", self.cell_quad)
            su = self.r_su_numerator / su_denominator(net, self.users, "exact", self.cell_quad)
            self.exact_cache[i] = (float(mu), float(su))
        return self.exact_cache[i]

    @property
    def r_su_numerator(self) -> float:
        return float(mean_rate_equivalent(self.template.homogeneous_surrogate(), self.quad))


@dataclass(frozen=True)
class DesignChoice:
    index: int
    design: DesignPoint
    value: float
    micro_off: bool
    ties: int


@dataclass(frozen=True)
class ParetoRecord:
    xi: float
    p_star: float
    P_micro_star: float
    P_macro_star: float
    r_su_star: float
    r_mu_star: float
    objective: float
    index: int
    rescored: bool = False
    approx_objective: float = math.nan


@dataclass(frozen=True)
class InfeasibleCertificate:
    r0: float
    max_r_su: float
    record: ParetoRecord

    @property
    def gap(self) -> float:
        return self.r0 - self.max_r_su


@dataclass(frozen=True)
class ConstrainedResult:
    record: ParetoRecord
    xi: float
    gap: float
    iterations: int


@dataclass
class PropertyReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        return "pass" if self.ok else "fail: " + "; ".join(self.violations)


def _evaluate_one(net: NetworkParams, usr: UserParams, quad: QuadratureSpec, mode: str,
                  cq: cs.CellQuadrature):
    e = float(mean_rate_macro(net, quad))
    h = handoff_factor(net, usr)
    mu = h * e / mu_denominator(net, usr, mode, cq)
    su_den = su_denominator(net, usr, mode, cq)
    return e, h, mu, su_den, float(rate_above_one(net))


def evaluate_grid(template: NetworkParams, usr: UserParams, grid: SearchGrid | None = None,
                  quad: QuadratureSpec = DEFAULT_QUAD, mode: str = "approx",
                  cq: cs.CellQuadrature = cs.DEFAULT_CELL_QUAD, threads: int = 1) -> GridEvaluation:
    """Score every feasible design.  Results do not depend on ``threads``."""
    grid = grid or SearchGrid()
    designs = grid.designs(template.P_ref, template.beta)
    if not designs:
        raise ParameterError("search grid has no feasible design")
    # warm the per-beta caches once instead of in every worker
    numerator = float(mean_rate_equivalent(template.homogeneous_surrogate(), quad))
    nets = [template.with_design(d) for d in designs]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda n: _evaluate_one(n, usr, quad, mode, cq), nets))
    else:
        rows = [_evaluate_one(n, usr, quad, mode, cq) for n in nets]
    e, h, mu, su_den, a1 = (np.array(c, dtype=float) for c in zip(*rows))
    return GridEvaluation(template, usr, designs, mode, e, h, mu, numerator / su_den, a1, quad, cq)


def _argmax_first(values: np.ndarray) -> tuple[int, int]:
    # designs are sorted by (p, P_micro) so the first maximum is the tie-break winner
    best = int(np.argmax(values))
    return best, int(np.count_nonzero(values == values[best]))


def _choice(ev: GridEvaluation, values: np.ndarray) -> DesignChoice:
    i, ties = _argmax_first(values)
    d = ev.designs[i]
    return DesignChoice(i, d, float(values[i]), bool(d.P_micro == 0.0), ties)


def p_star_closed_form(lambda_bs: float, usr: UserParams) -> float:
    """Macro fraction maximizing ``(1 - lambda_c v T_h) C p``; independent of powers."""
    vt = usr.v * usr.t_h
    if vt == 0.0 or lambda_bs == 0.0:
        return 1.0
    return min(1.0, math.pi ** 2 / (36.0 * vt * vt * lambda_bs))


def maximize_mu_rate(ev: GridEvaluation) -> DesignChoice:
    """Grid argmax of ``(1 - lambda_c v T_h) E[R_macro]``."""
    return _choice(ev, ev.handoff * ev.e_rate_macro)


def maximize_mu_rate_above_one(ev: GridEvaluation) -> DesignChoice:
    """Grid argmax of the handoff-discounted SIR > 1 heuristic ``(1 - lambda_c v T_h) C p (P_macro/P_micro)**(2/beta)``."""
    return _choice(ev, ev.handoff * ev.above_one)


def maximize_mu_throughput(ev: GridEvaluation) -> DesignChoice:
    return _choice(ev, ev.r_mu)


def _record(ev: GridEvaluation, i: int, xi: float, mu: float, su: float,
            rescored: bool = False, approx_obj: float = math.nan) -> ParetoRecord:
    d = ev.designs[i]
    P = ev.template.P_ref
    return ParetoRecord(float(xi), d.p, float(d.P_micro / P), float(d.P_macro / P), float(su), float(mu),
                        float(mu + xi * su), int(i), rescored, approx_obj)


def maximize_joint(ev: GridEvaluation, xi: float, exact_top_k: int = 0) -> ParetoRecord:
    """Grid argmax of ``r_mu + xi r_su``; ties go to the lowest p, then the lowest P_micro.

    With ``exact_top_k > 0`` the best ``exact_top_k`` designs are re-scored
    with exact cell integrals and the winner is taken among them.
    """
    if xi < 0:
        raise ValueError("xi must be non-negative")
    obj = ev.r_mu + xi * ev.r_su
    i, _ = _argmax_first(obj)
    if exact_top_k <= 0:
        return _record(ev, i, xi, float(ev.r_mu[i]), float(ev.r_su[i]))
    # stable sort keeps the (p, P_micro) order among equal scores
    top = np.argsort(-obj, kind="stable")[:exact_top_k]
    scores = [ev.exact_scores(int(j)) for j in top]
    exact_obj = np.array([mu + xi * su for mu, su in scores])
    order = np.lexsort((top, -exact_obj))
    k = int(order[0])
    j = int(top[k])
    return _record(ev, j, xi, scores[k][0], scores[k][1], True, float(obj[j]))


def xi_sweep(ev: GridEvaluation, xis=DEFAULT_XI, exact_top_k: int = 0) -> list[ParetoRecord]:
    return [maximize_joint(ev, float(x), exact_top_k) for x in sorted(xis)]


def solve_constrained(ev: GridEvaluation, r0: float, iterations: int = 40,
                      xi_hi: float = 1.0, max_doublings: int = 60):
    """Smallest-xi joint optimum whose static-user throughput reaches ``r0``.

    Returns a :class:`ConstrainedResult`, or an :class:`InfeasibleCertificate`
    when ``r0`` exceeds every static-user throughput on the grid.
    """
    best_su = int(np.argmax(ev.r_su))
    max_su = float(ev.r_su[best_su])
    if r0 > max_su:
        return InfeasibleCertificate(r0, max_su, _record(ev, best_su, math.inf,
                                                         float(ev.r_mu[best_su]), max_su))
    rec = maximize_joint(ev, 0.0)
    if rec.r_su_star >= r0:
        return ConstrainedResult(rec, 0.0, rec.r_su_star - r0, 0)
    lo, hi = 0.0, xi_hi
    hi_rec = maximize_joint(ev, hi)
    n = 0
    while hi_rec.r_su_star < r0 and n < max_doublings:
        lo, hi = hi, 2.0 * hi
        hi_rec = maximize_joint(ev, hi)
        n += 1
    if hi_rec.r_su_star < r0:
        # the r_su maximizer is only reached as xi grows without bound
        rec = _record(ev, best_su, math.inf, float(ev.r_mu[best_su]), max_su)
        return ConstrainedResult(rec, math.inf, max_su - r0, n)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        mid_rec = maximize_joint(ev, mid)
        if mid_rec.r_su_star >= r0:
            hi, hi_rec = mid, mid_rec
        else:
            lo = mid
        n += 1
    return ConstrainedResult(hi_rec, hi, hi_rec.r_su_star - r0, n)


def _rel_drop(a: float, b: float) -> float:
    """How far ``b`` falls below ``a`` relative to their scale (positive = violation)."""
    scale = max(abs(a), abs(b), 1e-300)
    return (a - b) / scale


def verify_xi_properties(records: list[ParetoRecord], tol: float = TAU_MONO) -> PropertyReport:
    """Check the monotone and convex structure of a xi sweep."""
    rep = PropertyReport()
    recs = sorted(records, key=lambda r: r.xi)
    for i in range(1, len(recs)):
        a, b = recs[i - 1], recs[i]
        if (m := _rel_drop(a.r_su_star, b.r_su_star)) > tol:
            rep.violations.append(f"r_su* decreases at index {i} (xi={b.xi}) by {m:.3g}")
        if (m := _rel_drop(b.r_mu_star, a.r_mu_star)) > tol:
            rep.violations.append(f"r_mu* increases at index {i} (xi={b.xi}) by {m:.3g}")
        if (m := _rel_drop(a.objective, b.objective)) > tol:
            rep.violations.append(f"objective decreases at index {i} (xi={b.xi}) by {m:.3g}")
    for i in range(1, len(recs) - 1):
        a, b, c = recs[i - 1], recs[i], recs[i + 1]
        if not a.xi < b.xi < c.xi:
            continue
        w = (c.xi - b.xi) / (c.xi - a.xi)
        chord = w * a.objective + (1.0 - w) * c.objective
        if (m := _rel_drop(chord, b.objective)) < -tol:
            rep.violations.append(f"objective not convex at index {i} (xi={b.xi}) by {-m:.3g}")
    return rep


def table_row(rec: ParetoRecord) -> dict:
    return {"xi": rec.xi, "p": rec.p_star, "P_micro_over_P": rec.P_micro_star,
            "P_macro_over_P": rec.P_macro_star, "r_su": rec.r_su_star, "r_mu": rec.r_mu_star}
