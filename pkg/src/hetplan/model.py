"""Parameter types for the two-tier network with a Poisson road system.

Powers are linear and only their ratios matter; by convention the CLI
reports them relative to the reference power ``P_ref`` of the
equivalent homogeneous network.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

#: relative tolerance on the power-equivalence constraint
TOL_EQ = 1e-9


class ParameterError(ValueError):
    """Raised when parameters violate a hard precondition."""


class InfeasibleDesignError(ValueError):
    """Raised when a design point does not satisfy the power-equivalence constraint."""


@dataclass(frozen=True)
class NetworkParams:
    """Base-station tiers.

    Attributes
    ----------
    lambda_bs : float
        Total BS density (1/m^2).
    p : float
        Fraction of macro BSs.
    P_macro, P_micro : float
        Transmit powers of the two tiers (linear, same units).
    beta : float
        Path-loss exponent, must exceed 2.
    A : float
        Path-loss prefactor (1/m); path loss is ``(A r)**beta``.
    P_ref : float
        Power of the equivalent homogeneous network.
    """

    lambda_bs: float
    p: float
    P_macro: float
    P_micro: float
    beta: float
    A: float = 1.0
    P_ref: float = 1.0

    @property
    def delta(self) -> float:
        return 2.0 / self.beta

    def kappa(self) -> float:
        """Micro-to-macro interference ratio ``(1-p) Pu^d / (p Pm^d)``, d = 2/beta.

        ``inf`` when there is no macro tier carrying power.
        """
        d = self.delta
        micro = (1.0 - self.p) * self.P_micro ** d
        macro = self.p * self.P_macro ** d
        if macro == 0.0:
            return math.inf if micro > 0.0 else 0.0
        return micro / macro

    def macro_share(self) -> float:
        """Probability that a static user is served by a macro BS."""
        d = self.delta
        macro = self.p * self.P_macro ** d
        total = macro + (1.0 - self.p) * self.P_micro ** d
        if total == 0.0:
            raise ParameterError("no tier carries power")
        return macro / total

    def design(self) -> "DesignPoint":
        return DesignPoint(self.p, self.P_micro, self.P_macro)

    def with_design(self, dp: "DesignPoint") -> "NetworkParams":
        return replace(self, p=dp.p, P_micro=dp.P_micro, P_macro=dp.P_macro)

    def scaled(self, factor: float) -> "NetworkParams":
        """All three powers multiplied by ``factor``."""
        return replace(self, P_macro=self.P_macro * factor,
                       P_micro=self.P_micro * factor, P_ref=self.P_ref * factor)

    def homogeneous_surrogate(self) -> "NetworkParams":
        """Single-tier network at density ``lambda_bs`` and power ``P_ref``."""
        return replace(self, p=1.0, P_macro=self.P_ref, P_micro=self.P_ref)

    def equivalence_residual(self) -> float:
        return equivalence_residual(self.p, self.P_micro, self.P_macro, self.P_ref, self.beta)

    def is_feasible(self, tol: float = TOL_EQ) -> bool:
        return self.equivalence_residual() <= tol


@dataclass(frozen=True)
class UserParams:
    """Static and mobile users.

    ``lambda_su`` is an areal density (1/m^2), ``lambda_mu`` a linear density
    along roads (1/m), ``lambda_l`` the mean road length per unit area (1/m),
    ``v`` the speed (m/s) and ``t_h`` the handoff duration (s).
    """

    lambda_su: float
    lambda_mu: float
    lambda_l: float
    v: float = 0.0
    t_h: float = 0.0


@dataclass(frozen=True)
class DesignPoint:
    p: float
    P_micro: float
    P_macro: float

    def residual(self, P_ref: float, beta: float) -> float:
        return equivalence_residual(self.p, self.P_micro, self.P_macro, P_ref, beta)

    def is_feasible(self, P_ref: float, beta: float, tol: float = TOL_EQ) -> bool:
        return self.residual(P_ref, beta) <= tol


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "all parameter invariants hold"
        return "; ".join(self.violations)


@dataclass(frozen=True)
class MetricBundle:
    """Analytic outputs at one design point (rates in bits/s/Hz)."""

    e_rate_macro: float
    e_rate_equivalent: float
    lambda_c: float
    handoff_factor: float
    n_mu_macro: float
    n_su_macro: float
    n_su_macro_hat: float
    n_su_macro_ub: float
    n_su_het: float
    n_su_het_hat: float
    n_mu_het: float
    n_mu_het_hat: float
    r_mu: float
    r_su: float


def validate(net: NetworkParams, usr: UserParams | None = None) -> ValidationReport:
    """Collect every violated parameter invariant."""
    v: list[str] = []
    if not net.lambda_bs > 0:
        v.append("lambda_bs must be positive")
    if not 0.0 <= net.p <= 1.0:
        v.append("p outside [0,1]")
    if not net.P_macro >= 0:
        v.append("P_macro must be non-negative")
    if not net.P_micro >= 0:
        v.append("P_micro must be non-negative")
    if not net.beta > 2:
        v.append("beta must exceed 2")
    if not net.A > 0:
        v.append("A must be positive")
    if not net.P_ref > 0:
        v.append("P_ref must be positive")
    if usr is not None:
        for name in ("lambda_su", "lambda_mu", "lambda_l", "v", "t_h"):
            val = getattr(usr, name)
            if not val >= 0:
                v.append(f"{name} must be non-negative")
        if not math.isfinite(usr.v * usr.t_h):
            v.append("v*t_h must be finite")
        users = usr.lambda_su > 0 or (usr.lambda_mu > 0 and usr.lambda_l > 0)
        if users and net.p == 0 and net.P_micro == 0:
            v.append("no service: p = 0 and P_micro = 0")
    return ValidationReport(v)


def equivalence_residual(p: float, P_micro: float, P_macro: float,
                         P_ref: float, beta: float) -> float:
    """Relative residual of ``p Pm^d + (1-p) Pu^d = P^d`` with ``d = 2/beta``."""
    d = 2.0 / beta
    ref = P_ref ** d
    return abs(p * P_macro ** d + (1.0 - p) * P_micro ** d - ref) / ref


def solve_equivalent_pmacro(p: float, P_micro: float, P_ref: float, beta: float) -> float:
    """Macro power that makes ``(p, P_micro)`` equivalent to a homogeneous network at ``P_ref``."""
    if not p > 0:
        raise InfeasibleDesignError("p must be positive to solve for P_macro")
    d = 2.0 / beta
    slack = P_ref ** d - (1.0 - p) * P_micro ** d
    if slack < 0:
        raise InfeasibleDesignError(
            f"micro tier exceeds the power budget: (1-p)*P_micro^(2/beta) > P_ref^(2/beta) "
            f"at p={p}, P_micro={P_micro}")
    if P_micro == 0.0:
        return P_ref * p ** (-beta / 2.0)
    return (slack / p) ** (beta / 2.0)
