"""Crossing intensity and mean numbers of co-served users.

The four-dimensional cell integrals have integrands ``exp(-G(x, y))``
where every area term in ``G`` is homogeneous of degree two under
``(x, y) -> (r x, r y)``.  Writing ``|x| = r cos(phi)``,
``|y| = r sin(phi)`` and ``theta`` for the angle between ``x`` and ``y``,
the radial integral is exact and

    int_{R^4} exp(-G) = 4 pi int_0^pi dtheta int_0^{pi/2} dphi
                        cos(phi) sin(phi) / (2 G(phi, theta)**2),

with ``G(phi, theta)`` the exponent at ``r = 1``.  The remaining 2-D
integral has kinks along ``theta = 0`` (nested discs) and is smooth
elsewhere, so a Gauss-Legendre rule graded towards ``theta = 0`` and
``phi = pi/4`` converges fast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import NetworkParams, ParameterError, UserParams

# Mean area of the Poisson-Voronoi zero cell in units of 1/intensity,
# i.e. 1 + the normalized variance 0.2802 of the typical cell area.
ZERO_CELL_AREA = 1.2802
# Second-moment constant of the chord length cut by a line through a
# Poisson-Voronoi tessellation; 3.216 = 4 * 0.804 appears in the count.
CHORD_MOMENT = 0.804
CHORD_TERM = 4.0 * CHORD_MOMENT


@dataclass(frozen=True)
class DiscPair:
    c1: tuple[float, float]
    c2: tuple[float, float]
    r1: float
    r2: float

    def __post_init__(self):
        if self.r1 < 0 or self.r2 < 0:
            raise ValueError("radii must be non-negative")


@dataclass(frozen=True)
class CellQuadrature:
    """Controls for the reduced 2-D cell integrals."""

    nodes: int = 48
    rel_tol: float = 1e-6
    max_nodes: int = 384


DEFAULT_CELL_QUAD = CellQuadrature()


@dataclass(frozen=True)
class CellIntegral:
    value: float
    error: float
    nodes: int
    converged: bool


def lens_area(d, r1, r2):
    """Intersection area of two discs with centre distance ``d`` (vectorized)."""
    d, r1, r2 = np.broadcast_arrays(np.asarray(d, float), np.asarray(r1, float), np.asarray(r2, float))
    out = np.zeros(d.shape)
    small, large = np.minimum(r1, r2), np.maximum(r1, r2)
    nested = d <= large - small
    out[nested] = np.pi * small[nested] ** 2
    part = ~nested & (d < r1 + r2)
    dd, a, b = d[part], r1[part], r2[part]
    root = np.sqrt(np.maximum((-dd + a + b) * (dd + a - b) * (dd - a + b) * (dd + a + b), 0.0))
    # atan2 keeps the half-angles accurate where arccos would lose half the digits
    t1 = np.arctan2(root, dd * dd + a * a - b * b)
    t2 = np.arctan2(root, dd * dd + b * b - a * a)
    out[part] = a * a * t1 + b * b * t2 - 0.5 * root
    return out if out.ndim else float(out)


def _union(d, r1, r2):
    return np.pi * (np.asarray(r1) ** 2 + np.asarray(r2) ** 2) - lens_area(d, r1, r2)


def union_area(dp: DiscPair) -> float:
    """Area of the union of the two discs."""
    d = math.dist(dp.c1, dp.c2)
    return float(_union(d, dp.r1, dp.r2))


def _power_scale(num: float, den: float, beta: float) -> float:
    if den == 0.0:
        return math.inf
    return (num / den) ** (1.0 / beta)


def area_A(x, y) -> float:
    """Union of the discs centred at ``x`` and ``y`` passing through the origin."""
    return union_area(DiscPair(tuple(x), tuple(y), math.hypot(*x), math.hypot(*y)))


def area_B(x, y, net: NetworkParams) -> float:
    """As :func:`area_A` with radii scaled by ``(P_micro/P_macro)**(1/beta)``."""
    s = _power_scale(net.P_micro, net.P_macro, net.beta)
    if math.isinf(s):
        return math.inf
    return union_area(DiscPair(tuple(x), tuple(y), s * math.hypot(*x), s * math.hypot(*y)))


def area_D(x, y, net: NetworkParams) -> float:
    """As :func:`area_A` with radii scaled by ``(P_macro/P_micro)**(1/beta)``.

    Returns ``inf`` when ``P_micro = 0``: the macro tier then dominates
    everywhere and the corresponding exponential factor vanishes.
    """
    s = _power_scale(net.P_macro, net.P_micro, net.beta)
    if math.isinf(s):
        return math.inf
    return union_area(DiscPair(tuple(x), tuple(y), s * math.hypot(*x), s * math.hypot(*y)))


def crossing_intensity(net: NetworkParams) -> float:
    """Mean number of macro-cell boundary crossings per metre of a straight line."""
    if net.lambda_bs * net.p < 0:
        raise ParameterError("lambda_bs * p must be non-negative")
    return 4.0 * math.sqrt(net.lambda_bs * net.p) / math.pi


def _graded(m: int, power: int = 3) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    s = (x + 1.0) / 2.0
    return s ** power, power * s ** (power - 1) * w / 2.0


def _reduced(m: int, disc_coef: float, union_coef: float, scale: float) -> float:
    s, ws = _graded(m)
    theta, wt = np.pi * s, np.pi * ws
    total = 0.0
    for sign in (1.0, -1.0):
        phi = np.pi / 4.0 + sign * np.pi / 4.0 * s
        wp = np.pi / 4.0 * ws
        th, ph = np.meshgrid(theta, phi, indexing="ij")
        rx, ry = np.cos(ph), np.sin(ph)
        d = np.sqrt(np.maximum(rx * rx + ry * ry - 2.0 * rx * ry * np.cos(th), 0.0))
        g = _union(d, rx, ry)
        if disc_coef:
            g = g + disc_coef * np.pi * ry * ry
        if union_coef:
            g = g + union_coef * _union(d, scale * rx, scale * ry)
        total += np.einsum("i,j,ij->", wt, wp, rx * ry / (2.0 * g * g))
    return 4.0 * np.pi * total


@lru_cache(maxsize=4096)
def cell_integral(disc_coef: float = 0.0, union_coef: float = 0.0, scale: float = 1.0,
                  cq: CellQuadrature = DEFAULT_CELL_QUAD) -> CellIntegral:
    """``int_{R^4} exp(-A(x,y) - disc_coef pi |y|^2 - union_coef U_scale(x,y))``.

    ``U_scale`` is the union area with both radii multiplied by ``scale``.
    The node count doubles until two successive rules agree to ``rel_tol``.
    """
    m = cq.nodes
    prev = _reduced(m, disc_coef, union_coef, scale)
    while True:
        m2 = 2 * m
        cur = _reduced(m2, disc_coef, union_coef, scale)
        err = abs(cur - prev)
        if err <= cq.rel_tol * abs(cur) or m2 >= cq.max_nodes:
            return CellIntegral(float(cur), float(err), m2, bool(err <= cq.rel_tol * abs(cur)))
        m, prev = m2, cur


def _require_macro(net: NetworkParams) -> None:
    if not net.p * net.lambda_bs > 0:
        raise ParameterError("macro tier is empty (p * lambda_bs = 0): quantity undefined")


def macro_share(net: NetworkParams) -> float:
    """Probability ``q`` that a static user is served by a macro BS."""
    return net.macro_share()


def n_mu_macro(net: NetworkParams, usr: UserParams) -> float:
    """Mean number of mobile users in the zero macro cell, typical user included."""
    _require_macro(net)
    lp = net.lambda_bs * net.p
    return 1.0 + (ZERO_CELL_AREA * usr.lambda_l / lp + CHORD_TERM / (math.pi * math.sqrt(lp))) * usr.lambda_mu


def zero_macro_integral(net: NetworkParams, cq: CellQuadrature = DEFAULT_CELL_QUAD) -> CellIntegral:
    """Normalized area ``lambda p E|V_het(X*)|`` of the macro hetnet cell serving the origin's macro cell."""
    _require_macro(net)
    return cell_integral(net.kappa(), 0.0, 1.0, cq)


def n_su_macro(net: NetworkParams, usr: UserParams, cq: CellQuadrature = DEFAULT_CELL_QUAD) -> float:
    """Mean number of static users in the hetnet cell of the macro BS serving a typical mobile."""
    ci = zero_macro_integral(net, cq)
    return usr.lambda_su * ci.value / (net.lambda_bs * net.p)


def n_su_macro_hat(net: NetworkParams, usr: UserParams) -> float:
    _require_macro(net)
    return macro_share(net) * usr.lambda_su / (net.lambda_bs * net.p)


def n_su_macro_ub(net: NetworkParams, usr: UserParams) -> float:
    _require_macro(net)
    return ZERO_CELL_AREA * usr.lambda_su / (net.lambda_bs * net.p)


def het_integrals(net: NetworkParams, cq: CellQuadrature = DEFAULT_CELL_QUAD) -> tuple[CellIntegral | None, CellIntegral | None]:
    """Normalized integrals for the macro-served and micro-served parts of the zero hetnet cell.

    ``None`` marks a tier that is absent or never dominant.
    """
    p = net.p
    macro = micro = None
    if p > 0 and net.P_macro > 0:
        if p == 1.0 or net.P_micro == 0.0:
            macro = cell_integral(0.0, 0.0, 1.0, cq)
        else:
            s = _power_scale(net.P_micro, net.P_macro, net.beta)
            macro = cell_integral(0.0, (1.0 - p) / p, s, cq)
    if p < 1 and net.P_micro > 0:
        if p == 0.0 or net.P_macro == 0.0:
            micro = cell_integral(0.0, 0.0, 1.0, cq)
        else:
            s = _power_scale(net.P_macro, net.P_micro, net.beta)
            micro = cell_integral(0.0, p / (1.0 - p), s, cq)
    return macro, micro


def n_su_het(net: NetworkParams, usr: UserParams, cq: CellQuadrature = DEFAULT_CELL_QUAD) -> float:
    """Mean number of static users sharing the BS of a typical static user, itself included."""
    macro, micro = het_integrals(net, cq)
    total = 1.0
    if macro is not None:
        total += usr.lambda_su * macro.value / (net.lambda_bs * net.p)
    if micro is not None:
        total += usr.lambda_su * micro.value / (net.lambda_bs * (1.0 - net.p))
    return total


def n_su_het_hat(net: NetworkParams, usr: UserParams) -> float:
    q = macro_share(net)
    total = 1.0
    if net.p > 0 and q > 0:
        total += q * q * usr.lambda_su / (net.lambda_bs * net.p)
    if net.p < 1 and q < 1:
        total += (1.0 - q) ** 2 * usr.lambda_su / (net.lambda_bs * (1.0 - net.p))
    return total


def n_mu_het(net: NetworkParams, usr: UserParams, cq: CellQuadrature = DEFAULT_CELL_QUAD) -> float:
    """Mean number of mobile users sharing the BS of a typical static user.

    Uses the same normalized integral as :func:`n_su_macro`, so
    ``lambda_su * n_mu_het == lambda_l * lambda_mu * n_su_macro``.
    """
    if net.p == 0.0:
        return 0.0
    ci = zero_macro_integral(net, cq)
    return usr.lambda_l * usr.lambda_mu * ci.value / (net.lambda_bs * net.p)


def n_mu_het_hat(net: NetworkParams, usr: UserParams) -> float:
    if net.p == 0.0:
        return 0.0
    return macro_share(net) * ZERO_CELL_AREA * usr.lambda_l * usr.lambda_mu / (net.lambda_bs * net.p)
