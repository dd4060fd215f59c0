"""Special functions behind the SIR tail series.

``j_n_beta`` is the (n-1)-dimensional simplex integral with equal
arguments.  Written with the stick-breaking variables it is an n-fold
Laplace convolution of ``f(e) = e**a / (x + e)`` (``a = 2/beta``)
evaluated at 1, so the default scheme computes it by nested 1-D
Gauss-Jacobi rules on Chebyshev-interpolated partial convolutions.
Tensor Gauss-Jacobi and randomized quasi-Monte Carlo rules over the
original cube are kept as independent routes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev
from scipy import integrate, special
from scipy.fft import dct
from scipy.stats import qmc

SCHEMES = ("recursive", "tensor", "qmc")


class QuadratureError(RuntimeError):
    """Estimated quadrature error exceeds the requested tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature controls.

    ``points`` is nodes per dimension for ``recursive``/``tensor`` and the
    number of QMC points per randomization for ``qmc``.  ``n_max`` caps the
    order of the J functions (and hence the SIR series length).
    """

    scheme: str = "recursive"
    points: int = 64
    rel_tol: float = 1e-8
    n_max: int = 8
    randomizations: int = 8

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.scheme != "qmc" and self.points < 2:
            raise ValueError("need at least 2 points per dimension")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")


DEFAULT_QUAD = QuadratureSpec()


def gamma_product(beta: float) -> float:
    """``Gamma(1 - 2/beta) * Gamma(1 + 2/beta)``."""
    if not beta > 2:
        raise ValueError("beta must exceed 2")
    d = 2.0 / beta
    return math.gamma(1.0 - d) * math.gamma(1.0 + d)


def gamma_product_reflection(beta: float) -> float:
    """Same constant via the reflection formula, ``(2 pi/beta) / sin(2 pi/beta)``."""
    z = 2.0 * math.pi / beta
    return z / math.sin(z)


@lru_cache(maxsize=256)
def _gauss_jacobi01(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    # weight u**a (1-u)**b on [0, 1]
    x, w = special.roots_jacobi(m, b, a)
    return (x + 1.0) / 2.0, w / 2.0 ** (a + b + 1.0)


@lru_cache(maxsize=64)
def _cheb_nodes(m: int) -> np.ndarray:
    k = np.arange(m)
    return (1.0 - np.cos(np.pi * (k + 0.5) / m)) / 2.0


def _cheb_coeffs(values: np.ndarray) -> np.ndarray:
    # values at first-kind nodes ordered by increasing t
    m = values.shape[-1]
    c = dct(values[..., ::-1], type=2) / m
    c[..., 0] /= 2.0
    return c


def _nodes_for(x: float, points: int) -> int:
    # Chebyshev/Gauss convergence radius for a pole at -x on [0, 1]
    z = 1.0 + 2.0 * x
    rho = z + math.sqrt(z * z - 1.0)
    need = math.ceil(14.0 / math.log(rho))
    return int(min(max(points, need), 384))


def _j_recursive(n: int, beta: float, x: float, m: int) -> float:
    # h_k(t) grows like x**-k near t = 0, so interpolate g_k = (x + t)**k h_k
    a = 2.0 / beta
    t = _cheb_nodes(m)
    coeffs = _cheb_coeffs(np.ones(m))
    for k in range(1, n):
        u, w = _gauss_jacobi01(m, k * (a + 1.0) - 1.0, a)
        tt = np.ones(1) if k == n - 1 else t
        s = tt[:, None] * u[None, :]
        hk = chebyshev.chebval(2.0 * s - 1.0, coeffs) / (x + s) ** k
        vals = (hk / (x + tt[:, None] - s)) @ w
        if k == n - 1:
            return (1.0 + n * x) / n * float(vals[0])
        coeffs = _cheb_coeffs(vals * (x + t) ** (k + 1))
    raise AssertionError("unreachable")


def _stick_breaking(v: np.ndarray) -> np.ndarray:
    """Map cube points ``v`` (k, n-1) to simplex weights ``eta`` (k, n)."""
    k, dim = v.shape
    eta = np.empty((k, dim + 1))
    tail = np.ones(k)
    for i in range(dim - 1, -1, -1):
        eta[:, i + 1] = (1.0 - v[:, i]) * tail
        tail = tail * v[:, i]
    eta[:, 0] = tail
    return eta


def _j_tensor(n: int, beta: float, x: float, m: int) -> float:
    a = 2.0 / beta
    dim = n - 1
    rules = [_gauss_jacobi01(m, i * (a + 1.0) - 1.0, a) for i in range(1, n)]
    total = 0.0
    # chunk over the first axis to bound memory
    rest_nodes = np.stack(np.meshgrid(*[r[0] for r in rules[1:]], indexing="ij"), -1).reshape(-1, dim - 1) \
        if dim > 1 else np.zeros((1, 0))
    rest_w = np.ones(1)
    for r in rules[1:]:
        rest_w = np.multiply.outer(rest_w, r[1]).ravel()
    for u0, w0 in zip(*rules[0]):
        v = np.column_stack([np.full(len(rest_nodes), u0), rest_nodes])
        eta = _stick_breaking(v)
        total += w0 * float(rest_w @ (1.0 / np.prod(x + eta, axis=1)))
    return (1.0 + n * x) / n * total


def _j_qmc(n: int, beta: float, x: float, points: int, randomizations: int,
           seed: int = 20160) -> tuple[float, float]:
    a = 2.0 / beta
    dim = n - 1
    shapes = [(i * (a + 1.0), a + 1.0) for i in range(1, n)]
    norm = math.prod(special.beta(s1, s2) for s1, s2 in shapes)
    ests = []
    for r in range(randomizations):
        u = qmc.Sobol(dim, scramble=True, seed=seed + r).random(points)
        v = np.column_stack([special.betaincinv(s1, s2, u[:, i]) for i, (s1, s2) in enumerate(shapes)])
        eta = _stick_breaking(v)
        ests.append(np.mean(1.0 / np.prod(x + eta, axis=1)))
    ests = np.asarray(ests)
    scale = (1.0 + n * x) / n * norm
    se = ests.std(ddof=1) / math.sqrt(len(ests)) if len(ests) > 1 else math.inf
    return scale * ests.mean(), scale * se


def j_zero(n: int, beta: float) -> float:
    """``J_{n,beta}(0)``: the Dirichlet integral ``Gamma(a)^n / (n Gamma(n a))``."""
    a = 2.0 / beta
    return math.exp(n * math.lgamma(a) - math.lgamma(n * a)) / n


def j_n_beta_estimate(n: int, beta: float, x: float,
                      quad: QuadratureSpec = DEFAULT_QUAD) -> tuple[float, float]:
    """Return ``(value, absolute error estimate)`` of ``J_{n,beta}(x)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if x < 0:
        raise ValueError("x must be non-negative")
    if n > quad.n_max:
        raise ValueError(f"n={n} exceeds n_max={quad.n_max}; raise the cap explicitly")
    if n == 1:
        return 1.0, 0.0
    if x == 0.0:
        return j_zero(n, beta), 0.0
    if quad.scheme == "recursive":
        m = _nodes_for(x, quad.points)
        fine = _j_recursive(n, beta, x, m)
        coarse = _j_recursive(n, beta, x, max(2, (3 * m) // 4))
        return fine, abs(fine - coarse)
    if quad.scheme == "tensor":
        m = quad.points
        fine = _j_tensor(n, beta, x, m)
        coarse = _j_tensor(n, beta, x, max(2, (2 * m) // 3))
        return fine, abs(fine - coarse)
    return _j_qmc(n, beta, x, quad.points, quad.randomizations)


def j_n_beta(n: int, beta: float, x: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """``J_{n,beta}(x)`` with all n arguments equal to ``x``.

    Raises :class:`QuadratureError` when the error estimate exceeds
    ``quad.rel_tol`` relative to the value.
    """
    value, err = j_n_beta_estimate(n, beta, x, quad)
    if err > quad.rel_tol * abs(value):
        raise QuadratureError(
            f"J_{n},{beta}({x}) = {value:.6g} with error estimate {err:.2g} "
            f"> rel_tol {quad.rel_tol:g}")
    return value


@lru_cache(maxsize=4096)
def j_n_beta_cached(n: int, beta: float, x: float, points: int = 64) -> float:
    """Recursive-scheme J without the error double-check; used by the series."""
    if n == 1:
        return 1.0
    if x == 0.0:
        return j_zero(n, beta)
    return _j_recursive(n, beta, x, _nodes_for(x, points))


def i_n_beta(n: int, beta: float, x: float, rel_tol: float = 1e-10) -> float:
    """The Laplace-type integral ``I_{n,beta}(x)`` (used with micro-tier interference)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if x < 0:
        raise ValueError("x must be non-negative")
    d = 2.0 / beta
    g1 = math.gamma(1.0 - d)
    c = x * g1 ** (-beta / 2.0)

    def f(u):
        return u ** (2 * n - 1) * math.exp(-u * u - c * u ** beta)

    val, err = integrate.quad(f, 0.0, math.inf, epsabs=0.0, epsrel=rel_tol, limit=200)
    if err > 10 * rel_tol * abs(val):
        raise QuadratureError(f"I_{n},{beta}({x}) did not converge (err {err:.2g})")
    denom = beta ** (n - 1) * math.factorial(n - 1) * (g1 * math.gamma(1.0 + d)) ** n
    return 2.0 ** n * val / denom
