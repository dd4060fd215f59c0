"""Monte Carlo oracle for the two-tier network on a Poisson road system.

Base stations are sampled in the square ``[-W, W]^2``; every quantity is
evaluated at the origin or for users inside the inner square of
half-width ``W - G``.  Replicate ``i`` draws from its own
``SeedSequence(seed, spawn_key=(i, stream))`` so results do not depend
on how replicates are spread over threads.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .model import NetworkParams, UserParams

log = logging.getLogger(__name__)

# independent random streams inside one replicate
_NET, _LINES, _STATIC, _TYPICAL = range(4)


@dataclass(frozen=True)
class SimConfig:
    """Simulation window and replication settings.

    Attributes
    ----------
    window : float
        Half-width ``W`` of the square in which BSs are sampled (m).
    guard : float
        Guard band ``G``; users are sampled in the inner square of
        half-width ``W - G`` (m).
    replications : int
        Number of independent replicates ``R``.
    seed : int
        Root seed (64-bit).
    threads : int
        Worker threads; results do not depend on it.
    """

    window: float = 1000.0
    guard: float = 700.0
    replications: int = 1000
    seed: int = 12345
    threads: int = 1
    chunk: int = 256

    def __post_init__(self):
        if not self.window > self.guard >= 0:
            raise ValueError("need window > guard >= 0")
        if self.replications < 1:
            raise ValueError("need at least one replication")

    @property
    def inner(self) -> float:
        return self.window - self.guard


@dataclass(frozen=True)
class SimEstimate:
    """Replicate mean with standard error ``std / sqrt(R)``; ``inf`` when ``R < 2``."""

    quantity: str
    mean: float
    se: float
    replications: int
    seed: int

    @property
    def low_power(self) -> bool:
        return self.replications < 2

    def z_score(self, target: float) -> float:
        if self.se == 0.0:
            return 0.0 if self.mean == target else math.copysign(math.inf, self.mean - target)
        return (self.mean - target) / self.se


@dataclass(frozen=True)
class Realization:
    macro: np.ndarray
    micro: np.ndarray


@dataclass(frozen=True)
class LineSet:
    """Chords of the line process clipped to a square, with users on them."""

    starts: np.ndarray
    ends: np.ndarray
    users: np.ndarray
    user_line: np.ndarray

    @property
    def total_length(self) -> float:
        return float(np.linalg.norm(self.ends - self.starts, axis=1).sum())


def estimate(quantity: str, values, seed: int) -> SimEstimate:
    v = np.asarray(values, dtype=float)
    r = len(v)
    se = float(v.std(ddof=1) / math.sqrt(r)) if r >= 2 else math.inf
    return SimEstimate(quantity, float(v.mean()), se, r, seed)


def _rng(cfg: SimConfig, index: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(index, stream))))


def _uniform_square(rng: np.random.Generator, half: float, n: int) -> np.ndarray:
    return rng.uniform(-half, half, size=(n, 2))


def guard_tail_fraction(net: NetworkParams, cfg: SimConfig) -> float:
    """Interference beyond distance ``W`` relative to that beyond the typical serving distance.

    Both are ``2 pi lambda r**(2-beta)/(beta-2)``, so the ratio is
    ``(r_ref/W)**(beta-2)`` with ``r_ref = 1/(2 sqrt(lambda_bs))``.
    """
    r_ref = 0.5 / math.sqrt(net.lambda_bs)
    return (r_ref / cfg.window) ** (net.beta - 2.0)


def check_config(net: NetworkParams, cfg: SimConfig) -> list[str]:
    """Warnings about the window; an empty list means the window is adequate."""
    out = []
    expected = net.lambda_bs * (2.0 * cfg.window) ** 2
    if expected < 50:
        out.append(f"only {expected:.3g} BSs expected in the window")
    tail = guard_tail_fraction(net, cfg)
    if tail > 1e-3:
        out.append(f"interference beyond the window is {tail:.2g} of the mean (> 1e-3)")
    for msg in out:
        log.warning(msg)
    return out


def sample_network(net: NetworkParams, cfg: SimConfig, index: int) -> Realization:
    """Macro and micro BS positions of replicate ``index``."""
    rng = _rng(cfg, index, _NET)
    area = (2.0 * cfg.window) ** 2
    n_macro = rng.poisson(net.p * net.lambda_bs * area)
    n_micro = rng.poisson((1.0 - net.p) * net.lambda_bs * area)
    return Realization(_uniform_square(rng, cfg.window, n_macro),
                       _uniform_square(rng, cfg.window, n_micro))


def _clip_lines(r: np.ndarray, theta: np.ndarray, half: float):
    """Clip lines ``{r n(theta) + s t(theta)}`` to ``[-half, half]^2``; returns the chord end points."""
    nx, ny = np.cos(theta), np.sin(theta)
    tx, ty = -ny, nx
    px, py = r * nx, r * ny
    lo = np.full(len(r), -np.inf)
    hi = np.full(len(r), np.inf)
    for p0, d in ((px, tx), (py, ty)):
        with np.errstate(divide="ignore", invalid="ignore"):
            s1 = (-half - p0) / d
            s2 = (half - p0) / d
        flat = d == 0
        a, b = np.minimum(s1, s2), np.maximum(s1, s2)
        inside = np.abs(p0) <= half
        a = np.where(flat, np.where(inside, -np.inf, np.inf), a)
        b = np.where(flat, np.where(inside, np.inf, -np.inf), b)
        lo, hi = np.maximum(lo, a), np.minimum(hi, b)
    ok = hi > lo
    starts = np.column_stack([px + lo * tx, py + lo * ty])
    ends = np.column_stack([px + hi * tx, py + hi * ty])
    return starts[ok], ends[ok]


def _users_on_chords(rng, starts, ends, lambda_mu):
    lengths = np.linalg.norm(ends - starts, axis=1)
    counts = rng.poisson(lambda_mu * lengths)
    line_id = np.repeat(np.arange(len(starts)), counts)
    frac = rng.random(counts.sum())
    users = starts[line_id] + frac[:, None] * (ends - starts)[line_id]
    return users, line_id


def sample_lines(usr: UserParams, cfg: SimConfig, index: int) -> LineSet:
    """Poisson lines of length intensity ``lambda_l`` over the inner square, with mobile users on them."""
    rng = _rng(cfg, index, _LINES)
    half = cfg.inner
    radius = half * math.sqrt(2.0)
    n = rng.poisson(2.0 * usr.lambda_l * radius)
    r = rng.uniform(-radius, radius, n)
    theta = rng.uniform(0.0, math.pi, n)
    starts, ends = _clip_lines(r, theta, half)
    users, line_id = _users_on_chords(rng, starts, ends, usr.lambda_mu)
    return LineSet(starts, ends, users, line_id)


def _sir_at_origin(net: NetworkParams, real: Realization) -> tuple[float, float, float]:
    """``(SIR of the nearest macro, SIR of the strongest BS, macro present)``.

    The path-loss prefactor cancels.  Without a macro BS the macro SIR is 0.
    """
    pts = np.vstack([real.macro, real.micro])
    if len(pts) == 0:
        return 0.0, 0.0, 0.0
    power = np.concatenate([np.full(len(real.macro), net.P_macro), np.full(len(real.micro), net.P_micro)])
    rx = power * np.power(np.einsum("ij,ij->i", pts, pts), -net.beta / 2.0)
    total = rx.sum()
    het = rx.max()
    het_sir = het / (total - het) if total > het else math.inf
    if len(real.macro) == 0:
        return 0.0, het_sir, 0.0
    j = int(np.argmin(np.einsum("ij,ij->i", real.macro, real.macro)))
    macro_sir = rx[j] / (total - rx[j]) if total > rx[j] else math.inf
    return macro_sir, het_sir, 1.0


def _map_replicates(cfg: SimConfig, fn, n: int | None = None) -> list:
    """Apply ``fn(index)`` to every replicate, preserving index order."""
    n = cfg.replications if n is None else n
    chunks = [range(s, min(s + cfg.chunk, n)) for s in range(0, n, cfg.chunk)]

    def run(idx):
        return [fn(i) for i in idx]

    if cfg.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return [x for part in parts for x in part]


class ReplicateTrace:
    """Collects per-replicate values and writes them as ``replicate,quantity,value`` CSV."""

    def __init__(self):
        self.rows: list[tuple[int, str, float]] = []

    def add(self, quantity: str, values) -> None:
        self.rows.extend((i, quantity, float(v)) for i, v in enumerate(values))

    def write(self, stream) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["replicate", "quantity", "value"])
        for i, q, v in self.rows:
            w.writerow([i, q, repr(v)])


def simulate_sir(net: NetworkParams, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-replicate SIR at the origin: nearest-macro association and max-power association."""
    check_config(net, cfg)
    rows = _map_replicates(cfg, lambda i: _sir_at_origin(net, sample_network(net, cfg, i)))
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    missing = 1.0 - arr[:, 2].mean()
    if missing > 0.01:
        log.warning("no macro BS in %.2g of replicates (recorded as SIR = 0)", missing)
    return arr[:, 0], arr[:, 1]


def empirical_sir_ccdf(net: NetworkParams, cfg: SimConfig, taus, which: str = "macro",
                       trace: ReplicateTrace | None = None) -> list[SimEstimate]:
    """Fraction of replicates with SIR above each threshold."""
    macro, het = simulate_sir(net, cfg)
    sir = macro if which == "macro" else het
    out = []
    for t in taus:
        ind = (sir > t).astype(float)
        if trace is not None:
            trace.add(f"ccdf_{which}[{t:g}]", ind)
        out.append(estimate(f"ccdf_{which}[{t:g}]", ind, cfg.seed))
    return out


def empirical_rates(net: NetworkParams, cfg: SimConfig,
                    trace: ReplicateTrace | None = None) -> dict[str, SimEstimate]:
    """Mean ``log2(1 + SIR)`` for both associations."""
    macro, het = simulate_sir(net, cfg)
    out = {}
    for name, sir in (("e_rate_macro", macro), ("e_rate_het", het)):
        vals = np.log2(1.0 + sir)
        if trace is not None:
            trace.add(name, vals)
        out[name] = estimate(name, vals, cfg.seed)
    return out


def _strongest(net, real, tree_macro, tree_micro, pts):
    """Index into ``vstack([macro, micro])`` of the max-power BS for each point."""
    dm, im = tree_macro.query(pts) if tree_macro is not None else (np.full(len(pts), np.inf), None)
    du, iu = tree_micro.query(pts) if tree_micro is not None else (np.full(len(pts), np.inf), None)
    # compare P d^-beta through d * P^(-1/beta) to avoid overflow
    with np.errstate(divide="ignore"):
        em = dm * (net.P_macro ** (-1.0 / net.beta) if net.P_macro > 0 else np.inf)
        eu = du * (net.P_micro ** (-1.0 / net.beta) if net.P_micro > 0 else np.inf)
    macro_wins = em <= eu
    idx = np.where(macro_wins, im if im is not None else -1,
                   (iu + len(real.macro)) if iu is not None else -1)
    return idx, macro_wins


def _count_replicate(net: NetworkParams, usr: UserParams, cfg: SimConfig, i: int):
    real = sample_network(net, cfg, i)
    lines = sample_lines(usr, cfg, i)
    half = cfg.inner
    rng = _rng(cfg, i, _STATIC)
    static = _uniform_square(rng, half, rng.poisson(usr.lambda_su * (2.0 * half) ** 2))
    # the typical mobile brings its own line through the origin
    trng = _rng(cfg, i, _TYPICAL)
    theta = trng.uniform(0.0, math.pi)
    s0, e0 = _clip_lines(np.zeros(1), np.array([theta - math.pi / 2.0]), half)
    extra, _ = _users_on_chords(trng, s0, e0, usr.lambda_mu)
    if len(real.macro) == 0:
        return None
    tree_macro = cKDTree(real.macro)
    tree_micro = cKDTree(real.micro) if len(real.micro) else None
    origin = np.zeros((1, 2))
    _, star = tree_macro.query(origin)
    star = int(star[0])
    mobiles = np.vstack([lines.users, extra])
    near_mob = tree_macro.query(mobiles)[1] if len(mobiles) else np.zeros(0, int)
    in_cell_mob = near_mob == star
    own_lines = np.zeros(len(mobiles), bool)
    own_lines[len(lines.users):] = True
    s_idx, _ = _strongest(net, real, tree_macro, tree_micro, static) if len(static) else (np.zeros(0, int), None)
    o_idx, _ = _strongest(net, real, tree_macro, tree_micro, origin)
    serving = int(o_idx[0])

    n_mu_macro = 1.0 + in_cell_mob.sum()
    n_su_macro = float(np.count_nonzero(s_idx == star))
    n_su_het = 1.0 + np.count_nonzero(s_idx == serving)
    # under the static-user view the extra line is not part of the road system
    n_mu_het = float(np.count_nonzero(in_cell_mob & ~own_lines)) if serving == star else 0.0
    counted = np.vstack([mobiles[in_cell_mob], static[(s_idx == star) | (s_idx == serving)]])
    touched = bool(np.any(np.abs(counted) >= half - _edge_margin(net)))
    return n_mu_macro, n_su_macro, n_su_het, n_mu_het, float(touched)


def _edge_margin(net: NetworkParams) -> float:
    # a counted user this close to the inner boundary means the cell may be cut off
    return 0.5 / math.sqrt(net.lambda_bs)


COUNT_NAMES = ("n_mu_macro", "n_su_macro", "n_su_het", "n_mu_het")


def empirical_counts(net: NetworkParams, usr: UserParams, cfg: SimConfig,
                     trace: ReplicateTrace | None = None) -> dict[str, SimEstimate]:
    """Mean co-served user counts under the mobile and static Palm views.

    Also returns ``mass_transport_gap``: the per-replicate difference
    ``lambda_su n_mu_het - lambda_l lambda_mu n_su_macro`` whose mean is 0.
    """
    check_config(net, cfg)
    rows = [r for r in _map_replicates(cfg, lambda i: _count_replicate(net, usr, cfg, i)) if r is not None]
    if not rows:
        raise RuntimeError("no replicate contained a macro BS")
    if len(rows) < cfg.replications:
        log.warning("%d replicates without a macro BS skipped", cfg.replications - len(rows))
    arr = np.array(rows)
    truncated = arr[:, 4].mean()
    if truncated > 0:
        log.warning("zero cell reached the guard band in %.2g of replicates", truncated)
    out = {}
    for k, name in enumerate(COUNT_NAMES):
        if trace is not None:
            trace.add(name, arr[:, k])
        out[name] = estimate(name, arr[:, k], cfg.seed)
    gap = usr.lambda_su * arr[:, 3] - usr.lambda_l * usr.lambda_mu * arr[:, 1]
    out["mass_transport_gap"] = estimate("mass_transport_gap", gap, cfg.seed)
    out["truncated_fraction"] = estimate("truncated_fraction", arr[:, 4], cfg.seed)
    return out


def macro_crossings(macro: np.ndarray, x0: float, x1: float) -> np.ndarray:
    """Points in ``(x0, x1)`` on the x-axis where the nearest macro BS changes.

    Along the axis the squared distance to BS ``b`` is ``x^2 - 2 b_x x + |b|^2``,
    so the nearest BS follows the lower envelope of lines in ``x`` and the
    next crossing is the first intersection ahead with a BS further right.
    """
    if len(macro) < 2:
        return np.zeros(0)
    bx = macro[:, 0]
    sq = np.einsum("ij,ij->i", macro, macro)
    cur = int(np.argmin((x0 - bx) ** 2 + macro[:, 1] ** 2))
    x = x0
    out = []
    while True:
        ahead = bx > bx[cur]
        if not ahead.any():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (sq[ahead] - sq[cur]) / (2.0 * (bx[ahead] - bx[cur]))
        cand = np.flatnonzero(ahead)
        ok = t > x
        if not ok.any():
            break
        k = int(np.argmin(np.where(ok, t, np.inf)))
        x = float(t[k])
        if x >= x1:
            break
        out.append(x)
        cur = int(cand[k])
    return np.array(out)


def empirical_crossings(net: NetworkParams, cfg: SimConfig, length: float,
                        trace: ReplicateTrace | None = None) -> SimEstimate:
    """Macro-cell boundary crossings per metre along a horizontal segment through the origin."""
    if length > 2.0 * cfg.inner:
        raise ValueError("segment longer than the inner square")
    rates = _map_replicates(cfg, lambda i: len(macro_crossings(
        sample_network(net, cfg, i).macro, -length / 2.0, length / 2.0)) / length)
    if trace is not None:
        trace.add("crossing_rate", rates)
    return estimate("crossing_rate", rates, cfg.seed)


def _union_length(centers: np.ndarray, width: float, a: float, b: float) -> float:
    if len(centers) == 0 or width <= 0:
        return 0.0
    lo = np.clip(np.sort(centers) - width / 2.0, a, b)
    hi = np.clip(np.sort(centers) + width / 2.0, a, b)
    total, cur_lo, cur_hi = 0.0, lo[0], hi[0]
    for l, h in zip(lo[1:], hi[1:]):
        if l > cur_hi:
            total += cur_hi - cur_lo
            cur_lo, cur_hi = l, h
        else:
            cur_hi = max(cur_hi, h)
    return total + cur_hi - cur_lo


def empirical_handoff_free_fraction(net: NetworkParams, usr: UserParams, cfg: SimConfig,
                                    length: float, trace: ReplicateTrace | None = None) -> SimEstimate:
    """Fraction of a segment outside every handoff interval of length ``v T_h`` centred at a crossing."""
    width = usr.v * usr.t_h
    if length + width > 2.0 * cfg.inner:
        raise ValueError("segment plus handoff width longer than the inner square")
    a, b = -length / 2.0, length / 2.0

    def one(i):
        c = macro_crossings(sample_network(net, cfg, i).macro, a - width / 2.0, b + width / 2.0)
        return 1.0 - _union_length(c, width, a, b) / length

    vals = _map_replicates(cfg, one)
    if trace is not None:
        trace.add("handoff_free_fraction", vals)
    return estimate("handoff_free_fraction", vals, cfg.seed)
