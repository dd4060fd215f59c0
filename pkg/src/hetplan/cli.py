"""Command-line front end.

Configuration is plain ``key=value`` text, one pair per line, ``#``
starts a comment.  Exit codes: 0 success, 1 validation gate failed,
2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace

import numpy as np

from . import cellstats as cs
from . import optimizer as opt
from . import simgeo
from .coverage import mean_rate_equivalent, mean_rate_macro, sir_ccdf_point
from .model import (InfeasibleDesignError, NetworkParams, ParameterError, UserParams,
                    solve_equivalent_pmacro, validate)
from .throughput import handoff_factor

EXIT_OK, EXIT_GATE, EXIT_CONFIG = 0, 1, 2

FLOAT_KEYS = ("lambda_bs", "p", "p_macro", "p_micro", "p_ref", "beta", "a_prefactor",
              "lambda_su", "lambda_mu", "lambda_l", "v", "t_h", "r0", "window", "guard")
LIST_KEYS = ("taus", "grid_p", "grid_pmicro", "xi_list")
INT_KEYS = ("replications",)
KNOWN_KEYS = FLOAT_KEYS + LIST_KEYS + INT_KEYS

DEFAULTS = {"p_ref": 1.0, "a_prefactor": 1.0, "v": 0.0, "t_h": 0.0,
            "window": 1000.0, "guard": 700.0, "replications": 1000}

USER_KEYS = ("lambda_su", "lambda_mu", "lambda_l", "v", "t_h")
REQUIRED = {
    "coverage": ("lambda_bs", "p", "beta", "p_micro", "taus"),
    "sweep": ("lambda_bs", "beta") + USER_KEYS,
    "optimize": ("lambda_bs", "beta") + USER_KEYS,
    "validate": ("lambda_bs", "p", "beta", "p_micro") + USER_KEYS,
}


class ConfigError(ValueError):
    pass


def _parse_list(text: str) -> list[float]:
    """Comma-separated numbers, or ``start:step:stop`` with an inclusive stop."""
    text = text.strip()
    if ":" in text and "," not in text:
        start, step, stop = (float(x) for x in text.split(":"))
        if step <= 0:
            raise ValueError("range step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(n)]
    return [float(x) for x in text.split(",") if x.strip()]


def parse_config(text: str) -> dict:
    cfg: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in LIST_KEYS:
                cfg[key] = _parse_list(val)
            elif key in INT_KEYS:
                cfg[key] = int(val)
            else:
                cfg[key] = float(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return cfg


def _require(cfg: dict, command: str) -> dict:
    for key in REQUIRED[command]:
        if key not in cfg:
            raise ConfigError(f"missing required key: {key}")
    out = dict(DEFAULTS)
    out.update(cfg)
    return out


def _network(cfg: dict, p: float | None = None) -> NetworkParams:
    p = cfg["p"] if p is None else p
    pu = cfg.get("p_micro", cfg["p_ref"])
    if "p_macro" in cfg:
        pm = cfg["p_macro"]
    elif p > 0:
        try:
            pm = solve_equivalent_pmacro(p, pu, cfg["p_ref"], cfg["beta"])
        except InfeasibleDesignError as exc:
            raise ConfigError(str(exc)) from None
    else:
        pm = 0.0
    return NetworkParams(cfg["lambda_bs"], p, pm, pu, cfg["beta"], cfg["a_prefactor"], cfg["p_ref"])


def _without(cfg: dict, key: str) -> dict:
    return {k: v for k, v in cfg.items() if k != key}


def _users(cfg: dict) -> UserParams:
    return UserParams(cfg["lambda_su"], cfg["lambda_mu"], cfg["lambda_l"], cfg["v"], cfg["t_h"])


def _check(net: NetworkParams, usr: UserParams | None) -> None:
    rep = validate(net, usr)
    if not rep.ok:
        raise ConfigError(str(rep))


def _sim_config(cfg: dict, args) -> simgeo.SimConfig:
    try:
        return simgeo.SimConfig(cfg["window"], cfg["guard"], cfg["replications"], args.seed, args.threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _grid(cfg: dict) -> opt.SearchGrid:
    g = opt.SearchGrid()
    if "grid_p" in cfg:
        g = replace(g, p_values=tuple(cfg["grid_p"]))
    if "grid_pmicro" in cfg:
        g = replace(g, pmicro_values=tuple(cfg["grid_pmicro"]))
    return g


def fmt(x) -> str:
    """Fixed 6-significant-digit rendering used by every table."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.6g}"
    return "0" if s == "-0" else s


def _json_value(x):
    s = fmt(x)
    try:
        v = float(s)
    except ValueError:
        return s
    return v if math.isfinite(v) else s


def render(columns: list[str], rows: list[list], form: str) -> str:
    if form == "json":
        return json.dumps([{c: _json_value(v) for c, v in zip(columns, r)} for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def cmd_coverage(cfg: dict, args) -> tuple[list[str], list[list], int]:
    cfg = _require(cfg, "coverage")
    net = _network(cfg)
    _check(net, None)
    cols = ["tau", "ccdf_analytic", "method"]
    rows = []
    for t in cfg["taus"]:
        pt = sir_ccdf_point(net, t)
        rows.append([t, pt.prob, pt.method])
    if args.simulate:
        cols += ["ccdf_sim", "se"]
        ests = simgeo.empirical_sir_ccdf(net, _sim_config(cfg, args), cfg["taus"])
        for r, e in zip(rows, ests):
            r += [e.mean, e.se]
    return cols, rows, EXIT_OK


def cmd_sweep(cfg: dict, args) -> tuple[list[str], list[list], int]:
    cfg = _require(cfg, "sweep")
    usr = _users(cfg)
    template = _network({**_without(cfg, "p_macro"), "p": 1.0, "p_micro": cfg["p_ref"]}, 1.0)
    _check(template, usr)
    grid = _grid(cfg)
    ev = opt.evaluate_grid(template, usr, grid, mode="exact" if args.exact else "approx",
                           threads=args.threads)
    by_key = {(d.p, round(d.P_micro / template.P_ref, 9)): i for i, d in enumerate(ev.designs)}
    cols = ["p", "P_micro_over_P", "P_macro_over_P", "r_su", "r_mu", "handoff_factor", "feasible"]
    rows = []
    for p in sorted(grid.p_values):
        for ratio in sorted(grid.pmicro_values):
            i = by_key.get((float(p), round(ratio, 9)))
            if i is None:
                rows.append([p, ratio, math.nan, math.nan, math.nan, math.nan, False])
            else:
                rows.append([p, ratio, ev.pmacro_ratio[i], ev.r_su[i], ev.r_mu[i], ev.handoff[i], True])
    return cols, rows, EXIT_OK


def cmd_optimize(cfg: dict, args) -> tuple[list[str], list[list], int]:
    cfg = _require(cfg, "optimize")
    usr = _users(cfg)
    template = _network({**_without(cfg, "p_macro"), "p": 1.0, "p_micro": cfg["p_ref"]}, 1.0)
    _check(template, usr)
    ev = opt.evaluate_grid(template, usr, _grid(cfg), threads=args.threads)
    top_k = opt.TOP_K if args.exact else 0
    cols = ["kind", "xi", "p", "P_micro_over_P", "P_macro_over_P", "r_su", "r_mu", "objective",
            "rescore_delta", "report"]
    rows = []
    if "r0" in cfg:
        res = opt.solve_constrained(ev, cfg["r0"])
        if isinstance(res, opt.InfeasibleCertificate):
            rec = res.record
            rows.append(["infeasible", rec.xi, rec.p_star, rec.P_micro_star, rec.P_macro_star,
                         rec.r_su_star, rec.r_mu_star, rec.objective, math.nan,
                         f"max r_su {fmt(res.max_r_su)} < r0"])
        else:
            rec = res.record
            rows.append(["constrained", res.xi, rec.p_star, rec.P_micro_star, rec.P_macro_star,
                         rec.r_su_star, rec.r_mu_star, rec.objective, math.nan,
                         f"gap {fmt(res.gap)}"])
        return cols, rows, EXIT_OK
    recs = opt.xi_sweep(ev, cfg.get("xi_list", opt.DEFAULT_XI), top_k)
    report = str(opt.verify_xi_properties(recs))
    for rec in recs:
        delta = rec.objective - rec.approx_objective if rec.rescored else math.nan
        rows.append(["xi", rec.xi, rec.p_star, rec.P_micro_star, rec.P_macro_star,
                     rec.r_su_star, rec.r_mu_star, rec.objective, delta, report])
    return cols, rows, EXIT_OK


def _row(quantity, analytic, est: simgeo.SimEstimate, one_sided: bool = False):
    z = est.z_score(analytic)
    ok = z >= -3.0 if one_sided else abs(z) <= 3.0
    note = "low power" if est.low_power else ("one-sided" if one_sided else "")
    return [quantity, analytic, est.mean, est.se, z, ok, note]


def cmd_validate(cfg: dict, args) -> tuple[list[str], list[list], int]:
    cfg = _require(cfg, "validate")
    net = _network(cfg)
    usr = _users(cfg)
    _check(net, usr)
    sim = _sim_config(cfg, args)
    rows = []
    taus = cfg.get("taus", [1.0, 2.0, 5.0, 10.0])
    for t, e in zip(taus, simgeo.empirical_sir_ccdf(net, sim, taus)):
        rows.append(_row(f"ccdf[{fmt(t)}]", sir_ccdf_point(net, t).prob, e))
    rates = simgeo.empirical_rates(net, sim)
    rows.append(_row("e_rate_macro", float(mean_rate_macro(net)), rates["e_rate_macro"]))
    if net.is_feasible():
        rows.append(_row("e_rate_equivalent", float(mean_rate_equivalent(net)), rates["e_rate_het"]))
    half = sim.inner
    length = min(2.0 * half - usr.v * usr.t_h, 2.0 * half)
    rows.append(_row("crossing_rate", cs.crossing_intensity(net),
                     simgeo.empirical_crossings(net, sim, length)))
    if usr.v * usr.t_h > 0:
        rows.append(_row("handoff_free_fraction", handoff_factor(net, usr),
                         simgeo.empirical_handoff_free_fraction(net, usr, sim, length), one_sided=True))
    counts = simgeo.empirical_counts(net, usr, sim)
    rows.append(_row("n_mu_macro", cs.n_mu_macro(net, usr), counts["n_mu_macro"]))
    rows.append(_row("n_su_macro", cs.n_su_macro(net, usr), counts["n_su_macro"]))
    rows.append(_row("n_su_het", cs.n_su_het(net, usr), counts["n_su_het"]))
    rows.append(_row("n_mu_het", cs.n_mu_het(net, usr), counts["n_mu_het"]))
    rows.append(_row("mass_transport_gap", 0.0, counts["mass_transport_gap"]))
    cols = ["quantity", "analytic", "sim_mean", "sim_se", "z_score", "pass", "note"]
    code = EXIT_OK if all(r[5] for r in rows) else EXIT_GATE
    return cols, rows, code


COMMANDS = {"coverage": cmd_coverage, "sweep": cmd_sweep, "optimize": cmd_optimize, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hetplan", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="key=value configuration file")
    ap.add_argument("--out", help="output file (default stdout)")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--simulate", action="store_true", help="add Monte Carlo columns (coverage)")
    ap.add_argument("--exact", action="store_true", help="use exact cell integrals")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=12345)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
        cols, rows, code = COMMANDS[args.command](cfg, args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, ParameterError, InfeasibleDesignError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = render(cols, rows, args.format)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
