"""Command-line front end: ``riskbandits {value,simulate,dp,thresholds,hull,obm}``.

Every command reads an optional YAML config (see ``riskbandits.config``),
applies flag overrides, and emits a report as a table, JSON or CSV. JSON
reports carry ``schema_version`` and the fully resolved config. Exit codes:
0 success, 2 configuration or input error, 3 numerical error, 4 resource
bound exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from typing import Any

import yaml

from . import __version__
from .arms import extreme_points, threshold_values
from .config import (SCHEMA_VERSION, arms_from_config, load_config, merge, parse_arm_flag, plain,
                     utility_from_config)
from .dp import exact_value_dp
from .exceptions import BanditError, ConfigError, InvalidInputError, NumericalError
from .hjb import Grid, SolverConfig, effective_arms, feynman_kac_value, solve_hjb
from .obm import (ObmParams, negative_second_moment, obm_cdf, obm_density, shortfall_switch_bound,
                  simulate_obm, switch_value_semivariance)
from .simulate import SimulationConfig, block_rng, estimate_Un, run_strategy, write_trajectory_csv
from .strategies import strategy_from_spec
from .utility import UtilityKind, specialization_certificate

FORMATS = ("table", "json", "csv")


# ---------------------------------------------------------------------------
# helpers

def _regime(arm_set, u) -> dict | None:
    """Two-arm risk/reward classification, or None when it does not apply."""
    if len(arm_set) != 2:
        return None
    a, b = sorted(arm_set.arms, key=lambda arm: arm.mean, reverse=True)
    try:
        t = threshold_values(float(a.mean), float(b.mean), a.sd, b.sd)
    except InvalidInputError as exc:
        return {"regime": "not classified", "reason": str(exc)}
    out: dict[str, Any] = {"arm1": a.id, "arm2": b.id, "ratio": t.ratio, "alpha_low": t.alpha_low,
                           "alpha_high": t.alpha_high, "alpha_low_prime": t.alpha_low_prime}
    alpha = u.alpha
    if u.kind is UtilityKind.MEAN_VARIANCE:
        out["regime"] = t.regime_mean_variance(alpha)
    elif u.kind is UtilityKind.MEAN_SEMIVARIANCE:
        out["regime"] = t.regime_semivariance(alpha)
        if t.alpha_low < alpha < t.alpha_high:
            out["switch_value"] = switch_value_semivariance(float(a.mean), float(b.mean), a.sd, b.sd, alpha)
    elif u.kind is UtilityKind.SHORTFALL:
        out["regime"] = ("specialize arm 1 not optimal" if alpha > t.alpha_low_prime
                         else "undetermined")
    else:
        cert = specialization_certificate(u, a, b)
        opt = cert.optimal_arms
        if opt == (1,):
            out["regime"] = "specialize arm 1"
        elif opt == (2,):
            out["regime"] = "specialize arm 2"
        elif opt == (1, 2):
            out["regime"] = "both arms optimal"
        else:
            out["regime"] = "undetermined"
        out["certificate"] = {"arm1": cert.holds_for_arm1.value, "arm2": cert.holds_for_arm2.value,
                              "ratio_bound": cert.ratio_bound}
    return out


def _solver_config(cfg: dict) -> SolverConfig:
    g = cfg.get("grid", {})
    try:
        return SolverConfig(epsilon_perturbation=float(g.get("epsilon", 0.0)),
                            boundary_policy=g.get("boundary_policy", "one_sided_upwind"),
                            smoothing_width=g.get("smoothing_width"),
                            stability_factor=float(g.get("stability_factor", 0.45)),
                            x_scheme=g.get("x_scheme", "common_viscosity"))
    except ValueError as exc:
        raise ConfigError(f"bad grid block: {exc}") from exc


def _horizons(sim: dict) -> list[int]:
    h = sim.get("horizon")
    if h is None:
        raise ConfigError("simulation.horizon is required")
    hs = h if isinstance(h, list) else [h]
    try:
        return [int(x) for x in hs]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad horizon {h!r}") from exc


# ---------------------------------------------------------------------------
# commands; each returns (results mapping, csv rows, table lines)

def cmd_value(cfg: dict):
    arm_set = arms_from_config(cfg)
    u = utility_from_config(cfg)
    scfg = _solver_config(cfg)
    g = cfg.get("grid", {})
    arms_used = effective_arms(arm_set, scfg)
    grid = Grid.for_arms(arms_used, int(g.get("cells", 200)), frame=g.get("frame", "centered"),
                         stability_factor=scfg.stability_factor)
    sol = solve_hjb(arm_set, u, grid, scfg)
    res: dict[str, Any] = {
        "V": sol.corner_value,
        "grid": {"x_points": grid.x_points, "y_points": grid.y_points, "t_steps": grid.t_steps,
                 "x_range": list(grid.x_range), "y_range": list(grid.y_range),
                 "frame_shift": grid.frame_shift, "dt": grid.dt, "dx": grid.dx, "dy": grid.dy},
        "notes": sol.notes,
    }
    if len(arm_set) == 1:
        a = arms_used[0]
        res["feynman_kac"] = feynman_kac_value(float(a.mean), float(a.variance), sol.utility)
    regime = _regime(arm_set, u)
    if regime is not None:
        res["classification"] = regime
    if g.get("csv"):
        sol.write_csv(g["csv"])
        res["csv"] = g["csv"]

    lines = [f"V ≈ {sol.corner_value:.4f}"]
    if "feynman_kac" in res:
        lines.append(f"single-arm oracle: {res['feynman_kac']:.4f}")
    if regime is not None and "ratio" in regime:
        lines.append(f"regime: {regime['regime']}")
        lines.append(f"thresholds: ratio={regime['ratio']:.4g} alpha_low={regime['alpha_low']:.4g} "
                     f"alpha_high={regime['alpha_high']:.4g} alpha_low_prime={regime['alpha_low_prime']:.4g}")
        if "switch_value" in regime:
            lines.append(f"V ≥ {regime['switch_value']:.3f} (switching region: alpha in "
                         f"({regime['alpha_low']:.3g}, {regime['alpha_high']:.3g}))")
    elif regime is not None:
        lines.append(f"regime: {regime['regime']} ({regime['reason']})")
    lines += [f"note: {n}" for n in sol.notes]
    lines.append(f"grid: {grid.x_points}x{grid.y_points} nodes, {grid.t_steps} time steps")
    rows = [{"V": sol.corner_value, "regime": (regime or {}).get("regime", "")}]
    return res, rows, lines


def cmd_simulate(cfg: dict):
    arm_set = arms_from_config(cfg)
    u = utility_from_config(cfg)
    sim = cfg.get("simulation", {})
    strategy = strategy_from_spec(sim.get("strategy", {"type": "specialize", "arm": 0}))
    rows, lines = [], []
    for n in _horizons(sim):
        sc = SimulationConfig(n, int(sim.get("paths", 10_000)), int(cfg["seed"]),
                              bool(sim.get("antithetic", False)), int(cfg["threads"]),
                              int(sim.get("block_size", 8192)))
        est = estimate_Un(arm_set, strategy, u, sc)
        rec = {"n": n, **est.to_record()}
        rows.append(rec)
        lo, hi = est.ci95
        lines.append(f"n={n:<8d} U_n = {est.mean:+.5f}  se {est.std_error:.5f}  "
                     f"ci95 [{lo:+.5f}, {hi:+.5f}]  paths {est.paths}")
    if sim.get("trajectory_csv"):
        _, recs = run_strategy(arm_set, strategy, _horizons(sim)[-1], block_rng(int(cfg["seed"]), 2 ** 32),
                               record=True)
        write_trajectory_csv(sim["trajectory_csv"], recs)
    res = {"strategy": strategy.to_spec(), "estimates": rows}
    csv_rows = [{"n": r["n"], "mean": r["mean"], "se": r["se"], "ci95_lo": r["ci95"][0],
                 "ci95_hi": r["ci95"][1], "paths": r["paths"], "seed": r["seed"]} for r in rows]
    return res, csv_rows, lines


def cmd_dp(cfg: dict):
    arm_set = arms_from_config(cfg)
    u = utility_from_config(cfg)
    n = int(cfg.get("dp", {}).get("horizon", 8))
    value, first = exact_value_dp(arm_set, u, n)
    res: dict[str, Any] = {"n": n, "V_n": value, "first_action": first, "exact": isinstance(value, Fraction)}
    lines = [f"V_{n} = {value} ({float(value):.10g})", f"optimal first action: arm {first}"]
    if u.kind is UtilityKind.MEAN_VARIANCE:
        alpha = Fraction(u.alpha) if isinstance(value, Fraction) else u.alpha
        ref = max(a.mean - alpha * a.variance for a in arm_set)
        ok = value == ref if isinstance(value, Fraction) else abs(float(value) - float(ref)) <= 1e-12
        res["mean_variance_check"] = {"expected": ref, "agrees": bool(ok)}
        lines.append(f"check max_k(mu_k - alpha sigma_k^2) = {ref}: {'ok' if ok else 'MISMATCH'}")
        if not ok:
            raise NumericalError(f"DP value {value} disagrees with max_k(mu_k - alpha sigma_k^2) = {ref}")
    return res, [{"n": n, "V_n": float(value), "first_action": first}], lines


def cmd_thresholds(cfg: dict):
    t_cfg = cfg.get("thresholds")
    if t_cfg:
        try:
            mu1, mu2, s1, s2 = (float(Fraction(str(t_cfg[k]))) for k in ("mu1", "mu2", "sigma1", "sigma2"))
        except KeyError as exc:
            raise ConfigError(f"thresholds block is missing {exc}") from exc
    else:
        arm_set = arms_from_config(cfg)
        if len(arm_set) != 2:
            raise ConfigError("thresholds need a thresholds block or exactly two arms")
        a, b = sorted(arm_set.arms, key=lambda arm: arm.mean, reverse=True)
        mu1, mu2, s1, s2 = float(a.mean), float(b.mean), a.sd, b.sd
    t = threshold_values(mu1, mu2, s1, s2)
    res = {"mu1": mu1, "mu2": mu2, "sigma1": s1, "sigma2": s2, "ratio": t.ratio,
           "alpha_low": t.alpha_low, "alpha_high": t.alpha_high, "alpha_low_prime": t.alpha_low_prime}
    lines = [f"{'ratio':<16s}{t.ratio:.6g}", f"{'alpha_low':<16s}{t.alpha_low:.6g}",
             f"{'alpha_high':<16s}{t.alpha_high:.6g}", f"{'alpha_low_prime':<16s}{t.alpha_low_prime:.6g}"]
    return res, [res], lines


def cmd_hull(cfg: dict):
    arm_set = arms_from_config(cfg)
    ext = extreme_points(arm_set.pairs)
    rows = [{"arm": a.id, "mean": plain(a.mean), "variance": plain(a.variance), "extreme": k in ext}
            for k, a in enumerate(arm_set)]
    res = {"extreme_arms": [arm_set[k].id for k in ext], "arms": rows,
           "bounds": {"mu_max": plain(arm_set.mu_max), "mu_min": plain(arm_set.mu_min),
                      "var_max": plain(arm_set.var_max), "var_min": plain(arm_set.var_min)}}
    lines = [f"{'arm':>4s} {'mean':>10s} {'variance':>10s}  extreme"]
    lines += [f"{r['arm']:>4d} {str(r['mean']):>10s} {str(r['variance']):>10s}  {'yes' if r['extreme'] else 'no'}"
              for r in rows]
    lines.append(f"{len(ext)} extreme arm(s): {res['extreme_arms']}")
    return res, rows, lines


def cmd_obm(cfg: dict):
    o = cfg.get("obm", {})
    try:
        params = ObmParams(float(o.get("sigma_pos", 2.0)), float(o.get("sigma_neg", 1.0)))
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    t = float(o.get("t", 1.0))
    res: dict[str, Any] = {"sigma_pos": params.sigma_pos, "sigma_neg": params.sigma_neg, "t": t,
                           "p_nonneg": params.p_nonneg,
                           "neg_second_moment": negative_second_moment(params, t)}
    lines = [f"P(W_t >= 0)          = {params.p_nonneg:.6f}",
             f"E[W_t^2 1{{W_t < 0}}] = {res['neg_second_moment']:.6f}"]
    if "mu1" in o and "mu2" in o:
        mu1, mu2 = float(o["mu1"]), float(o["mu2"])
        s1, s2 = params.sigma_pos, params.sigma_neg
        res["shortfall_switch_bound"] = shortfall_switch_bound(mu1, mu2, s1, s2)
        lines.append(f"alpha_low_prime      = {res['shortfall_switch_bound']:.6g}")
        if "alpha" in o:
            res["switch_value"] = switch_value_semivariance(mu1, mu2, s1, s2, float(o["alpha"]))
            lines.append(f"switch value         = {res['switch_value']:.6f}")
    paths = int(o.get("paths", 0))
    if paths:
        st = simulate_obm(params, t, int(o.get("steps", 4000)), paths, int(cfg["seed"]), int(cfg["threads"]))
        res["simulation"] = st.to_record()
        lines.append(f"simulated P(W_t >= 0) = {st.p_nonneg:.5f} (se {st.p_nonneg_se:.5f})")
        lines.append(f"simulated E[W^2; W<0] = {st.neg_second_moment:.5f} (se {st.neg_second_moment_se:.5f})")
    # density and cdf on a plot-ready grid
    span = 4.0 * max(params.sigma_pos, params.sigma_neg) * math.sqrt(t)
    ys = [-span + 2 * span * i / 200 for i in range(201)]
    rows = [{"y": y, "density": obm_density(params, t, y), "cdf": obm_cdf(params, t, y)} for y in ys]
    return res, rows, lines


COMMANDS = {"value": cmd_value, "simulate": cmd_simulate, "dp": cmd_dp,
            "thresholds": cmd_thresholds, "hull": cmd_hull, "obm": cmd_obm}


# ---------------------------------------------------------------------------
# argument handling

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML experiment config")
    common.add_argument("--seed", type=int, help="random seed (64-bit unsigned)")
    common.add_argument("--output", choices=FORMATS, help="report format (default: table)")
    common.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    common.add_argument("--threads", type=int, help="worker threads for simulation")
    common.add_argument("--arm", action="append", metavar="MEAN,VAR",
                        help="arm as a mean-variance pair; repeat for several arms (replaces config arms)")
    common.add_argument("--utility", metavar="KIND", help="utility kind, e.g. mean_variance")
    common.add_argument("--alpha", help="utility alpha (fractions like 1/3 allowed)")
    common.add_argument("--delta", type=float, help="shortfall smoothing width")
    common.add_argument("--phi", help='phi for additive/blend kinds, e.g. "-exp(-x)"')

    p = argparse.ArgumentParser(prog="riskbandits", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("value", parents=[common], help="limit value V from the HJB PDE")
    sp.add_argument("--cells", type=int, help="grid cells per axis (default 200)")
    sp.add_argument("--epsilon", type=float, help="variance perturbation for zero-variance arms")
    sp.add_argument("--frame", choices=("centered", "absolute"))
    sp.add_argument("--csv", metavar="PATH", help="dump v(0,x,y) and the argmax arm")

    sp = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimate of U_n")
    sp.add_argument("--strategy", help="specialize[:K] | alternate | lambda_fraction:LAM | sign_switch")
    sp.add_argument("--horizon", type=int, action="append", help="horizon n; repeat for a sweep")
    sp.add_argument("--paths", type=int)
    sp.add_argument("--antithetic", action="store_true", default=None)
    sp.add_argument("--trajectory-csv", metavar="PATH", help="dump one trajectory stage by stage")

    sp = sub.add_parser("dp", parents=[common], help="exact V_n by backward induction")
    sp.add_argument("--horizon", type=int)

    sp = sub.add_parser("thresholds", parents=[common], help="two-arm risk thresholds")
    for name in ("mu1", "mu2", "sigma1", "sigma2"):
        sp.add_argument(f"--{name}")

    sub.add_parser("hull", parents=[common], help="extreme arms of the mean-variance hull")

    sp = sub.add_parser("obm", parents=[common], help="oscillating Brownian motion summaries")
    sp.add_argument("--sigma-pos", type=float)
    sp.add_argument("--sigma-neg", type=float)
    sp.add_argument("--t", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--paths", type=int, help="simulate this many paths (0: closed forms only)")
    sp.add_argument("--mu1", type=float)
    sp.add_argument("--mu2", type=float)
    sp.add_argument("--alpha-obm", dest="alpha_obm", type=float, help="alpha for the switch value")
    return p


def _strategy_flag(text: str) -> dict:
    name, _, arg = text.partition(":")
    if name == "specialize":
        return {"type": "specialize", "arm": int(arg or 0)}
    if name == "alternate":
        return {"type": "alternate", "sequence": [int(a) for a in arg.split(",")] if arg else [0, 1]}
    if name == "lambda_fraction":
        return {"type": "lambda_fraction", "lam": arg or "1/2"}
    if name == "sign_switch":
        return {"type": "sign_switch"}
    raise ConfigError(f"unknown strategy {text!r}")


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = load_config(args.config)
    over: dict[str, Any] = {"seed": args.seed, "threads": args.threads,
                            "output": {"format": args.output, "path": args.out}}
    if args.arm:
        cfg["arms"] = [parse_arm_flag(a) for a in args.arm]
    util: dict[str, Any] = {}
    if args.utility:
        util = {"kind": args.utility}
        cfg.pop("utility", None)
    if args.alpha is not None:
        util["alpha"] = args.alpha
    if args.delta is not None:
        util["delta"] = args.delta
    if args.phi is not None:
        util["phi"] = args.phi
    if util:
        over["utility"] = util
    cmd = args.command
    if cmd == "value":
        over["grid"] = {"cells": args.cells, "epsilon": args.epsilon, "frame": args.frame, "csv": args.csv}
    elif cmd == "simulate":
        over["simulation"] = {"horizon": args.horizon, "paths": args.paths, "antithetic": args.antithetic,
                              "trajectory_csv": args.trajectory_csv,
                              "strategy": _strategy_flag(args.strategy) if args.strategy else None}
    elif cmd == "dp":
        over["dp"] = {"horizon": args.horizon}
    elif cmd == "thresholds":
        vals = {k: getattr(args, k) for k in ("mu1", "mu2", "sigma1", "sigma2")}
        if any(v is not None for v in vals.values()):
            over["thresholds"] = vals
    elif cmd == "obm":
        over["obm"] = {"sigma_pos": args.sigma_pos, "sigma_neg": args.sigma_neg, "t": args.t,
                       "steps": args.steps, "paths": args.paths, "mu1": args.mu1, "mu2": args.mu2,
                       "alpha": args.alpha_obm}
    cfg = merge(cfg, over)
    if cfg["output"].get("format") not in FORMATS:
        raise ConfigError(f"output.format must be one of {FORMATS}")
    if not isinstance(cfg.get("seed"), int) or not 0 <= cfg["seed"] < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    return cfg


def render(command: str, cfg: dict, res: dict, rows: list[dict], lines: list[str]) -> str:
    fmt = cfg["output"]["format"]
    if fmt == "json":
        doc = {"schema_version": SCHEMA_VERSION, "command": command, "config": plain(cfg),
               "results": plain(res)}
        return json.dumps(doc, indent=2, default=str) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        fields: list[str] = []
        for r in rows:
            fields += [k for k in r if k not in fields]
        w = csv.DictWriter(buf, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: plain(v) for k, v in r.items()})
        return buf.getvalue()
    header = f"# riskbandits {command}  (config: {yaml.safe_dump(plain(cfg), default_flow_style=True, width=10**6).strip()})"
    return "\n".join([header, *lines]) + "\n"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        res, rows, lines = COMMANDS[args.command](cfg)
        text = render(args.command, cfg, res, rows, lines)
        path = cfg["output"].get("path")
        if path:
            with open(path, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    except BanditError as exc:
        print(f"riskbandits {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError:
        print(f"riskbandits {args.command}: error: out of memory", file=sys.stderr)
        return 4
    except (OSError, ValueError) as exc:
        print(f"riskbandits {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
