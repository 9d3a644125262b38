"""Experiment configuration: one YAML file, overridable from the command line.

Schema (every block optional unless a command needs it)::

    seed: 0
    threads: 1
    arms:                       # list; each entry is either
      - {mean: 1, variance: 4}  #   a pair (symmetric two-point law), or
      - distribution: {type: two_point, lo: -1, hi: 1, p_hi: 1/2}
        mean: 0                 #   a distribution, with optional moment
        variance: 1             #   overrides checked to 1e-12
    utility: {kind: mean_semivariance, alpha: 1, delta: 0, phi: "-exp(-x)"}
    grid: {cells: 200, frame: centered, epsilon: 0, boundary_policy:
           one_sided_upwind, smoothing_width: null,
           stability_factor: 0.45, x_scheme: common_viscosity, csv: null}
    simulation: {strategy: {type: sign_switch}, horizon: [10, 100],
                 paths: 10000, antithetic: false, block_size: 8192,
                 trajectory_csv: null}
    dp: {horizon: 8}
    thresholds: {mu1: 1, mu2: 0, sigma1: 2, sigma2: 1}
    obm: {sigma_pos: 2, sigma_neg: 1, t: 1, steps: 4000, paths: 0,
          alpha: 1, mu1: 1, mu2: 0}
    output: {format: table, path: null}

Numbers may be written as fractions in quotes (``"1/3"``), which keeps the
exact DP rational.
"""

from __future__ import annotations

import copy
from fractions import Fraction
from typing import Any

import yaml

from .arms import Arm, ArmSet, compute_bounds
from .distributions import _num, _plain, distribution_from_spec
from .exceptions import ConfigError, InvalidInputError
from .utility import UtilityIndex, utility_from_spec

SCHEMA_VERSION = 1

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "threads": 1,
    "output": {"format": "table", "path": None},
}


def load_config(path: str | None) -> dict[str, Any]:
    cfg = copy.deepcopy(DEFAULTS)
    if path is None:
        return cfg
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return merge(cfg, data)


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; ``override`` wins, ``None`` values are skipped."""
    out = copy.deepcopy(base)
    for key, val in override.items():
        if val is None:
            continue
        if isinstance(val, dict):
            base_val = out.get(key)
            out[key] = merge(base_val if isinstance(base_val, dict) else {}, val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def arm_from_spec(k: int, spec: dict) -> Arm:
    if not isinstance(spec, dict):
        raise ConfigError(f"arm {k}: expected a mapping, got {spec!r}")
    try:
        mean = _num(spec["mean"]) if "mean" in spec else None
        var = _num(spec["variance"]) if "variance" in spec else None
        if "distribution" in spec:
            return Arm.from_distribution(k, distribution_from_spec(spec["distribution"]), mean, var)
        if mean is None or var is None:
            raise ConfigError(f"arm {k}: give a distribution or both mean and variance")
        return Arm.from_pair(k, mean, var)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc


def arms_from_config(cfg: dict) -> ArmSet:
    specs = cfg.get("arms")
    if not specs:
        raise ConfigError("config has no arms")
    return compute_bounds([arm_from_spec(k, s) for k, s in enumerate(specs)])


def utility_from_config(cfg: dict) -> UtilityIndex:
    spec = cfg.get("utility")
    if not spec:
        raise ConfigError("config has no utility block")
    spec = dict(spec)
    if "alpha" in spec and isinstance(spec["alpha"], str):
        spec["alpha"] = float(Fraction(spec["alpha"]))
    return utility_from_spec(spec)


def parse_arm_flag(text: str) -> dict:
    """``"MEAN,VARIANCE"`` from ``--arm`` into an arm spec."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"--arm expects MEAN,VARIANCE, got {text!r}")
    return {"mean": _to_config_number(parts[0]), "variance": _to_config_number(parts[1])}


def _to_config_number(s: str):
    # integers and "p/q" stay exact; decimals become floats
    try:
        if "/" in s:
            Fraction(s)
            return s
        f = float(s)
    except ValueError as exc:
        raise ConfigError(f"cannot parse number {s!r}") from exc
    return int(f) if f.is_integer() and "." not in s and "e" not in s.lower() else f


def plain(obj):
    """Config or result value made JSON/YAML friendly."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, Fraction):
        return _plain(obj)
    if hasattr(obj, "item") and callable(obj.item):
        return obj.item()
    return obj
