"""Oscillating Brownian motion ``dW = sigma(W) dB`` with
``sigma = sigma_pos`` on ``{W >= 0}`` and ``sigma_neg`` on ``{W < 0}``.

Its time-``t`` law (Keilson and Wellner) is piecewise Gaussian:

    q(t, y) = 2 sigma_neg / (sigma_pos + sigma_neg) * N(0, sigma_pos^2 t)(y),  y >= 0
    q(t, y) = 2 sigma_pos / (sigma_pos + sigma_neg) * N(0, sigma_neg^2 t)(y),  y < 0

so ``P(W_t >= 0) = sigma_neg / (sigma_pos + sigma_neg)`` for every ``t``.
Switching to the riskier arm while the deviation is non-negative drives
the scaled deviation as this process; that gives the closed-form
semivariance value below.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .arms import threshold_values
from .exceptions import ConfigError, InvalidInputError
from .simulate import DEFAULT_BLOCK, block_rng


@dataclass(frozen=True)
class ObmParams:
    sigma_pos: float
    sigma_neg: float

    def __post_init__(self):
        for name in ("sigma_pos", "sigma_neg"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidInputError(f"{name} must be a positive finite number, got {v}")

    def mirrored(self) -> "ObmParams":
        """Swap the roles of the two volatilities."""
        return ObmParams(self.sigma_neg, self.sigma_pos)

    @property
    def p_nonneg(self) -> float:
        """Stationary-in-time ``P(W_t >= 0)``."""
        return self.sigma_neg / (self.sigma_pos + self.sigma_neg)


def _check_t(t: float) -> None:
    if not t > 0:
        raise InvalidInputError(f"t must be > 0, got {t}")


def obm_density(params: ObmParams, t: float, y):
    """Keilson-Wellner density ``q(t, y)``; vectorised in ``y``."""
    _check_t(t)
    sp, sn = params.sigma_pos, params.sigma_neg
    y = np.asarray(y, dtype=float)
    pos = norm.pdf(y, scale=sp * math.sqrt(t)) * (2 * sn / (sp + sn))
    neg = norm.pdf(y, scale=sn * math.sqrt(t)) * (2 * sp / (sp + sn))
    out = np.where(y >= 0, pos, neg)
    return float(out) if out.ndim == 0 else out


def obm_cdf(params: ObmParams, t: float, y):
    """``P(W_t <= y)``."""
    _check_t(t)
    sp, sn = params.sigma_pos, params.sigma_neg
    y = np.asarray(y, dtype=float)
    st = math.sqrt(t)
    lower = (2 * sp / (sp + sn)) * norm.cdf(y / (sn * st))
    upper = sp / (sp + sn) + (2 * sn / (sp + sn)) * (norm.cdf(y / (sp * st)) - 0.5)
    out = np.where(y < 0, lower, upper)
    return float(out) if out.ndim == 0 else out


def negative_second_moment(params: ObmParams, t: float = 1.0) -> float:
    """``E[W_t^2 1{W_t < 0}] = sigma_pos sigma_neg^2 t / (sigma_pos + sigma_neg)``."""
    _check_t(t)
    sp, sn = params.sigma_pos, params.sigma_neg
    return sp * sn * sn * t / (sp + sn)


def switch_value_semivariance(mu1: float, mu2: float, sigma1: float, sigma2: float, alpha: float) -> float:
    """Limit value of the sign-switch control under ``x - alpha y^2 1{y<0}``.

    Arm 1 (mean ``mu1``, sd ``sigma1``) is played while the deviation is
    non-negative, arm 2 otherwise.
    """
    threshold_values(mu1, mu2, sigma1, sigma2)
    s = sigma1 + sigma2
    return mu1 * sigma2 / s + mu2 * sigma1 / s - alpha * sigma1 * sigma2 ** 2 / s


def shortfall_switch_bound(mu1: float, mu2: float, sigma1: float, sigma2: float) -> float:
    """Shortfall level above which specialising in arm 1 is not optimal.

    The mirrored control (arm 2 on ``{y >= 0}``) produces it.
    """
    return threshold_values(mu1, mu2, sigma1, sigma2).alpha_low_prime


@dataclass(frozen=True)
class ObmStatistics:
    p_nonneg: float
    p_nonneg_se: float
    neg_second_moment: float
    neg_second_moment_se: float
    paths: int
    steps: int
    terminal: np.ndarray | None = None

    def to_record(self) -> dict:
        return {"p_nonneg": self.p_nonneg, "p_nonneg_se": self.p_nonneg_se,
                "neg_second_moment": self.neg_second_moment,
                "neg_second_moment_se": self.neg_second_moment_se,
                "paths": self.paths, "steps": self.steps}


def _euler_block(params: ObmParams, t: float, steps: int, seed: int, block: int, width: int, full: int):
    rng = block_rng(seed, block)
    sq = math.sqrt(t / steps)
    w = np.zeros(full)
    rows = max(1, (1 << 20) // full)
    done = 0
    while done < steps:
        r = min(rows, steps - done)
        z = rng.standard_normal((r, full))
        for row in z:
            # volatility at the left endpoint; W = 0 counts as non-negative
            w += np.where(w >= 0, params.sigma_pos, params.sigma_neg) * sq * row
        done += r
    return w[:width]


def simulate_obm(params: ObmParams, t: float = 1.0, steps: int = 4000, paths: int = 100_000,
                 seed: int = 0, threads: int = 1, block_size: int = DEFAULT_BLOCK,
                 keep_terminal: bool = False) -> ObmStatistics:
    """Euler-Maruyama estimates of ``P(W_t >= 0)`` and ``E[W_t^2 1{W_t<0}]``."""
    _check_t(t)
    if steps < 100:
        raise ConfigError("simulate_obm needs at least 100 steps")
    if paths < 2:
        raise ConfigError("simulate_obm needs at least 2 paths")
    full, rest = divmod(paths, block_size)
    jobs = [(b, block_size) for b in range(full)] + ([(full, rest)] if rest else [])

    def run(job):
        return _euler_block(params, t, steps, seed, job[0], job[1], block_size)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    w = np.concatenate(parts)
    ind = (w >= 0).astype(float)
    neg2 = np.where(w < 0, w * w, 0.0)
    n = len(w)
    return ObmStatistics(float(ind.mean()), float(ind.std(ddof=1) / math.sqrt(n)),
                         float(neg2.mean()), float(neg2.std(ddof=1) / math.sqrt(n)),
                         n, steps, w if keep_terminal else None)


def kolmogorov_distance(params: ObmParams, t: float, samples: np.ndarray, quantiles=None) -> float:
    """Largest gap between the empirical CDF and ``obm_cdf`` at given levels
    (default: the nine deciles of the exact law)."""
    samples = np.sort(np.asarray(samples, dtype=float))
    if quantiles is None:
        probs = np.arange(1, 10) / 10
        quantiles = [obm_quantile(params, t, p) for p in probs]
    q = np.asarray(quantiles, dtype=float)
    emp = np.searchsorted(samples, q, side="right") / len(samples)
    return float(np.max(np.abs(emp - obm_cdf(params, t, q))))


def obm_quantile(params: ObmParams, t: float, p: float) -> float:
    """Inverse of ``obm_cdf``."""
    _check_t(t)
    if not 0 < p < 1:
        raise InvalidInputError("p must lie in (0, 1)")
    sp, sn = params.sigma_pos, params.sigma_neg
    st = math.sqrt(t)
    p0 = sp / (sp + sn)
    if p < p0:
        return float(sn * st * norm.ppf(p * (sp + sn) / (2 * sp)))
    return float(sp * st * norm.ppf(0.5 + (p - p0) * (sp + sn) / (2 * sn)))
