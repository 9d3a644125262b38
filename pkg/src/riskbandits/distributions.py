"""Payoff distributions with exact analytic moments.

Every family exposes its mean and variance computed from the parameters (so
``fractions.Fraction`` inputs give exact rational moments), a vectorised
sampler, an inverse CDF, and an exact sampler for the sum of ``count`` i.i.d.
draws. Finite-support families also expose ``support()`` for the exact
dynamic program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from numbers import Real
from typing import Any

import numpy as np
from scipy.special import ndtri

from .exceptions import InvalidInputError

PROB_TOL = 1e-12

# Largest block of uniforms drawn at once when summing Uniform payoffs.
_SUM_CHUNK = 2_000_000


def _check_finite(name: str, value: Real) -> None:
    if not math.isfinite(float(value)):
        raise InvalidInputError(f"{name} must be finite, got {value!r}")


class PayoffDistribution:
    """Interface shared by the payoff families."""

    kind: str = ""

    @property
    def mean(self):
        raise NotImplementedError

    @property
    def variance(self):
        raise NotImplementedError

    def support(self) -> tuple[tuple, tuple] | None:
        """``(values, probs)`` for finite-support families, else ``None``."""
        return None

    def ppf(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int | tuple = ()) -> np.ndarray:
        return self.ppf(rng.random(size))

    def sample_sum(self, rng: np.random.Generator, count: int, size: int) -> np.ndarray:
        """Draw ``size`` realisations of the sum of ``count`` i.i.d. payoffs."""
        raise NotImplementedError

    def to_spec(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(PayoffDistribution):
    c: Real
    kind = "constant"

    def __post_init__(self):
        _check_finite("c", self.c)

    @property
    def mean(self):
        return self.c

    @property
    def variance(self):
        return 0 * self.c

    def support(self):
        return (self.c,), (1,)

    def ppf(self, u):
        return np.full(np.shape(u), float(self.c))

    def sample_sum(self, rng, count, size):
        return np.full(size, float(self.c) * count)

    def to_spec(self):
        return {"type": "constant", "c": _plain(self.c)}


@dataclass(frozen=True)
class TwoPoint(PayoffDistribution):
    """``hi`` with probability ``p_hi``, otherwise ``lo``."""

    lo: Real
    hi: Real
    p_hi: Real
    kind = "two_point"

    def __post_init__(self):
        for name in ("lo", "hi", "p_hi"):
            _check_finite(name, getattr(self, name))
        if not 0 <= self.p_hi <= 1:
            raise InvalidInputError(f"p_hi must lie in [0, 1], got {self.p_hi!r}")
        if self.lo > self.hi:
            raise InvalidInputError("TwoPoint requires lo <= hi")

    @classmethod
    def symmetric(cls, mean: Real, variance: Real) -> "TwoPoint":
        """Equal-probability two-point law with the given mean and variance."""
        sd = _exact_sqrt(variance)
        half = Fraction(1, 2) if isinstance(mean, (int, Fraction)) and isinstance(sd, (int, Fraction)) else 0.5
        return cls(mean - sd, mean + sd, half)

    @property
    def mean(self):
        return self.lo + (self.hi - self.lo) * self.p_hi

    @property
    def variance(self):
        return (self.hi - self.lo) ** 2 * self.p_hi * (1 - self.p_hi)

    def support(self):
        return (self.lo, self.hi), (1 - self.p_hi, self.p_hi)

    @cached_property
    def _floats(self):
        return float(self.lo), float(self.hi), float(self.p_hi)

    def ppf(self, u):
        # u in [0, 1): hi when u < p_hi, matching the usual Bernoulli draw
        lo, hi, p = self._floats
        return np.where(np.asarray(u) < p, hi, lo)

    def sample_sum(self, rng, count, size):
        k = rng.binomial(count, float(self.p_hi), size=size)
        return float(self.lo) * count + (float(self.hi) - float(self.lo)) * k

    def to_spec(self):
        return {"type": "two_point", "lo": _plain(self.lo), "hi": _plain(self.hi), "p_hi": _plain(self.p_hi)}


@dataclass(frozen=True)
class DiscreteFinite(PayoffDistribution):
    values: tuple
    probs: tuple
    kind = "discrete"

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "probs", tuple(self.probs))
        if len(self.values) == 0 or len(self.values) != len(self.probs):
            raise InvalidInputError("values and probs must be non-empty and of equal length")
        for v in self.values:
            _check_finite("value", v)
        if any(p < 0 for p in self.probs):
            raise InvalidInputError("probabilities must be non-negative")
        total = sum(self.probs)
        if abs(total - 1) > PROB_TOL:
            raise InvalidInputError(f"probabilities sum to {total}, not 1 (tolerance {PROB_TOL})")

    @property
    def mean(self):
        return sum(v * p for v, p in zip(self.values, self.probs))

    @property
    def variance(self):
        m = self.mean
        return sum((v - m) ** 2 * p for v, p in zip(self.values, self.probs))

    def support(self):
        return self.values, self.probs

    def _sorted(self):
        order = np.argsort(np.asarray(self.values, dtype=float), kind="stable")
        vals = np.asarray(self.values, dtype=float)[order]
        cum = np.cumsum(np.asarray(self.probs, dtype=float)[order])
        cum[-1] = 1.0
        return vals, cum

    def ppf(self, u):
        vals, cum = self._sorted()
        idx = np.searchsorted(cum, np.asarray(u), side="right")
        return vals[np.minimum(idx, len(vals) - 1)]

    def sample_sum(self, rng, count, size):
        p = np.asarray(self.probs, dtype=float)
        counts = rng.multinomial(count, p / p.sum(), size=size)
        return counts @ np.asarray(self.values, dtype=float)

    def to_spec(self):
        return {"type": "discrete", "values": [_plain(v) for v in self.values],
                "probs": [_plain(p) for p in self.probs]}


@dataclass(frozen=True)
class Normal(PayoffDistribution):
    mu: Real
    sigma2: Real
    kind = "normal"

    def __post_init__(self):
        _check_finite("mu", self.mu)
        _check_finite("sigma2", self.sigma2)
        if self.sigma2 < 0:
            raise InvalidInputError("sigma2 must be non-negative")

    @property
    def mean(self):
        return self.mu

    @property
    def variance(self):
        return self.sigma2

    def ppf(self, u):
        return float(self.mu) + math.sqrt(float(self.sigma2)) * ndtri(np.asarray(u))

    def sample(self, rng, size=()):
        return float(self.mu) + math.sqrt(float(self.sigma2)) * rng.standard_normal(size)

    def sample_sum(self, rng, count, size):
        return count * float(self.mu) + math.sqrt(count * float(self.sigma2)) * rng.standard_normal(size)

    def to_spec(self):
        return {"type": "normal", "mu": _plain(self.mu), "sigma2": _plain(self.sigma2)}


@dataclass(frozen=True)
class Uniform(PayoffDistribution):
    a: Real
    b: Real
    kind = "uniform"

    def __post_init__(self):
        _check_finite("a", self.a)
        _check_finite("b", self.b)
        if self.a > self.b:
            raise InvalidInputError("Uniform requires a <= b")

    @property
    def mean(self):
        return (self.a + self.b) / 2

    @property
    def variance(self):
        return (self.b - self.a) ** 2 / 12

    def ppf(self, u):
        return float(self.a) + (float(self.b) - float(self.a)) * np.asarray(u)

    def sample_sum(self, rng, count, size):
        # no closed-form sampler for the Irwin-Hall law; sum in row chunks
        total = np.zeros(size)
        rows = max(1, _SUM_CHUNK // max(size, 1))
        done = 0
        while done < count:
            r = min(rows, count - done)
            total += rng.random((r, size)).sum(axis=0)
            done += r
        return float(self.a) * count + (float(self.b) - float(self.a)) * total

    def to_spec(self):
        return {"type": "uniform", "a": _plain(self.a), "b": _plain(self.b)}


_FAMILIES = {
    "constant": lambda s: Constant(_num(s["c"])),
    "two_point": lambda s: TwoPoint(_num(s["lo"]), _num(s["hi"]), _num(s["p_hi"])),
    "bernoulli": lambda s: TwoPoint(0, 1, _num(s["p"])),
    "discrete": lambda s: DiscreteFinite(tuple(_num(v) for v in s["values"]),
                                         tuple(_num(p) for p in s["probs"])),
    "normal": lambda s: Normal(_num(s["mu"]), _num(s["sigma2"])),
    "uniform": lambda s: Uniform(_num(s["a"]), _num(s["b"])),
}


def distribution_from_spec(spec: dict[str, Any]) -> PayoffDistribution:
    """Build a distribution from a config mapping such as
    ``{"type": "two_point", "lo": -1, "hi": 3, "p_hi": 0.5}``.

    Numeric strings like ``"1/3"`` are parsed as exact fractions.
    """
    try:
        family = _FAMILIES[spec["type"]]
    except KeyError as exc:
        raise InvalidInputError(f"unknown or missing distribution type in {spec!r}") from exc
    try:
        return family(spec)
    except KeyError as exc:
        raise InvalidInputError(f"distribution spec {spec!r} is missing field {exc}") from exc


def _num(value):
    if isinstance(value, str):
        try:
            return Fraction(value)
        except ValueError as exc:
            raise InvalidInputError(f"cannot parse number {value!r}") from exc
    if isinstance(value, bool) or not isinstance(value, Real):
        raise InvalidInputError(f"expected a number, got {value!r}")
    return value


def _plain(value):
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else int(value)
    return value


def _exact_sqrt(value):
    if isinstance(value, (int, Fraction)) and value >= 0:
        f = Fraction(value)
        rn, rd = math.isqrt(f.numerator), math.isqrt(f.denominator)
        if rn * rn == f.numerator and rd * rd == f.denominator:
            return Fraction(rn, rd)
    if value < 0:
        raise InvalidInputError("variance must be non-negative")
    return math.sqrt(float(value))
