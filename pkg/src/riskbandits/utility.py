"""Two-attribute utility indices ``u(x, y)`` and their evaluation.

``x`` is the sample-average payoff and ``y`` the sqrt(n)-scaled cumulative
deviation from conditional means. Five built-in families are provided:

=================  ======================================
ADDITIVE           ``phi(x) + alpha * y``
BLEND              ``phi((1 - alpha) * x + alpha * y)``
MEAN_VARIANCE      ``x - alpha * y**2``
MEAN_SEMIVARIANCE  ``x - alpha * y**2 * 1{y < 0}``
SHORTFALL          ``x - alpha * 1{y < 0}``
=================  ======================================

plus CUSTOM for an arbitrary vectorised callable.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .arms import Arm, threshold_values
from .exceptions import ConfigError, InvalidInputError, NumericalError

_SQRT2PI = math.sqrt(2 * math.pi)


class UtilityKind(str, enum.Enum):
    ADDITIVE = "additive"
    BLEND = "blend"
    MEAN_VARIANCE = "mean_variance"
    MEAN_SEMIVARIANCE = "mean_semivariance"
    SHORTFALL = "shortfall"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Phi:
    """A scalar function with optional derivatives and metadata.

    ``risk_aversion`` is the constant ``-phi''/phi'`` when it exists;
    ``growth`` is ``(c, g)`` with ``|phi(z)| <= c (1 + |z|**(g - 1))``.
    Callables must be pure: they may be invoked concurrently.
    """

    name: str
    f: Callable
    df: Callable | None = None
    d2f: Callable | None = None
    risk_aversion: float | None = None
    increasing: bool = False
    growth: tuple[float, float] | None = None

    def __call__(self, z):
        return self.f(z)


def identity() -> Phi:
    return Phi("identity", lambda z: np.asarray(z, dtype=float) * 1.0,
               lambda z: np.ones_like(np.asarray(z, dtype=float)),
               lambda z: np.zeros_like(np.asarray(z, dtype=float)),
               risk_aversion=0.0, increasing=True, growth=(1.0, 2.0))


def neg_exp() -> Phi:
    """CARA index ``-exp(-z)``: increasing, concave, ``-phi''/phi' = 1``."""
    return Phi("-exp(-x)", lambda z: -np.exp(-np.asarray(z, dtype=float)),
               lambda z: np.exp(-np.asarray(z, dtype=float)),
               lambda z: -np.exp(-np.asarray(z, dtype=float)),
               risk_aversion=1.0, increasing=True)


def exp_neg() -> Phi:
    return Phi("exp(-x)", lambda z: np.exp(-np.asarray(z, dtype=float)),
               lambda z: -np.exp(-np.asarray(z, dtype=float)),
               lambda z: np.exp(-np.asarray(z, dtype=float)))


def neg_quadratic_around(c: float) -> Phi:
    """``-(z - c)**2``: a target at ``c``."""
    return Phi(f"neg-quadratic-around({c:g})",
               lambda z: -(np.asarray(z, dtype=float) - c) ** 2,
               lambda z: -2.0 * (np.asarray(z, dtype=float) - c),
               lambda z: np.full(np.shape(z), -2.0),
               growth=(max(2.0, 2.0 * c * c), 3.0))


def polynomial(coefficients: Sequence[float]) -> Phi:
    """``sum_i a_i z**i`` with ``coefficients = [a0, a1, ...]``."""
    coef = np.asarray(coefficients, dtype=float)
    if coef.ndim != 1 or coef.size == 0:
        raise ConfigError("polynomial phi needs a non-empty coefficient list")
    p = np.polynomial.Polynomial(coef)
    dp, d2p = p.deriv(1), p.deriv(2)
    return Phi(f"poly{list(coef)}", lambda z: p(np.asarray(z, dtype=float)),
               lambda z: dp(np.asarray(z, dtype=float)),
               lambda z: d2p(np.asarray(z, dtype=float)) * np.ones(np.shape(z)),
               growth=(float(np.abs(coef).sum()), float(coef.size)))


_NEG_QUAD = re.compile(r"^neg-quadratic-around\(\s*([-+0-9.eE]+)\s*\)$")


def phi_from_spec(spec: Any) -> Phi:
    """Named built-in (``"identity"``, ``"exp(-x)"``, ``"-exp(-x)"``,
    ``"neg-quadratic-around(c)"``) or polynomial coefficients."""
    if isinstance(spec, Phi):
        return spec
    if isinstance(spec, dict) and "poly" in spec:
        return polynomial(spec["poly"])
    if isinstance(spec, (list, tuple)):
        return polynomial(spec)
    if isinstance(spec, str):
        name = spec.strip()
        if name == "identity":
            return identity()
        if name in ("-exp(-x)", "neg-exp"):
            return neg_exp()
        if name == "exp(-x)":
            return exp_neg()
        m = _NEG_QUAD.match(name)
        if m:
            return neg_quadratic_around(float(m.group(1)))
    raise ConfigError(f"unknown phi specification {spec!r}")


@dataclass(frozen=True)
class UtilityIndex:
    """An evaluable index ``u(x, y)``; see the module docstring for kinds.

    ``delta`` replaces the shortfall indicator ``1{y < 0}`` by the ramp
    ``clip(-y / delta, 0, 1)`` when positive. ``func`` is the callable of a
    CUSTOM index; ``y_kinks`` lists ``y`` locations where ``u`` is not
    smooth (used to split quadrature).
    """

    kind: UtilityKind
    alpha: float = 0.0
    phi: Phi | None = None
    delta: float = 0.0
    func: Callable | None = None
    name: str = ""
    growth: tuple[float, float] | None = None
    y_kinks: tuple[float, ...] = ()
    smooth: bool = True

    def __post_init__(self):
        kind = UtilityKind(self.kind)
        object.__setattr__(self, "kind", kind)
        a = self.alpha
        if not math.isfinite(a):
            raise ConfigError("alpha must be finite")
        if kind in (UtilityKind.ADDITIVE, UtilityKind.BLEND) and self.phi is None:
            raise ConfigError(f"{kind.value} utility needs phi")
        if kind is UtilityKind.BLEND and not 0 < a <= 1:
            raise ConfigError(f"blend utility needs 0 < alpha <= 1, got {a}")
        if kind in (UtilityKind.MEAN_VARIANCE, UtilityKind.MEAN_SEMIVARIANCE, UtilityKind.SHORTFALL) and a <= 0:
            raise ConfigError(f"{kind.value} utility needs alpha > 0, got {a}")
        if self.delta < 0:
            raise ConfigError("smoothing width delta must be >= 0")

    # constructors -----------------------------------------------------
    @classmethod
    def additive(cls, phi: Phi | str, alpha: float = 0.0) -> "UtilityIndex":
        return cls(UtilityKind.ADDITIVE, alpha, phi_from_spec(phi))

    @classmethod
    def blend(cls, phi: Phi | str, alpha: float) -> "UtilityIndex":
        return cls(UtilityKind.BLEND, alpha, phi_from_spec(phi))

    @classmethod
    def mean_variance(cls, alpha: float) -> "UtilityIndex":
        return cls(UtilityKind.MEAN_VARIANCE, alpha)

    @classmethod
    def mean_semivariance(cls, alpha: float) -> "UtilityIndex":
        return cls(UtilityKind.MEAN_SEMIVARIANCE, alpha)

    @classmethod
    def shortfall(cls, alpha: float, delta: float = 0.0) -> "UtilityIndex":
        return cls(UtilityKind.SHORTFALL, alpha, delta=delta)

    @classmethod
    def custom(cls, func: Callable | None, name: str = "custom", growth=None,
               y_kinks: Iterable[float] = (), smooth: bool = True) -> "UtilityIndex":
        return cls(UtilityKind.CUSTOM, func=func, name=name, growth=growth,
                   y_kinks=tuple(y_kinks), smooth=smooth)

    def with_smoothing(self, delta: float) -> "UtilityIndex":
        return replace(self, delta=delta)

    # evaluation -------------------------------------------------------
    def __call__(self, x, y):
        return eval_index(self, x, y)

    @property
    def label(self) -> str:
        if self.kind is UtilityKind.CUSTOM:
            return self.name
        extra = f", phi={self.phi.name}" if self.phi is not None else ""
        extra += f", delta={self.delta:g}" if self.delta else ""
        return f"{self.kind.value}(alpha={self.alpha:g}{extra})"

    @property
    def declared_growth(self) -> tuple[float, float] | None:
        """``(c, g)`` such that ``|u(x,y)| <= c (1 + ||(x,y)||**(g-1))``."""
        a = abs(self.alpha)
        k = self.kind
        if k in (UtilityKind.MEAN_VARIANCE, UtilityKind.MEAN_SEMIVARIANCE):
            return (1.0 + a, 3.0)
        if k is UtilityKind.SHORTFALL:
            return (1.0 + a, 2.0)
        if k is UtilityKind.ADDITIVE and self.phi.growth is not None:
            c, g = self.phi.growth
            return (c + a, max(g, 2.0))
        if k is UtilityKind.BLEND and self.phi.growth is not None:
            return self.phi.growth
        return self.growth

    @property
    def kinks(self) -> tuple[float, ...]:
        k = self.kind
        if k is UtilityKind.MEAN_SEMIVARIANCE:
            return (0.0,)
        if k is UtilityKind.SHORTFALL:
            return (-self.delta, 0.0) if self.delta > 0 else (0.0,)
        return self.y_kinks

    def partial_x(self, x, y):
        """Analytic ``du/dx`` where available, else ``None``."""
        k = self.kind
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if k in (UtilityKind.MEAN_VARIANCE, UtilityKind.MEAN_SEMIVARIANCE, UtilityKind.SHORTFALL):
            return np.ones(np.broadcast(x, y).shape)
        if k is UtilityKind.ADDITIVE and self.phi.df is not None:
            return self.phi.df(x) + 0.0 * y
        if k is UtilityKind.BLEND and self.phi.df is not None:
            return (1 - self.alpha) * self.phi.df((1 - self.alpha) * x + self.alpha * y)
        return None

    def partial_yy(self, x, y):
        """Analytic ``d2u/dy2`` where available, else ``None``."""
        k = self.kind
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if k is UtilityKind.MEAN_VARIANCE:
            return np.full(np.broadcast(x, y).shape, -2.0 * self.alpha)
        if k is UtilityKind.MEAN_SEMIVARIANCE:
            return -2.0 * self.alpha * (y < 0) + 0.0 * x
        if k is UtilityKind.ADDITIVE:
            return np.zeros(np.broadcast(x, y).shape)
        if k is UtilityKind.BLEND and self.phi.d2f is not None:
            return self.alpha ** 2 * self.phi.d2f((1 - self.alpha) * x + self.alpha * y)
        return None

    def risk_ratio_range(self) -> tuple[float, float] | None:
        """Attained ``(inf, sup)`` of ``-u_yy / (2 u_x)`` over the plane, when
        ``u_x > 0`` everywhere and the range is known in closed form."""
        k = self.kind
        if k is UtilityKind.MEAN_VARIANCE:
            return (self.alpha, self.alpha)
        if k is UtilityKind.MEAN_SEMIVARIANCE:
            return (0.0, self.alpha)
        if k is UtilityKind.ADDITIVE and self.phi.increasing:
            return (0.0, 0.0)
        if k is UtilityKind.BLEND and self.phi.increasing and self.phi.risk_aversion is not None and self.alpha < 1:
            r = self.alpha ** 2 * self.phi.risk_aversion / (2 * (1 - self.alpha))
            return (r, r)
        return None

    def to_spec(self) -> dict[str, Any]:
        spec: dict[str, Any] = {"kind": self.kind.value, "alpha": self.alpha}
        if self.phi is not None:
            spec["phi"] = self.phi.name
        if self.delta:
            spec["delta"] = self.delta
        if self.kind is UtilityKind.CUSTOM:
            spec["name"] = self.name
        return spec


def utility_from_spec(spec: dict[str, Any]) -> UtilityIndex:
    """Build a UtilityIndex from ``{kind, alpha, delta, phi}``."""
    try:
        kind = UtilityKind(spec["kind"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"unknown or missing utility kind in {spec!r}") from exc
    if kind is UtilityKind.CUSTOM:
        raise ConfigError("custom utilities cannot be loaded from a config file")
    phi = phi_from_spec(spec["phi"]) if "phi" in spec else None
    return UtilityIndex(kind, float(spec.get("alpha", 0.0)), phi, float(spec.get("delta", 0.0)))


def eval_index(u: UtilityIndex, x, y):
    """Evaluate ``u`` elementwise on broadcast arrays ``x``, ``y``."""
    k = u.kind
    a = u.alpha
    if k is UtilityKind.CUSTOM:
        if u.func is None:
            raise ConfigError("custom utility has no callback")
        return u.func(x, y)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if k is UtilityKind.ADDITIVE:
        return u.phi(x) + a * y
    if k is UtilityKind.BLEND:
        return u.phi((1 - a) * x + a * y)
    if k is UtilityKind.MEAN_VARIANCE:
        return x - a * y * y
    if k is UtilityKind.MEAN_SEMIVARIANCE:
        return x - a * y * y * (y < 0)
    if k is UtilityKind.SHORTFALL:
        return x - a * shortfall_indicator(y, u.delta)
    raise ConfigError(f"unsupported utility kind {k}")  # pragma: no cover


def shortfall_indicator(y, delta: float = 0.0):
    """``1{y < 0}``, or the ramp ``clip(-y/delta, 0, 1)`` when ``delta > 0``."""
    y = np.asarray(y, dtype=float)
    if delta > 0:
        return np.clip(-y / delta, 0.0, 1.0)
    return (y < 0).astype(float)


@dataclass(frozen=True)
class TrajectoryStatistics:
    """Per-path statistics entering ``U_n``; fields may be arrays over paths.

    ``sample_mean`` is ``S_n / n`` and ``scaled_deviation`` is the sum of
    ``Z_i - mu_{arm_i}`` divided by ``sqrt(n)``.
    """

    sample_mean: Any
    scaled_deviation: Any
    n: int


def finite_horizon_utility(u: UtilityIndex, stats) -> float:
    """Monte Carlo estimate of ``U_n``: the average of ``u`` over paths.

    ``stats`` is one TrajectoryStatistics with array fields or an iterable
    of them; all must share the same horizon.
    """
    if isinstance(stats, TrajectoryStatistics):
        stats = [stats]
    stats = list(stats)
    if not stats:
        raise InvalidInputError("finite_horizon_utility needs at least one trajectory")
    horizons = {s.n for s in stats}
    if len(horizons) != 1:
        raise InvalidInputError(f"trajectories have mixed horizons {sorted(horizons)}")
    xs = np.concatenate([np.atleast_1d(np.asarray(s.sample_mean, dtype=float)) for s in stats])
    ys = np.concatenate([np.atleast_1d(np.asarray(s.scaled_deviation, dtype=float)) for s in stats])
    return float(np.mean(eval_index(u, xs, ys)))


def _ramp_expectation(sd: float, delta: float) -> float:
    """``E[clip(-Y/delta, 0, 1)]`` for ``Y ~ N(0, sd**2)``."""
    r = delta / sd
    return norm.cdf(-r) + (norm.pdf(0.0) - norm.pdf(r)) / r


def gaussian_expectation(f: Callable, sd: float, order: int = 64, breakpoints: Sequence[float] = ()) -> float:
    """``E[f(sd * Z)]`` for standard normal ``Z``.

    Gauss-Hermite with ``order`` nodes when ``f`` is smooth; with
    ``breakpoints`` the line is split there and each piece is integrated
    adaptively, since polynomial rules converge slowly across kinks.
    """
    if order < 1:
        raise InvalidInputError("quadrature order must be >= 1")
    if sd == 0:
        return float(f(np.zeros(1))[0])
    if not breakpoints:
        nodes, weights = np.polynomial.hermite.hermgauss(order)
        vals = np.asarray(f(math.sqrt(2.0) * sd * nodes), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise NumericalError(f"utility is non-finite at {np.sum(~np.isfinite(vals))} quadrature nodes")
        return float(weights @ vals / math.sqrt(math.pi))

    def integrand(y):
        return float(np.asarray(f(np.array([y])), dtype=float)[0]) * math.exp(-0.5 * (y / sd) ** 2) / (sd * _SQRT2PI)

    cuts = sorted(set(float(b) for b in breakpoints))
    edges = [-np.inf] + cuts + [np.inf]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
        total += val
    if not math.isfinite(total):
        raise NumericalError("quadrature of the utility diverged")
    return total


def single_arm_limit(u: UtilityIndex, mu: float, sigma2: float, quadrature_order: int = 64,
                     method: str = "auto") -> float:
    """Large-horizon utility of playing one arm forever: ``E u(mu, sigma Z)``.

    ``method="auto"`` uses closed forms where they exist (mean-variance,
    semivariance, shortfall, additive); ``"quadrature"`` forces numerical
    integration. With zero variance the shortfall index returns ``mu``:
    the deviation is identically 0 and the indicator uses strict ``y < 0``.
    """
    if sigma2 < 0:
        raise InvalidInputError("sigma2 must be >= 0")
    if quadrature_order < 1:
        raise InvalidInputError("quadrature order must be >= 1")
    if method not in ("auto", "quadrature"):
        raise InvalidInputError(f"unknown method {method!r}")
    mu, sigma2 = float(mu), float(sigma2)
    if sigma2 == 0:
        return float(np.asarray(eval_index(u, mu, 0.0)).reshape(-1)[0])
    sd = math.sqrt(sigma2)
    k, a = u.kind, u.alpha
    if method == "auto":
        if k is UtilityKind.MEAN_VARIANCE:
            return mu - a * sigma2
        if k is UtilityKind.MEAN_SEMIVARIANCE:
            return mu - a * sigma2 / 2
        if k is UtilityKind.SHORTFALL:
            return mu - a * (0.5 if u.delta == 0 else _ramp_expectation(sd, u.delta))
        if k is UtilityKind.ADDITIVE:
            return float(u.phi(mu))
    return gaussian_expectation(lambda y: eval_index(u, np.full(np.shape(y), mu), y), sd,
                                quadrature_order, u.kinks)


class Verdict(str, enum.Enum):
    YES = "yes"
    NO = "no"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class SpecializationCertificate:
    """Outcome of checking ``u_x (mu1-mu2) + u_yy (s1^2-s2^2) / 2 >= 0``.

    ``holds_for_arm1`` reports that inequality over the whole plane (YES only
    with a closed-form argument, NO with a ``witness`` where it fails);
    ``holds_for_arm2`` reports the reversed inequality.
    """

    holds_for_arm1: Verdict
    holds_for_arm2: Verdict
    witness: tuple[float, float] | None
    ratio_bound: float
    exchange_rate: float
    witness_arm2: tuple[float, float] | None = None

    @property
    def optimal_arms(self) -> tuple[int, ...]:
        out = []
        if self.holds_for_arm1 is Verdict.YES:
            out.append(1)
        if self.holds_for_arm2 is Verdict.YES:
            out.append(2)
        return tuple(out)


def _fd_step(v):
    return 1e-4 * (1.0 + np.abs(v))


def _numeric_derivatives(u: UtilityIndex, X, Y):
    ux = u.partial_x(X, Y)
    uyy = u.partial_yy(X, Y)
    if ux is None:
        h = _fd_step(X)
        ux = (eval_index(u, X + h, Y) - eval_index(u, X - h, Y)) / (2 * h)
    if uyy is None:
        h = _fd_step(Y)
        uyy = (eval_index(u, X, Y + h) - 2 * eval_index(u, X, Y) + eval_index(u, X, Y - h)) / (h * h)
    return np.asarray(ux, dtype=float), np.asarray(uyy, dtype=float)


def specialization_certificate(u: UtilityIndex, arm1: Arm, arm2: Arm,
                               probe_grid: tuple = ((-10.0, 10.0), (-10.0, 10.0)),
                               resolution: int = 201) -> SpecializationCertificate:
    """Decide whether always playing arm 1 (or arm 2) is asymptotically optimal.

    Closed-form decisions are used when the local risk-aversion ratio
    ``-u_yy / (2 u_x)`` has a known range; otherwise the condition is probed
    on a grid, which can only refute it.
    """
    t = threshold_values(float(arm1.mean), float(arm2.mean), arm1.sd, arm2.sd)
    rate = t.ratio
    dmu = float(arm1.mean) - float(arm2.mean)
    dvar = float(arm1.variance) - float(arm2.variance)

    known = u.risk_ratio_range()
    if known is not None:
        lo, hi = known
        w = (0.0, 0.0)
        arm1_ok = Verdict.YES if hi <= rate else Verdict.NO
        arm2_ok = Verdict.YES if lo >= rate else Verdict.NO
        if u.kind is UtilityKind.MEAN_SEMIVARIANCE:
            w1, w2 = (0.0, -1.0), (0.0, 1.0)
        else:
            w1 = w2 = w
        return SpecializationCertificate(arm1_ok, arm2_ok, None if arm1_ok is Verdict.YES else w1,
                                         hi, rate, None if arm2_ok is Verdict.YES else w2)

    (x0, x1), (y0, y1) = probe_grid
    X, Y = np.meshgrid(np.linspace(x0, x1, resolution), np.linspace(y0, y1, resolution), indexing="ij")
    ux, uyy = _numeric_derivatives(u, X, Y)
    cond = ux * dmu + 0.5 * uyy * dvar
    if not np.all(np.isfinite(cond)):
        raise NumericalError("non-finite derivatives on the probe grid")
    witness1 = witness2 = None
    arm1_ok = arm2_ok = Verdict.INCONCLUSIVE
    if cond.min() < 0:
        i = np.unravel_index(np.argmin(cond), cond.shape)
        witness1, arm1_ok = (float(X[i]), float(Y[i])), Verdict.NO
    if cond.max() > 0:
        i = np.unravel_index(np.argmax(cond), cond.shape)
        witness2, arm2_ok = (float(X[i]), float(Y[i])), Verdict.NO
    pos = ux > 0
    ratio = float(np.max(-0.5 * uyy[pos] / ux[pos])) if pos.any() else float("nan")
    return SpecializationCertificate(arm1_ok, arm2_ok, witness1, ratio, rate, witness2)
