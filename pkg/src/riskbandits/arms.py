"""Arms, their mean-variance summary, and the geometry built on it.

An arm is identified with its pair ``(mean, variance)``; the payoff
distribution is kept alongside for simulation. This module computes the
bounds of the pairs, the extreme points of their convex hull, the HJB
driver ``G(p, q) = max_k mu_k p + sigma_k^2 q / 2``, and the two-arm
risk/reward thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Iterable, Sequence

import numpy as np

from .distributions import Constant, PayoffDistribution, TwoPoint, _exact_sqrt
from .exceptions import InvalidInputError

MOMENT_TOL = 1e-12
HULL_TOL = 1e-12


@dataclass(frozen=True)
class Arm:
    """One arm: index, payoff law, and its exact mean and variance."""

    id: int
    distribution: PayoffDistribution
    mean: Real
    variance: Real

    def __post_init__(self):
        if not math.isfinite(float(self.mean)):
            raise InvalidInputError(f"arm {self.id}: mean must be finite")
        if not math.isfinite(float(self.variance)) or self.variance < 0:
            raise InvalidInputError(f"arm {self.id}: variance must be finite and >= 0")

    @classmethod
    def from_distribution(cls, id: int, distribution: PayoffDistribution,
                          mean: Real | None = None, variance: Real | None = None) -> "Arm":
        """Arm whose moments come from ``distribution``.

        ``mean``/``variance`` overrides are accepted only when they agree with
        the analytic values to within 1e-12.
        """
        m, v = distribution.mean, distribution.variance
        if mean is not None and abs(float(mean) - float(m)) > MOMENT_TOL:
            raise InvalidInputError(f"arm {id}: declared mean {mean} != analytic mean {m}")
        if variance is not None and abs(float(variance) - float(v)) > MOMENT_TOL:
            raise InvalidInputError(f"arm {id}: declared variance {variance} != analytic variance {v}")
        return cls(id, distribution, m, v)

    @classmethod
    def from_pair(cls, id: int, mean: Real, variance: Real) -> "Arm":
        """Arm given only by its pair, realised as a symmetric two-point law
        (or a constant when the variance is zero)."""
        if variance < 0:
            raise InvalidInputError(f"arm {id}: variance must be >= 0")
        dist = Constant(mean) if variance == 0 else TwoPoint.symmetric(mean, variance)
        return cls(id, dist, mean, variance)

    @property
    def sd(self) -> float:
        return math.sqrt(float(self.variance))

    @property
    def pair(self) -> tuple:
        return (self.mean, self.variance)


@dataclass(frozen=True)
class ArmSet:
    arms: tuple[Arm, ...]
    mu_max: Real
    mu_min: Real
    var_max: Real
    var_min: Real
    extreme_indices: tuple[int, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.arms)

    def __iter__(self):
        return iter(self.arms)

    def __getitem__(self, k: int) -> Arm:
        return self.arms[k]

    @property
    def means(self) -> np.ndarray:
        return np.array([float(a.mean) for a in self.arms])

    @property
    def variances(self) -> np.ndarray:
        return np.array([float(a.variance) for a in self.arms])

    @property
    def pairs(self) -> list[tuple]:
        return [a.pair for a in self.arms]

    def subset(self, positions: Iterable[int]) -> "ArmSet":
        """ArmSet made of the arms at ``positions`` (ids are preserved)."""
        return compute_bounds([self.arms[i] for i in positions])

    def extremes(self) -> "ArmSet":
        return self.subset(self.extreme_indices)


def make_arms(pairs: Iterable[tuple[Real, Real]]) -> ArmSet:
    """Convenience: ArmSet from ``(mean, variance)`` pairs."""
    return compute_bounds([Arm.from_pair(k, m, v) for k, (m, v) in enumerate(pairs)])


def compute_bounds(arms: Sequence[Arm]) -> ArmSet:
    """Bounds of the mean-variance pairs plus the extreme arm positions."""
    arms = tuple(arms)
    if not arms:
        raise InvalidInputError("at least one arm is required")
    means = [a.mean for a in arms]
    variances = [a.variance for a in arms]
    ext = extreme_points([a.pair for a in arms])
    return ArmSet(arms, max(means), min(means), max(variances), min(variances), tuple(ext))


def _is_exact(v) -> bool:
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def extreme_points(points: Sequence[tuple[Real, Real]]) -> list[int]:
    """Indices of the extreme points of the convex hull of 2-D ``points``.

    Andrew's monotone chain. Collinear boundary points are dropped, and of
    several identical points only the lowest index is reported. The chain
    itself uses exact predicates (floats are converted to their exact binary
    rationals). For float input a hull vertex is then dropped if it lies
    between its two hull neighbours with a relative cross product of at most
    1e-12, so nearly collinear arms are merged without ever losing a true
    endpoint.
    """
    if len(points) == 0:
        raise InvalidInputError("extreme_points needs at least one point")
    exact = all(_is_exact(c) for p in points for c in p)
    for p in points:
        if not all(math.isfinite(c) for c in p):
            raise InvalidInputError(f"non-finite point {p}")
    pts = [(Fraction(x), Fraction(y)) for x, y in points]

    first_index: dict[tuple, int] = {}
    for i, p in enumerate(pts):
        first_index.setdefault(p, i)
    uniq = sorted(first_index)
    if len(uniq) <= 2:
        return sorted(first_index[p] for p in uniq)

    def chain(seq):
        out: list = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(uniq)
    upper = chain(reversed(uniq))
    hull = lower[:-1] + upper[:-1]
    if not exact:
        hull = _merge_near_collinear(hull)
    return sorted(first_index[p] for p in hull)


def _merge_near_collinear(cycle: list) -> list:
    """Drop hull vertices within ``HULL_TOL`` of the segment joining their
    neighbours (counter-clockwise cycle of exact points)."""
    cycle = list(cycle)
    changed = True
    while changed and len(cycle) > 2:
        changed = False
        for i in range(len(cycle)):
            o, a, b = cycle[i - 1], cycle[i], cycle[(i + 1) % len(cycle)]
            ao = (float(a[0] - o[0]), float(a[1] - o[1]))
            bo = (float(b[0] - o[0]), float(b[1] - o[1]))
            ab = (float(a[0] - b[0]), float(a[1] - b[1]))
            scale = math.hypot(*ao) * math.hypot(*bo)
            between = ao[0] * bo[0] + ao[1] * bo[1] >= 0 and -(ab[0] * bo[0] + ab[1] * bo[1]) >= 0
            if between and float(_cross(o, a, b)) <= HULL_TOL * scale:
                del cycle[i]
                changed = True
                break
    return cycle


def rectangle_arms(arm_set: ArmSet) -> ArmSet:
    """The four corner pairs ``(mu_max|mu_min, var_max|var_min)`` as an ArmSet.

    The value of any arm set is bounded above by the value of its rectangle.
    """
    corners = [(arm_set.mu_max, arm_set.var_max), (arm_set.mu_max, arm_set.var_min),
               (arm_set.mu_min, arm_set.var_max), (arm_set.mu_min, arm_set.var_min)]
    return make_arms(corners)


def g_driver(arm_set: ArmSet, p: float, q: float, restrict_to_extremes: bool = False) -> tuple[float, int]:
    """Evaluate ``G(p, q) = max_k (mu_k p + sigma_k^2 q / 2)``.

    Returns the value and the id of the maximising arm (lowest position on
    ties). With ``restrict_to_extremes`` only hull vertices are considered.
    """
    positions = arm_set.extreme_indices if restrict_to_extremes else range(len(arm_set))
    best_val, best_id = None, -1
    for k in positions:
        arm = arm_set.arms[k]
        val = arm.mean * p + arm.variance * q / 2
        if best_val is None or val > best_val:
            best_val, best_id = val, arm.id
    return best_val, best_id


@dataclass(frozen=True)
class Thresholds:
    """Critical risk-aversion levels for a two-arm problem with
    ``mu1 > mu2`` and ``sigma1 > sigma2 > 0``.

    ``ratio`` is the mean-variance exchange rate; ``alpha_low``/``alpha_high``
    bound the semivariance switching window; ``alpha_low_prime`` is the
    shortfall level above which specialising in arm 1 fails.
    """

    ratio: float
    alpha_low: float
    alpha_high: float
    alpha_low_prime: float

    def regime_semivariance(self, alpha: float) -> str:
        if alpha <= self.ratio:
            return "specialize arm 1"
        if self.alpha_low < alpha < self.alpha_high:
            return "switching region"
        return "undetermined"

    def regime_mean_variance(self, alpha: float) -> str:
        if alpha < self.ratio:
            return "specialize arm 1"
        if alpha > self.ratio:
            return "specialize arm 2"
        return "both arms optimal"


def _ordered_params(mu1, mu2, sigma1, sigma2):
    if not mu1 > mu2:
        raise InvalidInputError(f"thresholds require mu1 > mu2 (got mu1={mu1}, mu2={mu2})")
    if not sigma1 > sigma2:
        raise InvalidInputError(f"thresholds require sigma1 > sigma2 (got sigma1={sigma1}, sigma2={sigma2})")
    if not sigma2 > 0:
        raise InvalidInputError(f"thresholds require sigma2 > 0 (got sigma2={sigma2})")


def threshold_values(mu1: float, mu2: float, sigma1: float, sigma2: float) -> Thresholds:
    """Thresholds from means and standard deviations."""
    _ordered_params(mu1, mu2, sigma1, sigma2)
    dmu, dsig = mu1 - mu2, sigma1 - sigma2
    return Thresholds(
        ratio=dmu / ((sigma1 + sigma2) * dsig),
        alpha_low=2 * dmu / ((sigma1 + 2 * sigma2) * dsig),
        alpha_high=2 * dmu / (sigma2 * dsig),
        alpha_low_prime=2 * dmu * sigma1 / dsig,
    )


def thresholds(arm1: Arm, arm2: Arm) -> Thresholds:
    return threshold_values(arm1.mean, arm2.mean, _exact_sqrt(arm1.variance), _exact_sqrt(arm2.variance))

