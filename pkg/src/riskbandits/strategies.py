"""Arm-selection strategies.

A strategy sees only the state before the stage it decides: the stage
index ``i`` (1-based), pulls per arm, the payoff sum and the deviation sum.
Decisions are vectorised over a batch of independent paths. Strategies
whose choices ignore the random history also expose ``schedule(n)``, which
lets the simulator draw per-arm sums directly instead of stepping.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .exceptions import ConfigError, InvalidInputError, PolicyError


class Strategy:
    name: str = ""
    # whether ``choose`` reads the pulls matrix (costly to maintain)
    needs_pulls: bool = False

    def choose(self, stage: int, pulls: np.ndarray | None, payoff_sum: np.ndarray,
               deviation_sum: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def schedule(self, n: int) -> np.ndarray | None:
        """Arm sequence for ``n`` stages when it does not depend on payoffs."""
        return None

    def max_arm(self) -> int:
        """Largest arm position the strategy can return (-1 if unknown)."""
        return -1

    def to_spec(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Specialize(Strategy):
    arm: int = 0
    name = "specialize"

    def choose(self, stage, pulls, payoff_sum, deviation_sum):
        return np.full(np.shape(payoff_sum), self.arm, dtype=np.int64)

    def schedule(self, n):
        return np.full(n, self.arm, dtype=np.int64)

    def max_arm(self):
        return self.arm

    def to_spec(self):
        return {"type": "specialize", "arm": self.arm}


@dataclass(frozen=True)
class Alternate(Strategy):
    """Cycle through ``sequence`` (default ``(0, 1)``) stage by stage."""

    sequence: tuple[int, ...] = (0, 1)
    name = "alternate"

    def __post_init__(self):
        object.__setattr__(self, "sequence", tuple(int(k) for k in self.sequence))
        if not self.sequence:
            raise ConfigError("alternate strategy needs a non-empty sequence")

    def choose(self, stage, pulls, payoff_sum, deviation_sum):
        k = self.sequence[(stage - 1) % len(self.sequence)]
        return np.full(np.shape(payoff_sum), k, dtype=np.int64)

    def schedule(self, n):
        seq = np.asarray(self.sequence, dtype=np.int64)
        return np.resize(seq, n)

    def max_arm(self):
        return max(self.sequence)

    def to_spec(self):
        return {"type": "alternate", "sequence": list(self.sequence)}


def lambda_for_target(x_star: float, mu1: float, mu2: float) -> float:
    """Fraction of arm-1 pulls whose long-run average payoff is ``x_star``."""
    if mu1 == mu2:
        raise InvalidInputError("lambda_for_target needs mu1 != mu2")
    lam = (x_star - mu2) / (mu1 - mu2)
    if not 0 <= lam <= 1:
        raise InvalidInputError(f"target {x_star} is not between the arm means {mu2} and {mu1}")
    return lam


@dataclass(frozen=True)
class LambdaFraction(Strategy):
    """Play ``arm1`` at stage 1, then ``arm1`` at stage ``i+1`` iff
    ``psi_i / i <= lam`` where ``psi_i`` counts arm-1 pulls so far.

    The comparison is done in exact rational arithmetic on ``lam``.
    """

    lam: float = 0.5
    arm1: int = 0
    arm2: int = 1
    name = "lambda_fraction"
    needs_pulls = True

    def __post_init__(self):
        if not 0 <= self.lam <= 1:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")

    def schedule(self, n):
        frac = Fraction(self.lam)
        num, den = frac.numerator, frac.denominator
        out = np.empty(n, dtype=np.int64)
        psi = 0
        for i in range(n):
            # stage i+1; i stages played so far
            pick = i == 0 or psi * den <= num * i
            out[i] = self.arm1 if pick else self.arm2
            psi += pick
        return out

    def choose(self, stage, pulls, payoff_sum, deviation_sum):
        if pulls is None:
            raise InvalidInputError("lambda-fraction needs the pulls matrix")
        frac = Fraction(self.lam)
        psi = pulls[:, self.arm1]
        i = stage - 1
        pick = (psi * frac.denominator <= frac.numerator * i) | (i == 0)
        return np.where(pick, self.arm1, self.arm2).astype(np.int64)

    def max_arm(self):
        return max(self.arm1, self.arm2)

    def to_spec(self):
        return {"type": "lambda_fraction", "lam": self.lam, "arm1": self.arm1, "arm2": self.arm2}


@dataclass(frozen=True)
class SignSwitch(Strategy):
    """``arm_pos`` while the running deviation sum is >= 0, else ``arm_neg``.

    Stage 1 sees a zero sum and therefore plays ``arm_pos``.
    """

    arm_pos: int = 0
    arm_neg: int = 1
    name = "sign_switch"

    def choose(self, stage, pulls, payoff_sum, deviation_sum):
        return np.where(deviation_sum >= 0, self.arm_pos, self.arm_neg).astype(np.int64)

    def max_arm(self):
        return max(self.arm_pos, self.arm_neg)

    def to_spec(self):
        return {"type": "sign_switch", "arm_pos": self.arm_pos, "arm_neg": self.arm_neg}


@dataclass(frozen=True)
class Custom(Strategy):
    """User policy ``policy(stage, pulls, payoff_sum, deviation_sum)``.

    With ``vectorized=True`` the callback receives arrays over paths and
    returns an integer array; otherwise it is called once per path with
    scalars (and a 1-D pulls row). Callbacks must be pure.
    """

    policy: Callable = None
    vectorized: bool = True
    label: str = "custom"
    name = "custom"
    needs_pulls = True

    def __post_init__(self):
        if self.policy is None:
            raise ConfigError("custom strategy needs a policy callback")

    def choose(self, stage, pulls, payoff_sum, deviation_sum):
        if self.vectorized:
            return np.asarray(self.policy(stage, pulls, payoff_sum, deviation_sum))
        out = [self.policy(stage, pulls[j], float(payoff_sum[j]), float(deviation_sum[j]))
               for j in range(len(payoff_sum))]
        return np.asarray(out)

    def to_spec(self):
        return {"type": "custom", "label": self.label}


def strategy_from_spec(spec: dict) -> Strategy:
    """Build a strategy from ``{type: ..., <params>}``."""
    kind = spec.get("type") if isinstance(spec, dict) else None
    try:
        if kind == "specialize":
            return Specialize(int(spec.get("arm", 0)))
        if kind == "alternate":
            return Alternate(tuple(spec.get("sequence", (0, 1))))
        if kind == "lambda_fraction":
            if "lam" in spec:
                lam = float(Fraction(str(spec["lam"])))
            else:
                lam = lambda_for_target(float(spec["x_star"]), float(spec["mu1"]), float(spec["mu2"]))
            return LambdaFraction(lam, int(spec.get("arm1", 0)), int(spec.get("arm2", 1)))
        if kind == "sign_switch":
            return SignSwitch(int(spec.get("arm_pos", 0)), int(spec.get("arm_neg", 1)))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad strategy spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown strategy spec {spec!r} (custom strategies are code-only)")


def builtin_strategies(num_arms: int, lam: float = 0.5) -> list[Strategy]:
    """One instance of every built-in family for ``num_arms`` arms."""
    out: list[Strategy] = [Specialize(k) for k in range(num_arms)]
    if num_arms >= 2:
        out += [Alternate(tuple(range(num_arms))), LambdaFraction(lam, 0, 1), SignSwitch(0, 1)]
    return out


def check_arm_ids(arms: np.ndarray, num_arms: int, stage: int | None = None) -> None:
    arms = np.asarray(arms)
    if arms.size == 0:
        return
    if not np.issubdtype(arms.dtype, np.integer):
        if not np.all(np.isfinite(arms)) or np.any(arms != np.round(arms)):
            raise PolicyError("policy returned a non-integer arm id")
    lo, hi = arms.min(), arms.max()
    if lo < 0 or hi >= num_arms:
        bad = lo if lo < 0 else hi
        where = f" at stage {stage}" if stage is not None else ""
        raise PolicyError(f"policy returned arm id {bad}{where}; valid ids are 0..{num_arms - 1}")
