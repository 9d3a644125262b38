"""Exact finite-horizon value ``V_n`` by backward induction.

Payoffs are i.i.d. per arm with finite support, and ``u`` sees the history
only through ``S_n`` and the deviation sum. Both are affine in the tally of
outcomes observed so far, so the tally vector (one counter per support point
of every arm) is a sufficient state. The state count after ``m`` stages is
the number of compositions of ``m`` into ``D`` parts, ``D`` being the total
support size.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .arms import ArmSet
from .exceptions import InvalidInputError, NumericalError, ResourceError
from .utility import UtilityIndex, UtilityKind, eval_index

MAX_STATES = 10 ** 7
MAX_SUPPORT = 4
MAX_HORIZON = 24

_EXACT_KINDS = (UtilityKind.MEAN_VARIANCE, UtilityKind.MEAN_SEMIVARIANCE, UtilityKind.SHORTFALL)


class DPResult(NamedTuple):
    value: float | Fraction
    first_action: int


def _is_rational(v) -> bool:
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


def _slots(arm_set: ArmSet):
    """Flattened outcome slots: (arm position, value, prob) with merged duplicates."""
    out = []
    for k, arm in enumerate(arm_set):
        sup = arm.distribution.support()
        if sup is None:
            raise InvalidInputError(f"arm {arm.id}: exact DP needs a finite-support distribution, "
                                    f"got {arm.distribution.kind}")
        merged: dict = {}
        for v, p in zip(*sup):
            if p > 0:
                merged[v] = merged.get(v, 0) + p
        if len(merged) > MAX_SUPPORT:
            raise InvalidInputError(f"arm {arm.id}: support size {len(merged)} exceeds {MAX_SUPPORT}")
        for v in sorted(merged):
            out.append((k, v, merged[v]))
    return out


def state_count(n: int, dims: int) -> int:
    """Total number of tally states over stages ``0..n``."""
    return math.comb(n + dims, dims)


def _compositions(m: int, dims: int) -> np.ndarray:
    """All non-negative integer vectors of length ``dims`` summing to ``m``."""
    if dims == 1:
        return np.array([[m]], dtype=np.int64)
    bars = np.array(list(combinations(range(m + dims - 1), dims - 1)), dtype=np.int64)
    bars = bars.reshape(-1, dims - 1)
    edges = np.hstack([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), m + dims - 1)])
    return np.diff(edges, axis=1) - 1


class _Indexer:
    """Maps tally vectors of one stage to row positions."""

    def __init__(self, states: np.ndarray, n: int):
        dims = states.shape[1]
        self.packed = (n + 1) ** dims < 2 ** 62
        if self.packed:
            self.weights = (n + 1) ** np.arange(dims, dtype=np.int64)
            keys = states @ self.weights
            self.order = np.argsort(keys)
            self.keys = keys[self.order]
        else:
            self.table = {tuple(r): i for i, r in enumerate(states.tolist())}

    def lookup(self, states: np.ndarray) -> np.ndarray:
        if self.packed:
            pos = np.searchsorted(self.keys, states @ self.weights)
            return self.order[pos]
        return np.array([self.table[tuple(r)] for r in states.tolist()], dtype=np.int64)


def _exact_terminal(u: UtilityIndex, S, Sbar, n: int):
    alpha = Fraction(u.alpha)
    x = Fraction(S, n) if isinstance(S, int) else S / n
    if u.kind is UtilityKind.MEAN_VARIANCE:
        return x - alpha * Sbar * Sbar / n
    if u.kind is UtilityKind.MEAN_SEMIVARIANCE:
        return x - alpha * Sbar * Sbar / n if Sbar < 0 else x
    return x - alpha if Sbar < 0 else x


def exact_value_dp(arm_set: ArmSet, u: UtilityIndex, n: int, exact: bool | None = None) -> DPResult:
    """Optimal ``E u(S_n/n, S̄_n/sqrt(n))`` over all admissible strategies.

    Returns ``(value, first_action)``. Arithmetic is exact (``Fraction``)
    when every support point, probability and ``alpha`` is rational and
    ``u`` is mean-variance, semivariance or an unsmoothed shortfall index;
    pass ``exact=False`` to force doubles. Ties go to the lowest arm.
    """
    if n < 1:
        raise InvalidInputError("horizon must be >= 1")
    if n > MAX_HORIZON:
        raise ResourceError(f"exact DP is limited to n <= {MAX_HORIZON}, got {n}")
    slots = _slots(arm_set)
    dims = len(slots)
    total = state_count(n, dims)
    if total > MAX_STATES:
        raise ResourceError(f"exact DP would visit {total} states (limit {MAX_STATES})")

    K = len(arm_set)
    slot_arm = np.array([k for k, _, _ in slots])
    rational = all(_is_rational(v) and _is_rational(p) for _, v, p in slots) and \
        all(_is_rational(a.mean) for a in arm_set)
    can_exact = rational and u.kind in _EXACT_KINDS and not (u.kind is UtilityKind.SHORTFALL and u.delta > 0)
    if exact and not can_exact:
        raise InvalidInputError("exact arithmetic needs rational arms and a mean-variance, "
                                "semivariance or unsmoothed shortfall index")
    use_exact = can_exact if exact is None else exact

    states = _compositions(n, dims)
    if use_exact:
        vals = [Fraction(v) for _, v, _ in slots]
        devs = [Fraction(v) - Fraction(arm_set[k].mean) for k, v, _ in slots]
        probs = [Fraction(p) for _, _, p in slots]
        V = [_exact_terminal(u, sum(c * v for c, v in zip(row, vals)),
                             sum(c * d for c, d in zip(row, devs)), n)
             for row in states.tolist()]
    else:
        vals = np.array([float(v) for _, v, _ in slots])
        devs = np.array([float(v) - float(arm_set[k].mean) for k, v, _ in slots])
        probs = np.array([float(p) for _, _, p in slots])
        V = np.asarray(eval_index(u, states @ vals / n, states @ devs / math.sqrt(n)), dtype=float)
        V = np.broadcast_to(V, (len(states),)).copy()
        if not np.all(np.isfinite(V)):
            raise NumericalError(f"utility is non-finite at {int(np.sum(~np.isfinite(V)))} terminal states")

    arm_slots = [np.flatnonzero(slot_arm == k) for k in range(K)]
    unit = np.eye(dims, dtype=np.int64)
    first_action = 0
    for m in range(n - 1, -1, -1):
        nxt = _Indexer(states, n)
        cur = _compositions(m, dims)
        succ = [nxt.lookup(cur + unit[j]) for j in range(dims)]
        if use_exact:
            newV, best_arm = [], []
            for i in range(len(cur)):
                best, arg = None, -1
                for k in range(K):
                    ev = sum(probs[j] * V[succ[j][i]] for j in arm_slots[k])
                    if best is None or ev > best:
                        best, arg = ev, k
                newV.append(best)
                best_arm.append(arg)
        else:
            ev = np.stack([sum(probs[j] * V[succ[j]] for j in arm_slots[k]) for k in range(K)])
            best_arm = np.argmax(ev, axis=0)
            newV = ev[best_arm, np.arange(len(cur))]
        V, states = newV, cur
        if m == 0:
            first_action = int(best_arm[0])
    value = V[0] if use_exact else float(V[0])
    return DPResult(value, arm_set[first_action].id)
