import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskbandits import (Arm, DiscreteFinite, InvalidInputError, ResourceError, UtilityIndex,
                         compute_bounds, exact_value_dp, make_arms)
from riskbandits.dp import state_count

from oracles import brute_force_dp, mean_variance_value, two_point

F = Fraction


def _exact_u(kind, alpha):
    a = F(alpha)
    if kind == "mv":
        return lambda x, d, n: x - a * d * d / n
    if kind == "msv":
        return lambda x, d, n: x - a * d * d / n if d < 0 else x
    return lambda x, d, n: x - a if d < 0 else x


INDEX = {"mv": UtilityIndex.mean_variance, "msv": UtilityIndex.mean_semivariance, "sf": UtilityIndex.shortfall}


def test_one_step_example():
    arms = make_arms([(1, 4), (0, 1)])
    v, a = exact_value_dp(arms, UtilityIndex.mean_variance(0.25), 1)
    assert v == 0 and a == 0


def test_risk_neutral_one_step():
    arms = make_arms([(1, 4), (F(3, 2), 1), (0, 9)])
    v, a = exact_value_dp(arms, UtilityIndex.additive("identity", 0.0), 1)
    assert v == pytest.approx(1.5) and a == 1


@pytest.mark.parametrize("n", range(1, 13))
@pytest.mark.parametrize("alpha", [F(1, 4), F(1, 3), F(1, 2), F(2)])
def test_mean_variance_exact_all_horizons(n, alpha):
    pairs = [(1, 4), (0, 1)]
    u = UtilityIndex.mean_variance(float(alpha))
    v, _ = exact_value_dp(make_arms(pairs), u, n)
    # exact in the rational value of the stored double alpha
    assert v == mean_variance_value(pairs, F(u.alpha))
    assert abs(float(v) - float(mean_variance_value(pairs, alpha))) <= 1e-12


@pytest.mark.parametrize("kind", ["mv", "msv", "sf"])
@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_against_history_recursion(kind, n):
    laws = [two_point(1, 2), two_point(0, 1)]
    alpha = F(1)
    ref = brute_force_dp(laws, _exact_u(kind, alpha), n)
    v, _ = exact_value_dp(make_arms([(1, 4), (0, 1)]), INDEX[kind](1.0), n)
    assert v == ref


@pytest.mark.parametrize("n", [1, 3, 5])
def test_float_path_matches_recursion(n):
    laws = [two_point(1, 2), two_point(0, 1)]
    phi = lambda z: -math.exp(-float(z))
    ref = brute_force_dp(laws, lambda x, d, m: phi(F(1, 2) * x + F(1, 2) * float(d) / math.sqrt(m)), n)
    v, _ = exact_value_dp(make_arms([(1, 4), (0, 1)]), UtilityIndex.blend("-exp(-x)", 0.5), n)
    assert v == pytest.approx(ref, rel=1e-12)


def test_semivariance_twelve():
    v, _ = exact_value_dp(make_arms([(1, 4), (0, 1)]), UtilityIndex.mean_semivariance(1.0), 12)
    assert v == F(-5613, 16384)


def test_three_point_law_uses_all_slots():
    d3 = DiscreteFinite((F(-1), F(1), F(3)), (F(1, 4), F(1, 4), F(1, 2)))
    laws = [(d3.values, d3.probs, d3.mean)]
    arms = compute_bounds([Arm.from_distribution(0, d3)])
    for n in (1, 2, 4):
        assert exact_value_dp(arms, UtilityIndex.shortfall(1.0), n).value == \
            brute_force_dp(laws, _exact_u("sf", 1), n)


@pytest.mark.parametrize("n", range(1, 9))
def test_family_irrelevance_mean_variance(n):
    """A 3-point law and a two-point law with the same pair give the same value."""
    d3 = DiscreteFinite((F(-2), F(0), F(2)), (F(1, 8), F(3, 4), F(1, 8)))
    assert (d3.mean, d3.variance) == (0, 1)
    a = compute_bounds([Arm.from_pair(0, 1, 4), Arm.from_distribution(1, d3)])
    b = make_arms([(1, 4), (0, 1)])
    u = UtilityIndex.mean_variance(0.25)
    assert exact_value_dp(a, u, n).value == exact_value_dp(b, u, n).value


def _rand_pairs(rnd, k):
    return [(F(rnd.randint(-4, 4), 2), F(rnd.choice([0, 1, 4, 9]), rnd.choice([1, 4]))) for _ in range(k)]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 6), st.sampled_from(["mv", "msv", "sf"]))
def test_adding_an_arm_never_hurts(seed, n, kind):
    rnd = random.Random(seed)
    pairs = _rand_pairs(rnd, 3)
    u = INDEX[kind](0.5)
    small = exact_value_dp(make_arms(pairs[:2]), u, n).value
    big = exact_value_dp(make_arms(pairs), u, n).value
    assert big >= small


def test_resource_limits():
    arms = make_arms([(1, 4), (0, 1)])
    with pytest.raises(ResourceError):
        exact_value_dp(arms, UtilityIndex.mean_variance(1), 25)
    wide = compute_bounds([Arm.from_distribution(k, DiscreteFinite((0, 1, 2, 3), (0.25,) * 4)) for k in range(4)])
    assert state_count(24, 16) > 1e7
    with pytest.raises(ResourceError):
        exact_value_dp(wide, UtilityIndex.mean_variance(1), 24)


def test_support_limit():
    d5 = DiscreteFinite((0, 1, 2, 3, 4), (0.2,) * 5)
    with pytest.raises(InvalidInputError):
        exact_value_dp(compute_bounds([Arm.from_distribution(0, d5)]), UtilityIndex.mean_variance(1), 2)


def test_exact_request_rejected_for_irrational_inputs():
    with pytest.raises(InvalidInputError):
        exact_value_dp(make_arms([(1, 2)]), UtilityIndex.mean_variance(1), 2, exact=True)
