import itertools
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskbandits import (Arm, DiscreteFinite, InvalidInputError, TwoPoint, compute_bounds, extreme_points,
                         g_driver, make_arms, rectangle_arms, threshold_values, thresholds)

from oracles import brute_force_extremes, in_convex_hull, thresholds_closed_form

finite = st.floats(-50, 50, allow_nan=False)
small_frac = st.fractions(min_value=-5, max_value=5, max_denominator=12)
nonneg_frac = st.fractions(min_value=0, max_value=9, max_denominator=12)


# compute_bounds ----------------------------------------------------------

def test_bounds_two_arms():
    a = make_arms([(1, 4), (0, 1)])
    assert (a.mu_max, a.mu_min, a.var_max, a.var_min) == (1, 0, 4, 1)


def test_bounds_zero_variance_single_arm():
    a = make_arms([(2, 0)])
    assert (a.mu_max, a.mu_min, a.var_max, a.var_min) == (2, 2, 0, 0)
    assert a.extreme_indices == (0,)


def test_bounds_ignore_interior_arm():
    a = make_arms([(1, 4), (0, 1), (0.5, 2.5)])
    assert (a.mu_max, a.mu_min, a.var_max, a.var_min) == (1, 0, 4, 1)
    assert a.extreme_indices == (0, 1)


def test_bounds_empty():
    with pytest.raises(InvalidInputError):
        compute_bounds([])


def test_arm_moments_are_analytic():
    d = TwoPoint(Fraction(-1), Fraction(3), Fraction(1, 2))
    arm = Arm.from_distribution(0, d)
    assert (arm.mean, arm.variance) == (1, 4)
    with pytest.raises(InvalidInputError):
        Arm.from_distribution(0, d, mean=1.1)
    Arm.from_distribution(0, d, mean=1 + 1e-13)


def test_arm_rejects_negative_variance():
    with pytest.raises(InvalidInputError):
        Arm.from_pair(0, 1.0, -1.0)


# extreme_points ----------------------------------------------------------

@pytest.mark.parametrize("points, expected", [
    ([(1, 4), (0, 1), (0.5, 2.5)], [0, 1]),
    ([(1, 4)], [0]),
    ([(0, 0), (1, 0), (0, 1), (0.25, 0.25)], [0, 1, 2]),
    ([(0, 0), (0, 0), (1, 1)], [0, 2]),
    ([(0, 0), (1, 1), (2, 2), (3, 3)], [0, 3]),
])
def test_extreme_points_examples(points, expected):
    assert sorted(extreme_points(points)) == expected


def test_extreme_midpoint_exact_rational():
    pts = [(Fraction(1), Fraction(4)), (Fraction(0), Fraction(1)), (Fraction(1, 2), Fraction(5, 2))]
    assert sorted(extreme_points(pts)) == [0, 1]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(small_frac, nonneg_frac), min_size=1, max_size=8))
def test_extreme_points_match_brute_force(points):
    assert sorted(extreme_points(points)) == brute_force_extremes(points)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(small_frac, nonneg_frac), min_size=1, max_size=8), st.randoms())
def test_extreme_points_permutation_invariant(points, rnd):
    perm = list(range(len(points)))
    rnd.shuffle(perm)
    shuffled = [points[i] for i in perm]
    got = {tuple(shuffled[i]) for i in extreme_points(shuffled)}
    ref = {tuple(points[i]) for i in extreme_points(points)}
    assert got == ref


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(small_frac, nonneg_frac), min_size=1, max_size=8))
def test_excluded_points_are_convex_combinations(points):
    ext = extreme_points(points)
    verts = [points[i] for i in ext]
    for i, p in enumerate(points):
        if i not in ext:
            assert in_convex_hull(p, verts, tol=0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(0, 9)), min_size=1, max_size=8))
def test_excluded_float_points_in_hull(points):
    ext = extreme_points(points)
    verts = [points[i] for i in ext]
    for i, p in enumerate(points):
        if i not in ext:
            assert in_convex_hull(p, verts, tol=1e-8)


# g_driver ----------------------------------------------------------------

def test_g_driver_examples():
    a = make_arms([(1, 4), (0, 1)])
    assert g_driver(a, 1, 0) == (1, 0)
    assert g_driver(a, 0, -2) == (-1, 1)
    assert g_driver(a, 2, -4)[0] == 2 * g_driver(a, 1, -2)[0] == -2


def test_g_driver_ties_lowest_index():
    a = make_arms([(1, 1), (1, 1)])
    assert g_driver(a, 1.0, 1.0)[1] == 0


def _random_set(rnd, k):
    return make_arms([(Fraction(rnd.randint(-20, 20), 4), Fraction(rnd.randint(0, 36), 4)) for _ in range(k)])


pq = st.tuples(st.fractions(-10, 10, max_denominator=8), st.fractions(-10, 10, max_denominator=8))


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10 ** 6), pq, pq, st.fractions(0, 10, max_denominator=8))
def test_g_conditions(k, seed, a, b, lam):
    arms = _random_set(random.Random(seed), k)
    (p, q), (p2, q2) = a, b
    G = lambda x, y: g_driver(arms, x, y)[0]
    # monotone in q
    if q2 >= q:
        assert G(p, q2) >= G(p, q)
    # subadditivity in the form G(p,q) - G(p',q') <= G(p-p', q-q')
    assert G(p, q) - G(p2, q2) <= G(p - p2, q - q2)
    # positive homogeneity, exact in rationals
    assert G(lam * p, lam * q) == lam * G(p, q)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 7), st.integers(0, 10 ** 6), pq)
def test_g_driver_full_equals_extreme(k, seed, pqv):
    arms = _random_set(random.Random(seed), k)
    p, q = pqv
    assert g_driver(arms, p, q)[0] == g_driver(arms, p, q, restrict_to_extremes=True)[0]


def test_rectangle_corners():
    r = rectangle_arms(make_arms([(1, 4), (0, 1), (0.5, 2)]))
    assert sorted(r.pairs) == sorted([(1, 4), (1, 1), (0, 4), (0, 1)])


# thresholds --------------------------------------------------------------

def test_thresholds_canonical():
    t = threshold_values(1, 0, 2, 1)
    assert (t.ratio, t.alpha_low, t.alpha_high, t.alpha_low_prime) == pytest.approx((1 / 3, 0.5, 2, 4), abs=1e-15)


def test_thresholds_from_arms_exact():
    a = make_arms([(1, 4), (0, 1)])
    t = thresholds(a[0], a[1])
    assert t.ratio == Fraction(1, 3)
    assert (t.alpha_low, t.alpha_high, t.alpha_low_prime) == (Fraction(1, 2), 2, 4)


@pytest.mark.parametrize("args, word", [((1, 0, 1, 1), "sigma1 > sigma2"), ((0, 1, 2, 1), "mu1 > mu2"),
                                        ((1, 0, 2, 0), "sigma2 > 0")])
def test_thresholds_invalid(args, word):
    with pytest.raises(InvalidInputError, match=word):
        threshold_values(*args)


def test_threshold_chain_1000_instances():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        mu2 = rng.uniform(-5, 5)
        mu1 = mu2 + rng.uniform(1e-3, 5)
        s2 = rng.uniform(1e-2, 3)
        s1 = s2 + rng.uniform(1e-3, 3)
        t = threshold_values(mu1, mu2, s1, s2)
        assert t.ratio < t.alpha_low < t.alpha_high
        assert (t.ratio, t.alpha_low, t.alpha_high, t.alpha_low_prime) == \
            pytest.approx(thresholds_closed_form(mu1, mu2, s1, s2), rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.floats(-5, 5), st.floats(1e-3, 5), st.floats(1e-2, 3), st.floats(1e-3, 3))
def test_threshold_chain_property(mu2, dmu, s2, ds):
    t = threshold_values(mu2 + dmu, mu2, s2 + ds, s2)
    assert t.ratio < t.alpha_low < t.alpha_high


def test_distribution_family_irrelevant_for_pairs():
    d3 = DiscreteFinite((Fraction(-1), Fraction(1), Fraction(3)), (Fraction(1, 4), Fraction(1, 4), Fraction(1, 2)))
    arm = Arm.from_distribution(0, d3)
    tp = Arm.from_pair(1, arm.mean, arm.variance)
    assert arm.pair == tp.pair
    assert set(itertools.chain(extreme_points([arm.pair, tp.pair]))) == {0}


@pytest.mark.parametrize("points, expected", [
    ([(0.0, 0.0), (0.0, 2.0), (2.4674459698481128e-117, 1.0)], [0, 1]),
    ([(0.0, 1.0), (0.0, 1.5), (-1.7313105401259748e-131, 2.0)], [0, 2]),
    ([(0.1, 0.1), (0.2, 0.2), (0.3, 0.3)], [0, 2]),
])
def test_near_collinear_floats_keep_true_endpoints(points, expected):
    """Merging by tolerance drops only points lying between hull neighbours."""
    assert extreme_points(points) == expected


def test_rational_hull_oracle_is_exact():
    pts = [(Fraction(1), Fraction(0)), (Fraction(0), Fraction(0)), (Fraction(1, 3), Fraction(0))]
    assert extreme_points(pts) == [0, 1]
    assert in_convex_hull(pts[2], pts[:2])
