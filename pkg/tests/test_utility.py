import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskbandits import (ConfigError, InvalidInputError, NumericalError, TrajectoryStatistics, UtilityIndex,
                         eval_index, finite_horizon_utility, make_arms, single_arm_limit,
                         specialization_certificate)
from riskbandits.utility import Verdict, gaussian_expectation, identity, neg_exp, utility_from_spec

from oracles import gaussian_expectation_quad, ramp_expectation_quad

BUILTINS = [
    UtilityIndex.additive("-exp(-x)", 0.3),
    UtilityIndex.blend("-exp(-x)", 0.5),
    UtilityIndex.mean_variance(0.25),
    UtilityIndex.mean_semivariance(1.0),
    UtilityIndex.shortfall(1.0),
    UtilityIndex.shortfall(1.0, delta=0.5),
    UtilityIndex.additive("identity", -1.0),
    UtilityIndex.blend("identity", 0.5),
]


def test_eval_examples():
    assert eval_index(UtilityIndex.mean_variance(0.25), 1, 2) == 0
    u4 = UtilityIndex.mean_semivariance(1)
    assert eval_index(u4, 0, -1) == -1 and eval_index(u4, 0, 1) == 0
    assert eval_index(UtilityIndex.shortfall(1), 0.5, -0.1) == -0.5
    assert eval_index(UtilityIndex.shortfall(1), 0.5, 0.0) == 0.5


def test_eval_additive_and_blend():
    u1 = UtilityIndex.additive("-exp(-x)", 0.5)
    assert eval_index(u1, 1.0, 2.0) == pytest.approx(-math.exp(-1) + 1.0)
    u2 = UtilityIndex.blend("-exp(-x)", 0.25)
    assert eval_index(u2, 2.0, -1.0) == pytest.approx(-math.exp(-(0.75 * 2 - 0.25)))


def test_shortfall_ramp():
    u = UtilityIndex.shortfall(2.0, delta=0.5)
    y = np.array([-1.0, -0.5, -0.25, 0.0, 0.3])
    assert np.allclose(eval_index(u, 0.0, y), [-2, -2, -1, 0, 0])


def test_blend_alpha_one_ignores_x():
    u = UtilityIndex.blend("-exp(-x)", 1.0)
    y = np.linspace(-3, 3, 7)
    assert np.array_equal(eval_index(u, -4.0, y), eval_index(u, 9.0, y))


def test_blend_small_alpha_approaches_phi():
    u = UtilityIndex.blend("-exp(-x)", 1e-6)
    x = np.linspace(-2, 2, 9)
    assert np.allclose(eval_index(u, x, 1.0), -np.exp(-x), atol=1e-5)


@pytest.mark.parametrize("kwargs", [dict(kind="blend", alpha=0.0, phi=identity()),
                                    dict(kind="mean_variance", alpha=-1.0),
                                    dict(kind="shortfall", alpha=1.0, delta=-1.0),
                                    dict(kind="additive", alpha=1.0)])
def test_invalid_utilities(kwargs):
    with pytest.raises(ConfigError):
        UtilityIndex(**kwargs)


def test_custom_without_callback():
    with pytest.raises(ConfigError):
        eval_index(UtilityIndex.custom(None), 0, 0)


def test_spec_round_trip():
    for u in BUILTINS:
        v = utility_from_spec(u.to_spec())
        X, Y = np.meshgrid(np.linspace(-3, 3, 7), np.linspace(-3, 3, 7))
        assert np.array_equal(eval_index(u, X, Y), eval_index(v, X, Y))


@pytest.mark.parametrize("u", [u for u in BUILTINS if u.declared_growth is not None], ids=lambda u: u.label)
def test_growth_bound_on_grid(u):
    c, g = u.declared_growth
    X, Y = np.meshgrid(np.linspace(-50, 50, 101), np.linspace(-50, 50, 101))
    bound = c * (1 + np.hypot(X, Y) ** (g - 1))
    assert np.all(np.abs(eval_index(u, X, Y)) <= bound)


def test_exponential_phi_declares_no_polynomial_growth():
    assert UtilityIndex.blend("-exp(-x)", 0.5).declared_growth is None
    assert UtilityIndex.additive("-exp(-x)").declared_growth is None


# finite-horizon functional ------------------------------------------------

def test_finite_horizon_single_path():
    s = TrajectoryStatistics(1.0, 0.0, 5)
    assert finite_horizon_utility(UtilityIndex.mean_variance(3.0), s) == 1.0


def test_finite_horizon_errors():
    with pytest.raises(InvalidInputError):
        finite_horizon_utility(UtilityIndex.mean_variance(1), [])
    with pytest.raises(InvalidInputError):
        finite_horizon_utility(UtilityIndex.mean_variance(1),
                               [TrajectoryStatistics(0, 0, 1), TrajectoryStatistics(0, 0, 2)])


def test_finite_horizon_collection_average():
    stats = [TrajectoryStatistics(np.array([1.0, 2.0]), np.array([0.0, 1.0]), 3),
             TrajectoryStatistics(np.array([0.0]), np.array([-2.0]), 3)]
    u = UtilityIndex.mean_variance(0.5)
    assert finite_horizon_utility(u, stats) == pytest.approx((1 + 1.5 - 2) / 3)


# single-arm limits --------------------------------------------------------

def test_single_arm_examples():
    assert single_arm_limit(UtilityIndex.mean_variance(0.25), 1, 4) == 0
    assert single_arm_limit(UtilityIndex.mean_semivariance(1), 1, 4) == -1
    assert single_arm_limit(UtilityIndex.blend("identity", 0.5), 2, 1, method="quadrature") == \
        pytest.approx(1.0, abs=1e-10)
    assert single_arm_limit(UtilityIndex.shortfall(1), 1, 4) == 0.5


def test_single_arm_zero_variance():
    assert single_arm_limit(UtilityIndex.shortfall(1), 2.0, 0.0) == 2.0
    assert single_arm_limit(UtilityIndex.blend("-exp(-x)", 0.5), 2.0, 0.0) == pytest.approx(-math.exp(-1))


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(0.05, 9), st.floats(0.05, 3))
def test_quadrature_matches_closed_forms(mu, s2, alpha):
    for u in (UtilityIndex.mean_variance(alpha), UtilityIndex.mean_semivariance(alpha)):
        assert single_arm_limit(u, mu, s2, method="quadrature") == pytest.approx(
            single_arm_limit(u, mu, s2), abs=1e-8)
    # shortfall quadrature of the smoothed index differs from mu - alpha/2 by O(delta)
    delta = 1e-3
    q = single_arm_limit(UtilityIndex.shortfall(alpha, delta), mu, s2, method="quadrature")
    assert abs(q - (mu - alpha / 2)) <= alpha * delta / math.sqrt(s2)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 5), st.floats(0.01, 2))
def test_ramp_closed_form(sd, delta):
    u = UtilityIndex.shortfall(1.0, delta)
    assert single_arm_limit(u, 0.0, sd * sd) == pytest.approx(-ramp_expectation_quad(sd, delta), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(0.25, 9), st.floats(0.05, 1))
def test_blend_quadrature_against_scipy(mu, s2, alpha):
    u = UtilityIndex.blend("-exp(-x)", alpha)
    ref = gaussian_expectation_quad(lambda y: -math.exp(-((1 - alpha) * mu + alpha * y)), math.sqrt(s2))
    assert single_arm_limit(u, mu, s2) == pytest.approx(ref, rel=1e-10)
    # closed form of the lognormal moment
    assert single_arm_limit(u, mu, s2) == pytest.approx(-math.exp(-(1 - alpha) * mu + alpha ** 2 * s2 / 2),
                                                        rel=1e-10)


def test_quadrature_non_finite():
    u = UtilityIndex.custom(lambda x, y: np.where(np.asarray(y) > 0, np.inf, 0.0))
    with pytest.raises(NumericalError):
        single_arm_limit(u, 0.0, 1.0)


def test_gaussian_expectation_kinked():
    val = gaussian_expectation(lambda y: np.abs(y), 2.0, breakpoints=(0.0,))
    assert val == pytest.approx(2.0 * math.sqrt(2 / math.pi), rel=1e-12)


def test_invalid_single_arm_inputs():
    u = UtilityIndex.mean_variance(1)
    with pytest.raises(InvalidInputError):
        single_arm_limit(u, 0, -1)
    with pytest.raises(InvalidInputError):
        single_arm_limit(u, 0, 1, quadrature_order=0)


# certificates -------------------------------------------------------------

def _arms():
    a = make_arms([(1, 4), (0, 1)])
    return a[0], a[1]


def test_certificate_mean_variance():
    a1, a2 = _arms()
    c = specialization_certificate(UtilityIndex.mean_variance(0.25), a1, a2)
    assert c.holds_for_arm1 is Verdict.YES and c.holds_for_arm2 is Verdict.NO
    assert c.ratio_bound == 0.25
    c = specialization_certificate(UtilityIndex.mean_variance(0.5), a1, a2)
    assert c.optimal_arms == (2,)
    c = specialization_certificate(UtilityIndex.mean_variance(1 / 3), a1, a2)
    assert c.optimal_arms == (1, 2)


def test_certificate_semivariance_refutes_arm2():
    a1, a2 = _arms()
    c = specialization_certificate(UtilityIndex.mean_semivariance(1.0), a1, a2)
    assert c.holds_for_arm1 is Verdict.NO and c.holds_for_arm2 is Verdict.NO
    assert c.witness is not None


def test_certificate_grid_probe_is_inconclusive_or_refutes():
    a1, a2 = _arms()
    u = UtilityIndex.custom(lambda x, y: np.asarray(x) - 0.1 * np.asarray(y) ** 2 / (1 + np.asarray(y) ** 2))
    c = specialization_certificate(u, a1, a2)
    assert c.holds_for_arm1 is Verdict.INCONCLUSIVE
    assert c.holds_for_arm2 is Verdict.NO


def test_certificate_blend_constant_ratio():
    a1, a2 = _arms()
    # ratio of the blend index is alpha^2 / (2 (1 - alpha)) = 1/4 for alpha = 1/2
    c = specialization_certificate(UtilityIndex.blend(neg_exp(), 0.5), a1, a2)
    assert c.ratio_bound == pytest.approx(0.25)
    assert c.holds_for_arm1 is Verdict.YES
