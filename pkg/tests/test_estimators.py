import numpy as np
import pytest
from sklearn.base import clone

from riskbandits import InvalidInputError, UtilityIndex
from riskbandits.estimators import (ExactDPEstimator, ExtremeArmSelector, HJBValueEstimator,
                                    MonteCarloValueEstimator)

X = np.array([[1.0, 4.0], [0.0, 1.0]])


def test_params_and_clone():
    est = HJBValueEstimator(cells=40, epsilon=0.1)
    assert est.get_params()["cells"] == 40
    c = clone(est).set_params(cells=60)
    assert c.cells == 60 and est.cells == 40


def test_hjb_fit_predict():
    est = HJBValueEstimator(UtilityIndex.mean_variance(0.25), cells=40).fit(X)
    assert abs(est.value_) <= 1e-2
    pred = est.predict(np.array([[0.0, 0.0], [0.5, 0.1]]))
    assert pred.shape == (2,)
    assert pred[0] == pytest.approx(est.value_, abs=1e-12)


def test_monte_carlo_fit():
    est = MonteCarloValueEstimator(UtilityIndex.mean_variance(0.25), horizon=20, paths=20_000, seed=1).fit(X)
    assert abs(est.value_) <= 3 * est.std_error_


def test_exact_dp_fit():
    est = ExactDPEstimator(UtilityIndex.mean_variance(0.25), horizon=6).fit(X)
    # float inputs take the floating-point path
    assert abs(est.value_) <= 1e-12 and est.first_action_ == 0


def test_extreme_selector():
    Z = np.array([[1.0, 4.0], [0.0, 1.0], [0.5, 2.5], [0.2, 3.0]])
    sel = ExtremeArmSelector().fit(Z)
    assert list(sel.extreme_indices_) == [0, 1, 3]
    assert np.array_equal(sel.transform(Z), Z[[0, 1, 3]])
    with pytest.raises(InvalidInputError):
        sel.transform(Z[:2])


@pytest.mark.parametrize("bad", [np.array([[1.0, -1.0]]), np.array([[1.0, 2.0, 3.0]])])
def test_input_validation(bad):
    with pytest.raises(InvalidInputError):
        ExactDPEstimator().fit(bad)


def test_predict_before_fit():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        HJBValueEstimator().predict(np.zeros((1, 2)))
