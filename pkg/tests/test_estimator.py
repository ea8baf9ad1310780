import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from relu_lab.estimator import ReLUNetRegressor
from relu_lab.train import TargetFn, gen_data


def test_params_round_trip():
    est = ReLUNetRegressor(depth=4, init="he", init_bias=0.5, epochs=3)
    assert est.get_params()["init_bias"] == 0.5
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    twin.set_params(depth=6)
    assert twin.depth == 6 and est.depth == 4


def test_fit_predict_shapes():
    d = gen_data("f1", 200, 0)
    est = ReLUNetRegressor(depth=3, width=8, init="he", epochs=200, learning_rate=1e-2, random_state=0).fit(d.inputs, d.targets[:, 0])
    assert est.predict(d.inputs).shape == (200,)
    assert est.loss_curve_.shape == (200,)
    assert est.loss_curve_[-1] < est.loss_curve_[0]
    assert est.n_features_in_ == 1
    assert est.score(d.inputs, d.targets[:, 0]) > 0.5


def test_multi_output():
    d = gen_data("f4", 100, 1)
    est = ReLUNetRegressor(depth=3, init="rai", epochs=2, random_state=1).fit(d.inputs, d.targets)
    assert est.predict(d.inputs).shape == (100, 2)


def test_reproducible():
    d = gen_data("f2", 100, 2)
    a = ReLUNetRegressor(depth=5, epochs=3, random_state=4).fit(d.inputs, d.targets[:, 0])
    b = ReLUNetRegressor(depth=5, epochs=3, random_state=4).fit(d.inputs, d.targets[:, 0])
    assert a.params_ == b.params_


def test_errors():
    with pytest.raises(NotFittedError):
        ReLUNetRegressor().predict(np.zeros((2, 1)))
    est = ReLUNetRegressor(depth=2, epochs=1, random_state=0).fit(np.zeros((4, 1)) + [[0.1], [0.2], [0.3], [0.4]], np.arange(4.0))
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        ReLUNetRegressor(init="xavier").fit(np.ones((3, 1)), np.ones(3))
