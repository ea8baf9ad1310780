"""scikit-learn compatible wrapper around the ReLU network trainer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .bdp import is_born_dead
from .initializers import make_scheme
from .net import Architecture, Dataset, forward
from .rng import check_random_state
from .train import TrainConfig, adam_train


class ReLUNetRegressor(RegressorMixin, BaseEstimator):
    """Deep, narrow ReLU regressor trained with minibatch Adam.

    Parameters
    ----------
    depth : int
        Number of affine layers (``depth - 1`` hidden layers).
    width : int or None
        Hidden width; ``None`` means ``n_features + n_outputs``.
    init : str
        One of ``he``, ``bias-free-sym``, ``sym-uniform``, ``orthogonal``, ``rai``.
    init_bias : float
        Constant bias for ``init="he"``.
    epochs, batch_size, learning_rate, beta1, beta2, epsilon, loss
        Adam / loss settings, see :class:`relu_lab.train.TrainConfig`.
    random_state : int, Generator or None

    Attributes
    ----------
    params_ : Params
    loss_curve_ : ndarray of shape (epochs,)
    born_dead_ : bool
        Whether the initial network was constant on the training inputs.
    diverged_ : bool
    """

    def __init__(self, depth=10, width=None, init="rai", init_bias=0.0, epochs=1000,
                 batch_size=64, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8,
                 loss="L2", random_state=None):
        self.depth = depth
        self.width = width
        self.init = init
        self.init_bias = init_bias
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.loss = loss
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True, dtype=np.float64)
        self._y_1d = y.ndim == 1
        y2 = y[:, None] if self._y_1d else y
        d_in, d_out = X.shape[1], y2.shape[1]
        width = self.width if self.width is not None else d_in + d_out
        arch = Architecture.constant(d_in, width, self.depth, d_out)
        rng = check_random_state(self.random_state)
        params = make_scheme(self.init, bias=self.init_bias).sample(arch, rng)
        data = Dataset(X, y2)
        self.born_dead_ = bool(is_born_dead(params, data).dead) if arch.depth > 1 else False
        cfg = TrainConfig(
            epochs=self.epochs, batch_size=min(self.batch_size, len(X)), lr=self.learning_rate,
            beta1=self.beta1, beta2=self.beta2, eps=self.epsilon, loss=self.loss, m=len(X),
        )
        report = adam_train(params, data, cfg, rng)
        self.params_ = report.params
        self.loss_curve_ = report.loss_history
        self.diverged_ = report.diverged
        self.n_features_in_ = d_in
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        out = forward(self.params_, X)
        return out[:, 0] if self._y_1d else out
