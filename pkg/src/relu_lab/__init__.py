"""Born-dead ReLU networks: detection, probability bounds, and the RAI initializer."""

__version__ = "0.1.0"

from .bdp import (BDPEstimate, Grid1D, RandomBall, estimate_bdp, is_born_dead, is_constant_on,
                  lower_bound_d1, max_depth, plow_markov_oracle, safe_width, upper_bound_sym)
from .estimator import ReLUNetRegressor
from .initializers import (RAI, BiasFreeSymmetric, He, Orthogonal, SymmetricUniform, make_scheme,
                           sigma_w_from_moments)
from .net import Architecture, Dataset, Params, backprop, forward, forward_trace, loss, relu
from .train import Outcome, TargetFn, TrainConfig, adam_train, classify_outcome, sweep_train

__all__ = [
    "Architecture", "BDPEstimate", "BiasFreeSymmetric", "Dataset", "Grid1D", "He", "Orthogonal",
    "Outcome", "Params", "RAI", "RandomBall", "ReLUNetRegressor", "SymmetricUniform", "TargetFn",
    "TrainConfig", "adam_train", "backprop", "classify_outcome", "estimate_bdp", "forward",
    "forward_trace", "is_born_dead", "is_constant_on", "loss", "lower_bound_d1", "make_scheme",
    "max_depth", "plow_markov_oracle", "relu", "safe_width", "sigma_w_from_moments",
    "sweep_train", "upper_bound_sym",
]
