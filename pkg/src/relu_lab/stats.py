"""Interval helpers shared by the Monte-Carlo estimators."""

from __future__ import annotations

import math

import numpy as np
from statsmodels.stats.proportion import proportion_confint

Z95 = 1.959963984540054


def wilson(successes: int, trials: int, alpha: float = 0.05) -> tuple:
    low, high = proportion_confint(successes, trials, alpha=alpha, method="wilson")
    return float(low), float(high)


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def mean_ci(samples, axis=0) -> tuple:
    """Sample mean and a normal-approximation 95% interval along ``axis``."""
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[axis]
    mean = samples.mean(axis=axis)
    half = Z95 * samples.std(axis=axis, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, mean - half, mean + half
