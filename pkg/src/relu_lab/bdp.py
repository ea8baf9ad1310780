"""Born-dead detection, Monte-Carlo BDP estimation and closed-form bounds.

A network is born dead (BD) on a data set when some hidden layer is inactive
on every input, which makes the whole network constant there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .initializers import InitScheme
from .net import Architecture, Dataset, Params, forward, forward_trace, relu
from .rng import SeedStreams
from .stats import binomial_se, wilson

CHUNK = 1000


# -- data -------------------------------------------------------------------

@dataclass(frozen=True)
class Grid1D:
    """``points`` equally spaced inputs on [-r, r]."""

    points: int = 101
    r: float = 1.0

    def materialize(self) -> Dataset:
        if self.points < 2:
            raise ValueError("a 1-D grid needs at least two points")
        return Dataset(np.linspace(-self.r, self.r, self.points)[:, None], r=self.r)


@dataclass(frozen=True)
class RandomBall:
    """``points`` inputs uniform in the closed d_in-ball of radius r."""

    points: int
    r: float = 1.0
    d_in: int = 1
    seed: int = 0

    def materialize(self) -> Dataset:
        rng = SeedStreams(self.seed).stream(0)
        g = rng.standard_normal((self.points, self.d_in))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        x = g * self.r * rng.random((self.points, 1)) ** (1.0 / self.d_in)
        if self.d_in == 1 and self.points >= 2:
            # both half-lines must be represented
            x[0, 0], x[1, 0] = abs(x[0, 0]), -abs(x[1, 0])
        return Dataset(x, r=self.r)


def default_data(d_in: int) -> Dataset:
    if d_in == 1:
        return Grid1D().materialize()
    return RandomBall(points=256, r=1.0, d_in=d_in).materialize()


def _dataset(data) -> Dataset:
    return data if isinstance(data, Dataset) else data.materialize()


# -- detection --------------------------------------------------------------

class BornDead(NamedTuple):
    dead: bool
    layer: Optional[int]


def is_born_dead(params: Params, data) -> BornDead:
    """Smallest hidden layer (1-based) whose ReLU output vanishes on all of ``data``."""
    data = _dataset(data)
    trace = forward_trace(params, data.inputs)
    for l, post in enumerate(trace.post, start=1):
        if not post.any():
            return BornDead(True, l)
    return BornDead(False, None)


def is_constant_on(params: Params, data, atol: float = 1e-12) -> bool:
    data = _dataset(data)
    if len(data) < 2:
        raise ValueError("constancy needs at least two inputs")
    out = forward(params, data.inputs)
    return bool(np.all(np.abs(out - out[0]) <= atol))


def first_dead_layers(weights, biases, x) -> np.ndarray:
    """Vectorized detector over stacked networks.

    ``weights[l]`` has shape (T, n_out, n_in); ``x`` is either one shared
    (m, d_in) data set or per-network data of shape (T, m, d_in).  Returns,
    per network, the first dead hidden layer (1-based) or 0 when none is dead.
    """
    t = weights[0].shape[0]
    h = x if x.ndim == 3 else np.broadcast_to(x, (t,) + x.shape)
    layer = np.zeros(t, dtype=np.int64)
    for l in range(len(weights) - 1):
        h = relu(np.matmul(h, weights[l].transpose(0, 2, 1)) + biases[l][:, None, :])
        dead = (layer == 0) & ~h.any(axis=(1, 2))
        layer[dead] = l + 1
    return layer


# -- Monte Carlo ------------------------------------------------------------

@dataclass(frozen=True)
class BDPEstimate:
    trials: int
    dead: int
    p_hat: float
    ci95: tuple

    @property
    def se(self) -> float:
        return binomial_se(self.p_hat, self.trials)


def _count_chunk(arch, scheme, x, streams, start, stop) -> int:
    if arch.depth < 2:
        return 0
    draws = [scheme.draw(arch, streams.stream(t)) for t in range(start, stop)]
    weights = [np.stack(ws) for ws in zip(*(d[0] for d in draws))]
    biases = [np.stack(bs) for bs in zip(*(d[1] for d in draws))]
    return int(np.count_nonzero(first_dead_layers(weights, biases, x)))


def estimate_bdp(arch: Architecture, scheme: InitScheme, data=None, trials: int = 10_000,
                 seed: int = 0, jobs: int = 1) -> BDPEstimate:
    """Fraction of ``trials`` independent initializations that are born dead.

    Trial ``t`` uses generator ``SeedStreams(seed).stream(t)``, so the count
    does not depend on ``jobs``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    x = _dataset(data if data is not None else default_data(arch.d_in)).inputs
    if x.shape[1] != arch.d_in:
        raise ValueError(f"data dimension {x.shape[1]} != d_in {arch.d_in}")
    streams = SeedStreams(seed)
    bounds = [(s, min(s + CHUNK, trials)) for s in range(0, trials, CHUNK)]
    if jobs == 1 or len(bounds) == 1:
        counts = [_count_chunk(arch, scheme, x, streams, a, b) for a, b in bounds]
    else:
        counts = Parallel(n_jobs=jobs)(
            delayed(_count_chunk)(arch, scheme, x, streams, a, b) for a, b in bounds)
    dead = sum(counts)
    return BDPEstimate(trials, dead, dead / trials, wilson(dead, trials))


# -- closed forms -----------------------------------------------------------

def upper_bound_sym(widths: Sequence[int]) -> float:
    """``1 - prod(1 - 2**-N_l)`` over the hidden widths; 0 for no hidden layer."""
    return 1.0 - math.prod(1.0 - 0.5 ** n for n in widths)


def lower_bound_d1(L: int, N: int) -> float:
    """Closed-form lower bound on the BDP of a bias-free width-N net with d_in = 1."""
    if L < 2:
        raise ValueError("the lower bound needs L >= 2")
    a1 = 1.0 - 0.5 ** N
    a2 = 1.0 - 0.5 ** (N - 1) - (N - 1) * 0.25 ** N
    c = (1.0 - 2.0 ** (1 - N)) * (1.0 - 2.0 ** -N) / (1.0 + (N - 1) * 2.0 ** -N)
    p1, p2 = a1 ** (L - 2), a2 ** (L - 2)
    return 1.0 - p1 + c * (p2 - p1)


def transition_matrix(N: int) -> np.ndarray:
    """3-state chain over {dead, one arm alive, both arms alive} for d_in = 1."""
    h, q = 0.5 ** N, 0.25 ** N
    return np.array([
        [1.0, 0.0, 0.0],
        [h, 1.0 - h, 0.0],
        [q, 2.0 * h + (N - 2) * q, 1.0 - 2.0 * h - (N - 1) * q],
    ])


def plow_markov_oracle(L: int, N: int) -> float:
    if L < 2:
        raise ValueError("the chain starts at L = 2")
    pi1 = np.array([0.0, 2.0 ** (1 - N), 1.0 - 2.0 ** (1 - N)])
    return float((pi1 @ np.linalg.matrix_power(transition_matrix(N), L - 2))[0])


@dataclass(frozen=True)
class BoundsRow:
    L: int
    N: int
    p_upper: float
    p_lower: float
    p_markov: float


def bounds_table(widths: Sequence[int], depths: Sequence[int]) -> list:
    return [
        BoundsRow(L, N, upper_bound_sym([N] * (L - 1)), lower_bound_d1(L, N), plow_markov_oracle(L, N))
        for N in widths for L in depths if L >= 2
    ]


def safe_width(L: int, delta: float) -> int:
    """Smallest constant width whose symmetric BDP bound L * 2**-N is at most delta."""
    if L < 1 or not 0 < delta < 1:
        raise ValueError("need L >= 1 and 0 < delta < 1")
    if L == 1:
        return max(math.ceil(math.log2(1.0 / delta)), 1)
    return math.ceil(math.log2(L / delta))


def max_depth(N: int, delta: float) -> int:
    """Largest depth L with L * 2**-N <= delta."""
    if N < 1 or not 0 < delta < 1:
        raise ValueError("need N >= 1 and 0 < delta < 1")
    return math.floor(delta * 2 ** N)


def quadrant_prob(v1, v2, samples: int, rng) -> float:
    """Monte-Carlo P(<w, v1> > 0, <w, v2> < 0) for standard Gaussian rows w."""
    v1, v2 = np.asarray(v1, float), np.asarray(v2, float)
    w = rng.standard_normal((samples, v1.shape[0]))
    return float(np.mean((w @ v1 > 0) & (w @ v2 < 0)))


def quadrant_prob_estimate(N: int, samples: int = 10_000, rng=None, pairs: int = 1000) -> float:
    """Largest quadrant probability seen over random nonnegative vector pairs.

    The vectors have |N(0, 1)| entries, so every pair is nonzero and in the
    closed positive orthant.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = rng if isinstance(rng, np.random.Generator) else SeedStreams(rng or 0).stream(0)
    best = 0.0
    for _ in range(pairs):
        v1, v2 = np.abs(rng.standard_normal((2, N)))
        best = max(best, quadrant_prob(v1, v2, samples, rng))
    return best
