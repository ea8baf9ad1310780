"""Second-moment (length map) propagation under random initialization.

Tracks ``q_l(x) = ||N_l(x)||^2 / N_l`` layer by layer and checks the
constant-width interval recursion that motivates the RAI Gaussian scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .initializers import InitScheme
from .net import ActivationTrace, Architecture, relu
from .rng import SeedStreams
from .stats import mean_ci


@dataclass(frozen=True)
class LayerQ:
    layer: int
    mean_q: float
    ci95: tuple
    trials: int


@dataclass(frozen=True)
class LengthStats:
    layers: tuple
    widths: tuple = ()

    def __getitem__(self, i):
        return self.layers[i]

    def __len__(self):
        return len(self.layers)

    @property
    def mean_q(self) -> np.ndarray:
        return np.array([s.mean_q for s in self.layers])


def q_of(trace: ActivationTrace, widths: Optional[Sequence[int]] = None) -> list:
    """Normalized squared length of each layer's pre-activation."""
    out = []
    for l, z in enumerate(trace.pre):
        n = widths[l + 1] if widths is not None else z.shape[-1]
        out.append(float(np.dot(z, z)) / n)
    return out


def sample_q(arch: Architecture, scheme: InitScheme, x, trials: int, seed: int = 0) -> np.ndarray:
    """(trials, L) array of q values at input ``x``, one row per initialization."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != arch.d_in:
        raise ValueError(f"input dimension {x.shape[1]} != d_in {arch.d_in}")
    streams = SeedStreams(seed)
    draws = [scheme.draw(arch, streams.stream(t)) for t in range(trials)]
    q = np.empty((trials, arch.depth))
    h = np.broadcast_to(x, (trials, 1, arch.d_in))
    for l in range(arch.depth):
        w = np.stack([d[0][l] for d in draws])
        b = np.stack([d[1][l] for d in draws])
        z = np.matmul(h, w.transpose(0, 2, 1)) + b[:, None, :]
        q[:, l] = np.einsum("tij,tij->t", z, z) / w.shape[1]
        h = relu(z)
    return q


def estimate_lengthmap(arch: Architecture, scheme: InitScheme, x=None, trials: int = 10_000,
                       seed: int = 0) -> LengthStats:
    """Monte-Carlo mean of q at every layer over independent initializations.

    ``x`` defaults to the all-ones vector scaled to unit norm.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if x is None:
        x = np.ones(arch.d_in) / math.sqrt(arch.d_in)
    q = sample_q(arch, scheme, x, trials, seed)
    mean, low, high = mean_ci(q, axis=0)
    return LengthStats(tuple(
        LayerQ(l + 1, float(mean[l]), (max(float(low[l]), 0.0), float(high[l])), trials)
        for l in range(arch.depth)
    ), arch.widths)


@dataclass(frozen=True)
class MomentBounds:
    N: int
    mu1: float
    mu2: float
    sigma_w: float
    sigma_b2: float
    A_low: float
    A_upp: float

    def predicted(self, q_prev_low: float, q_prev_high: float) -> tuple:
        """Interval for E[q_{l+1}] given E[q_l] in [q_prev_low, q_prev_high]."""
        return (self.A_low / 2 * q_prev_low + self.sigma_b2,
                self.A_upp / 2 * q_prev_high + self.sigma_b2)

    @property
    def fixed_point(self) -> float:
        """Fixed point of the upper recursion (finite when A_upp < 2)."""
        return self.sigma_b2 / (1.0 - self.A_upp / 2)


def moment_bounds(N: int, mu1: float, mu2: float, sigma_w: float) -> MomentBounds:
    if not (N > 0 and mu1 > 0 and mu2 > 0 and sigma_w > 0):
        raise ValueError("all inputs must be positive")
    sigma_b2 = (mu2 + sigma_w ** 2) / (N + 1)
    a_low = N * (mu2 + sigma_w ** 2) / (N + 1)
    a_upp = N * (sigma_w ** 2 + 2 * math.sqrt(2 / math.pi) * mu1 * sigma_w + 2 * mu2) / (N + 1)
    return MomentBounds(N, mu1, mu2, sigma_w, sigma_b2, a_low, a_upp)


@dataclass(frozen=True)
class Verdict:
    layer: int          # the layer whose mean is being predicted
    pred_low: float
    pred_high: float
    passed: bool


def check_recursion(stats: LengthStats, bounds: MomentBounds, start: int = 2) -> list:
    """Test each transition ``l -> l+1`` for ``l >= start``.

    Passes when the 95% interval of ``E[q_{l+1}]`` meets the predicted
    interval computed from the 95% interval of ``E[q_l]``.
    """
    by_layer = {s.layer: s for s in stats.layers}
    if start not in by_layer:
        raise ValueError(f"statistics do not cover layer {start}")
    if stats.widths and any(stats.widths[l] != bounds.N for l in by_layer if l >= start - 1):
        raise ValueError(f"bounds are for width {bounds.N}, statistics have widths {stats.widths}")
    verdicts = []
    l = start
    while l + 1 in by_layer:
        prev, nxt = by_layer[l], by_layer[l + 1]
        if prev.trials != nxt.trials:
            raise ValueError("layers were estimated from different trial counts")
        lo, hi = bounds.predicted(*prev.ci95)
        ok = nxt.ci95[1] >= lo and nxt.ci95[0] <= hi
        verdicts.append(Verdict(l + 1, lo, hi, bool(ok)))
        l += 1
    return verdicts
