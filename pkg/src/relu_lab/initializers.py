"""Weight initialization schemes, including the randomized asymmetric one (RAI).

Every scheme is a small frozen dataclass with ``sample(arch, rng) -> Params``.
The module-level ``*_init`` functions are thin wrappers for one-off use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .net import Architecture, Params
from .rng import check_random_state


def sigma_w_from_moments(mu1: float, mu2: float) -> float:
    """Gaussian scale for RAI that puts the length-map growth factor at N/(N+1).

    Solves ``s**2 + 2*sqrt(2/pi)*mu1*s + 2*mu2 = 2`` for its positive root.
    """
    if not mu2 < 1:
        raise ValueError(f"second moment must be < 1, got {mu2}")
    if not (mu1 > 0 and mu2 > 0):
        raise ValueError("moments must be positive")
    a = mu1 / math.sqrt(math.pi)
    return math.sqrt(2.0) * (-a + math.sqrt(a * a + 1.0 - mu2))


@dataclass(frozen=True)
class Beta21:
    """Beta(2, 1) on [0, 1]: density 2x, sampled as sqrt(U)."""

    upper: float = 1.0
    mu1: float = 2.0 / 3.0
    mu2: float = 0.5

    def sample(self, rng, size=None):
        return np.sqrt(rng.random(size))


def sample_beta21(rng, size=None):
    return Beta21().sample(check_random_state(rng), size)


class InitScheme:
    """Base class; subclasses implement ``draw``."""

    name = "base"
    symmetric = False
    bias_free = False

    def draw(self, arch: Architecture, rng: np.random.Generator) -> tuple:
        raise NotImplementedError

    def sample(self, arch: Architecture, rng=None) -> Params:
        weights, biases = self.draw(arch, check_random_state(rng))
        return Params(tuple(weights), tuple(biases))

    def config(self) -> dict:
        return {"name": self.name}


def _he_layers(shapes, rng, bias_const=0.0):
    weights, biases = [], []
    for n_out, n_in in shapes:
        weights.append(rng.normal(0.0, math.sqrt(2.0 / n_in), size=(n_out, n_in)))
        biases.append(np.full(n_out, float(bias_const)))
    return weights, biases


@dataclass(frozen=True)
class He(InitScheme):
    """W ~ N(0, 2/fan_in); every bias set to ``bias_const``."""

    bias_const: float = 0.0
    name = "he"

    @property
    def symmetric(self):
        return self.bias_const == 0.0

    @property
    def bias_free(self):
        return self.bias_const == 0.0

    def draw(self, arch, rng):
        return _he_layers(arch.shapes, rng, self.bias_const)

    def config(self):
        return {"name": self.name, "bias": self.bias_const}


@dataclass(frozen=True)
class SymmetricUniform(InitScheme):
    """Weights and biases ~ U(-h, h); ``h=None`` uses sqrt(6/fan_in)."""

    half_width: Optional[float] = None
    name = "sym-uniform"
    symmetric = True

    def __post_init__(self):
        if self.half_width is not None and not self.half_width > 0:
            raise ValueError("half_width must be positive")

    def draw(self, arch, rng):
        weights, biases = [], []
        for n_out, n_in in arch.shapes:
            h = self.half_width if self.half_width is not None else math.sqrt(6.0 / n_in)
            weights.append(rng.uniform(-h, h, size=(n_out, n_in)))
            biases.append(rng.uniform(-h, h, size=n_out))
        return weights, biases

    def config(self):
        return {"name": self.name, "half_width": self.half_width}


@dataclass(frozen=True)
class BiasFreeSymmetric(InitScheme):
    """W ~ N(0, std^2), biases exactly zero."""

    std: float = 1.0
    name = "bias-free-sym"
    symmetric = True
    bias_free = True

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError("std must be positive")

    def draw(self, arch, rng):
        weights = [rng.normal(0.0, self.std, size=s) for s in arch.shapes]
        biases = [np.zeros(s[0]) for s in arch.shapes]
        return weights, biases

    def config(self):
        return {"name": self.name, "std": self.std}


def _orthogonal(n_out, n_in, rng):
    k = max(n_out, n_in)
    q, r = np.linalg.qr(rng.standard_normal((k, k)))
    q = q * np.sign(np.diag(r))
    return q[:n_out, :n_in]


@dataclass(frozen=True)
class Orthogonal(InitScheme):
    """Slice of a Haar-orthogonal matrix scaled by ``gain``; biases zero."""

    gain: float = math.sqrt(2.0)
    name = "orthogonal"
    bias_free = True

    def __post_init__(self):
        if not self.gain > 0:
            raise ValueError("gain must be positive")

    def draw(self, arch, rng):
        weights = [self.gain * _orthogonal(n_out, n_in, rng) for n_out, n_in in arch.shapes]
        biases = [np.zeros(s[0]) for s in arch.shapes]
        return weights, biases

    def config(self):
        return {"name": self.name, "gain": self.gain}


@dataclass(frozen=True)
class RAI(InitScheme):
    """Randomized asymmetric initialization.

    Layer 1 is He-initialized with zero bias.  For every later layer, each
    row of the augmented matrix ``[W | b]`` gets one uniformly chosen slot
    drawn from ``dist`` (nonnegative) and N(0, sigma_w^2 / fan_in) elsewhere.
    """

    dist: Beta21 = field(default_factory=Beta21)
    sigma_w: Optional[float] = None
    name = "rai"

    def __post_init__(self):
        if self.sigma_w is None:
            object.__setattr__(self, "sigma_w", sigma_w_from_moments(self.dist.mu1, self.dist.mu2))
        if not self.sigma_w > 0:
            raise ValueError("sigma_w must be positive")

    def draw(self, arch, rng):
        if arch.depth < 2:
            raise ValueError("RAI needs at least one hidden layer (depth >= 2)")
        shapes = arch.shapes
        weights, biases = _he_layers(shapes[:1], rng)
        for n_out, n_in in shapes[1:]:
            v = rng.normal(0.0, self.sigma_w / math.sqrt(n_in), size=(n_out, n_in + 1))
            slot = rng.integers(0, n_in + 1, size=n_out)
            v[np.arange(n_out), slot] = self.dist.sample(rng, n_out)
            weights.append(v[:, :n_in])
            biases.append(v[:, n_in])
        return weights, biases

    def config(self):
        return {"name": self.name, "dist": "beta21", "sigma_w": self.sigma_w}


def he_init(arch, rng=None, bias_const=0.0) -> Params:
    return He(bias_const).sample(arch, rng)


def symmetric_uniform_init(arch, rng=None, half_width=None) -> Params:
    return SymmetricUniform(half_width).sample(arch, rng)


def bias_free_symmetric_init(arch, rng=None, std=1.0) -> Params:
    return BiasFreeSymmetric(std).sample(arch, rng)


def orthogonal_init(arch, rng=None, gain=math.sqrt(2.0)) -> Params:
    return Orthogonal(gain).sample(arch, rng)


def rai_init(arch, rng=None, cfg: Optional[RAI] = None) -> Params:
    return (cfg or RAI()).sample(arch, rng)


SCHEMES = ("he", "bias-free-sym", "sym-uniform", "orthogonal", "rai")


def make_scheme(name: str, *, bias=0.0, half_width=None, std=1.0, gain=math.sqrt(2.0), sigma_w=None) -> InitScheme:
    """Build a scheme from its CLI name; unused keyword arguments are ignored."""
    if name == "he":
        return He(float(bias))
    if name == "bias-free-sym":
        return BiasFreeSymmetric(float(std))
    if name == "sym-uniform":
        return SymmetricUniform(half_width)
    if name == "orthogonal":
        return Orthogonal(float(gain))
    if name == "rai":
        return RAI(sigma_w=sigma_w)
    raise ValueError(f"unknown init scheme {name!r}; choose from {', '.join(SCHEMES)}")
