"""Seed streams: every trial gets its own generator derived from a master seed.

The per-trial seed is ``splitmix64(splitmix64(master) ^ index)`` computed in
64-bit unsigned arithmetic, then fed to a PCG64 bit generator.  Trial ``t``
therefore draws the same numbers no matter how trials are scheduled.
"""

from __future__ import annotations

import os

import numpy as np

_MASK = (1 << 64) - 1
DEFAULT_SEED = 0
SEED_ENV = "RELU_LAB_SEED"


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def mix(master_seed: int, index: int) -> int:
    return splitmix64(splitmix64(int(master_seed) & _MASK) ^ (int(index) & _MASK))


class SeedStreams:
    """Deterministic family of independent generators indexed by trial number."""

    def __init__(self, master_seed: int = DEFAULT_SEED):
        self.master_seed = int(master_seed)

    def seed(self, index: int) -> int:
        return mix(self.master_seed, index)

    def stream(self, index: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed(index)))

    def child(self, index: int) -> "SeedStreams":
        """A new family, e.g. one per sweep cell, that does not overlap this one."""
        return SeedStreams(self.seed(index) ^ 0xD1B54A32D192ED03)

    def __repr__(self):
        return f"SeedStreams({self.master_seed})"


def check_random_state(rng) -> np.random.Generator:
    """Accept a Generator, an integer seed, or None (fresh entropy)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, (int, np.integer)):
        return SeedStreams(int(rng)).stream(0)
    raise TypeError(f"cannot build a generator from {rng!r}")


def master_seed_from_env(default: int = DEFAULT_SEED) -> int:
    value = os.environ.get(SEED_ENV)
    return int(value) if value not in (None, "") else default
