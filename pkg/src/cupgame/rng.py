"""Replayable random streams keyed by (master seed, trial, consumer).

Philox is counter-based, so each consumer's stream is independent of how
much randomness the others draw. Swapping the emptier never perturbs the
filler's draws.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

FILLER = 0
EMPTIER = 1
START = 2

_PERTURB_BITS = 32


def stream(seed: int, trial: int, consumer: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed & (2**64 - 1), spawn_key=(trial, consumer))
    return np.random.Generator(np.random.Philox(ss))


def uniform_fraction(rng: np.random.Generator, upper: Fraction = Fraction(1)) -> Fraction:
    """A rational drawn uniformly from the grid ``upper * j / 2**32``, ``j < 2**32``."""
    j = int(rng.integers(0, 2**_PERTURB_BITS))
    return upper * Fraction(j, 2**_PERTURB_BITS)


def perturbation_units(rng: np.random.Generator, size: int) -> list:
    """``size`` grid points ``j`` with the perturbation being ``delta * j / 2**32``."""
    return [int(x) for x in rng.integers(0, 2**_PERTURB_BITS, size=size, dtype=np.uint64)]


PERTURB_DENOM = 2**_PERTURB_BITS
