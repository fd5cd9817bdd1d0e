"""Emptying strategies: greedy, a randomized Delta-greedy-like family, and stress emptiers."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import CupState, EmptyMove, GameConfig, Phase
from .rng import PERTURB_DENOM, perturbation_units


@dataclass(frozen=True)
class DeltaGreedyWitness:
    round: int
    c1: int  # fuller cup, left alone
    c2: int  # emptier cup, emptied
    fill1: object
    fill2: object


def greedy_select(state: CupState, p: int) -> EmptyMove:
    return EmptyMove(tuple(sorted(state.ranking[:p])), 0)


def perturbed_order(state: CupState, delta, rng: np.random.Generator) -> list:
    """Cups ordered by fill plus an independent uniform draw from ``[0, delta)``."""
    n = state.n
    delta = Fraction(delta)
    if delta == 0:
        return list(state.ranking)
    js = perturbation_units(rng, n)
    raw = state.raw
    if state.exact:
        # (fill + delta*j/D) scaled by scale*delta.den*D
        a = delta.denominator * PERTURB_DENOM
        b = delta.numerator * state.scale
        keys = [raw[c] * a + js[c] * b for c in range(n)]
    else:
        d = float(delta) / PERTURB_DENOM
        keys = [raw[c] + js[c] * d for c in range(n)]
    return sorted(range(n), key=lambda c: (-keys[c], c))


def perturbed_delta_greedy_select(state: CupState, p: int, delta, rng) -> EmptyMove:
    order = perturbed_order(state, delta, rng)
    return EmptyMove(tuple(sorted(order[:p])), 0)


def uniform_random_valid(state: CupState, p: int, rng: np.random.Generator) -> EmptyMove:
    picks = rng.choice(state.n, size=p, replace=False)
    return EmptyMove(tuple(sorted(int(c) for c in picks)), 0)


def lazy_skipper(state: CupState, p: int, skip_prob, rng, skips_left: Optional[int] = None,
                 base: str = "uniform") -> EmptyMove:
    if base == "greedy":
        chosen = list(state.ranking[:p])
    else:
        chosen = [int(c) for c in rng.choice(state.n, size=p, replace=False)]
    coins = rng.random(p)
    kept, skipped = [], 0
    for c, u in zip(chosen, coins):
        if u < float(skip_prob) and (skips_left is None or skipped < skips_left):
            skipped += 1
        else:
            kept.append(c)
    return EmptyMove(tuple(sorted(kept)), skipped)


def check_delta_greedy(state: CupState, move: EmptyMove, delta) -> Optional[DeltaGreedyWitness]:
    """Witness a fuller-by-more-than-delta cup left alone while a lower one was emptied."""
    emptied = set(move.cups)
    if not emptied or len(emptied) == state.n:
        return None
    order = state.ranking
    c1 = next(c for c in order if c not in emptied)
    c2 = next(c for c in reversed(order) if c in emptied)
    raw = state.raw
    delta = Fraction(delta)
    if state.exact:
        violated = raw[c1] * delta.denominator > raw[c2] * delta.denominator + delta.numerator * state.scale
    else:
        violated = raw[c1] > raw[c2] + float(delta)
    if not violated:
        return None
    return DeltaGreedyWitness(state.round, c1, c2, state.fill(c1), state.fill(c2))


class EmptierStrategy:
    """An emptier bound to a kind and parameters; randomness comes in per call."""

    def __init__(self, kind: str = "greedy", delta=0, skip_prob=0, extra: int = 0, base: str = "uniform"):
        if kind not in ("greedy", "perturbed", "uniform", "lazy"):
            raise ValueError(f"unknown emptier kind {kind!r}")
        self.kind = kind
        self.delta = Fraction(delta)
        self.skip_prob = Fraction(skip_prob)
        self.extra = int(extra)
        self.base = base
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")

    @property
    def greedy_like_delta(self) -> Optional[Fraction]:
        """The Delta for which every move is provably Delta-greedy-like, if any."""
        if self.kind == "greedy":
            return Fraction(0)
        if self.kind == "perturbed":
            return self.delta
        if self.kind == "lazy" and self.base == "greedy" and self.skip_prob == 0:
            return Fraction(0)
        return None

    def _width(self, state: CupState, cfg: GameConfig) -> int:
        extra = min(self.extra, cfg.extra_budget - state.extra_used, state.n - state.p)
        return state.p + max(0, extra)

    def select(self, state: CupState, rng, cfg: GameConfig) -> EmptyMove:
        assert state.phase is Phase.INTERMEDIATE
        p = self._width(state, cfg)
        if self.kind == "greedy":
            return greedy_select(state, p)
        if self.kind == "perturbed":
            return perturbed_delta_greedy_select(state, p, self.delta, rng)
        if self.kind == "uniform":
            return uniform_random_valid(state, p, rng)
        left = None if cfg.skip_budget is None else cfg.skip_budget - state.skips_used
        move = lazy_skipper(state, p, self.skip_prob, rng, left, self.base)
        return EmptyMove(move.cups, max(0, state.p - len(move.cups)))

    def describe(self) -> str:
        parts = []
        if self.kind == "perturbed":
            parts.append(f"delta={self.delta}")
        if self.kind == "lazy":
            parts.append(f"skip={self.skip_prob}")
            if self.base != "uniform":
                parts.append(f"base={self.base}")
        if self.extra:
            parts.append(f"extra={self.extra}")
        return self.kind + (":" + ",".join(parts) if parts else "")

    def __repr__(self):
        return f"EmptierStrategy({self.describe()!r})"
