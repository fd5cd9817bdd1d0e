"""Filler protocol, execution contexts, composition helpers and stress fillers.

A filler is a generator-producing object: ``play(ctx, cups)`` yields one
:class:`FillMove` per round and returns its designated output cup (or any
other result) through ``StopIteration``. Sub-strategies compose with
``yield from``.

Oblivious fillers get an :class:`ObliviousContext`, which has no handle on
the cups' fills or on the emptier's moves. Adaptive fillers get an
:class:`AdaptiveContext`; the engine refreshes ``state`` and ``last_empty``
before resuming them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Generator, Optional

import numpy as np

from ..core import CupState, EmptyMove, FillMove

Play = Generator[FillMove, None, object]


@dataclass
class ObliviousContext:
    n: int
    N: int
    rng: np.random.Generator
    memory: dict = field(default_factory=dict)
    # Anchor sets currently being fed one unit per round, outermost first.
    anchors: list = field(default_factory=list)
    round: int = 0


@dataclass
class AdaptiveContext(ObliviousContext):
    state: Optional[CupState] = None
    last_empty: Optional[EmptyMove] = None


class FillerStrategy:
    adaptive: bool = False
    name: str = "filler"

    def play(self, ctx: ObliviousContext, cups: list) -> Play:
        raise NotImplementedError

    def describe(self) -> str:
        return self.name

    def __repr__(self):
        return f"<{type(self).__name__} {self.describe()}>"


def anchored(gen: Play, anchors: list) -> Play:
    """Run ``gen`` while pouring one unit per round into every cup of ``anchors``.

    ``anchors`` is read afresh each round, so callers may mutate it between
    rounds.
    """
    try:
        move = next(gen)
    except StopIteration as stop:
        return stop.value
    while True:
        yield move.with_units(anchors)
        try:
            move = gen.send(None)
        except StopIteration as stop:
            return stop.value


class Repeat(FillerStrategy):
    """Restart ``inner`` on all cups whenever it finishes.

    If a run makes no moves at all, one idle round is played (a single unit
    into the least full cup, or a rotating cup for oblivious fillers) so the
    game keeps advancing.
    """

    def __init__(self, inner: FillerStrategy):
        self.inner = inner
        self.adaptive = inner.adaptive
        self.name = f"repeat({inner.describe()})"
        self.guarantee = getattr(inner, "guarantee", None)

    def play(self, ctx, cups):
        idle = 0
        while True:
            played = yield from _counted(self.inner.play(ctx, cups))
            if played == 0:
                if self.adaptive:
                    c = ctx.state.order(cups)[-1]
                else:
                    c = cups[idle % len(cups)]
                idle += 1
                yield FillMove({c: 1}, 1)


def _counted(gen: Play) -> Play:
    n = 0
    try:
        move = next(gen)
    except StopIteration:
        return 0
    while True:
        yield move
        n += 1
        try:
            move = gen.send(None)
        except StopIteration:
            return n


class UniformFill(FillerStrategy):
    """Pour ``p = floor(n/2)`` units evenly over all cups, forever."""

    name = "uniform"

    def play(self, ctx, cups):
        m = len(cups)
        p = m // 2
        if p == 0:
            return None
        share = Fraction(p, m)
        move = FillMove({c: share for c in cups}, p)
        while True:
            yield move


class RandomFiller(FillerStrategy):
    """Random processor count each round, random legal split with full budget.

    Amounts live on the grid ``1/denom``.
    """

    name = "random"

    def __init__(self, denom: int = 8):
        self.denom = denom

    def describe(self):
        return f"random:denom={self.denom}"

    def play(self, ctx, cups):
        m = len(cups)
        D = self.denom
        rng = ctx.rng
        while True:
            p = int(rng.integers(1, m + 1))
            target = p * D
            w = rng.random(m)
            units = np.minimum(np.floor(w * (target / w.sum())), D).astype(np.int64).tolist()
            short = target - sum(units)
            if short > 0:
                for i in rng.permutation(m).tolist():
                    take = min(D - units[i], short)
                    units[i] += take
                    short -= take
                    if short == 0:
                        break
            yield FillMove({cups[i]: u for i, u in enumerate(units) if u}, p, D)


class OscillatingFiller(FillerStrategy):
    """Adaptive stress filler that sweeps ``p_t`` up and down between 1 and n-1.

    Each round it pours one unit into ranks ``2..p_t+1``, so a greedy emptier
    that takes ranks ``1..p_t`` always leaves freshly filled cups standing.
    """

    adaptive = True
    name = "oscillating"

    def play(self, ctx, cups):
        m = len(cups)
        if m < 2:
            return None
        top = m - 1
        period = max(1, 2 * (top - 1))
        t = 0
        while True:
            phase = t % period
            p = 1 + (phase if phase < top else period - phase)
            p = max(1, min(p, top))
            order = ctx.state.order(cups)
            yield FillMove({c: 1 for c in order[1:p + 1]}, p)
            t += 1


class ScriptedFiller(FillerStrategy):
    """Replays a fixed list of moves (testing aid)."""

    name = "scripted"

    def __init__(self, moves):
        self.moves = list(moves)

    def play(self, ctx, cups):
        for move in self.moves:
            yield move
