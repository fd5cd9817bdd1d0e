"""Adaptive filling strategies: the two-cup base step, amplification, and recursion chains.

All strategies treat the current mean fill of the cups they are handed as
their zero, so a strategy can run on a subset of cups in the middle of a
larger game without any renormalization of state.
"""
from __future__ import annotations

from fractions import Fraction
from math import ceil

from ..core import ConfigError, FillMove, NonTermination, compare_scaled
from ..guarantees import (
    amplify_adaptive,
    split,
    trivalg_guarantee,
)
from .base import FillerStrategy

HALF = Fraction(1, 2)


PLACEMENTS = ("grid", "literal")


class TrivAlg(FillerStrategy):
    """One round, one processor: leave both of the two fullest cups at mean + 1/2 or more.

    With the fullest cup ``lead`` above the mean and the runner-up ``second``
    above it (``second >= -lead`` since the mean is the zero), any pour ``x``
    into the fullest and ``1 - x`` into the runner-up with
    ``1/2 - lead <= x <= 1/2 + second`` works. ``"literal"`` takes the left
    end. ``"grid"`` takes the smallest admissible multiple of ``1/scale``,
    then of ``1/(2 scale)``, and only falls back to the left end when the
    interval holds neither; this keeps exact denominators from picking up a
    factor of the subset size every round.
    """

    adaptive = True
    name = "trivalg"

    def __init__(self, max_n: int = 64, placement: str = "grid"):
        if placement not in PLACEMENTS:
            raise ConfigError(f"placement must be one of {', '.join(PLACEMENTS)}, got {placement!r}")
        self.placement = placement
        self.guarantee = trivalg_guarantee(max_n)

    def describe(self):
        return self.name if self.placement == "grid" else f"{self.name}:placement={self.placement}"

    def play(self, ctx, cups):
        if len(cups) < 2:
            return cups[0] if cups else None
        st = ctx.state
        m = len(cups)
        a, b = st.order(cups)[:2]
        if st.exact:
            # lead = excess / unit, second = runner / unit
            total = st.raw_sum(cups)
            unit = m * st.scale
            excess = m * st.raw[a] - total
            if 2 * excess >= unit:
                return a
            lo = unit - 2 * excess  # x >= lo / (2 unit)
            hi = min(unit + 2 * (m * st.raw[b] - total), 2 * unit)  # x <= hi / (2 unit)
            yield self._pour(a, b, lo, hi, m, st.scale)
        else:
            lead = st.fill(a) - st.mean(cups)
            if lead >= 0.5:
                return a
            yield FillMove({a: 0.5 - lead, b: 0.5 + lead}, 1)
        st = ctx.state
        return a if st.raw[a] >= st.raw[b] else b

    def _pour(self, a, b, lo, hi, m, scale) -> FillMove:
        if self.placement == "grid":
            for den in (scale, 2 * scale):
                # x = k / den, and lo/(2 unit) = lo / (2 m scale)
                per = 2 * m * scale // den
                k = -(-lo // per)
                if k * per <= hi:
                    return FillMove({a: k, b: den - k}, 1, den)
        two_unit = 2 * m * scale
        return FillMove({a: lo, b: two_unit - lo}, 1, two_unit)


class Capped(FillerStrategy):
    """Same moves as ``inner``; advertises a guarantee clipped at ``limit``."""

    adaptive = True

    def __init__(self, inner: FillerStrategy, limit):
        self.inner = inner
        self.adaptive = inner.adaptive
        self.limit = Fraction(limit)
        self.guarantee = inner.guarantee.capped(self.limit)
        self.name = f"cap({inner.describe()},{self.limit})"

    def play(self, ctx, cups):
        return (yield from self.inner.play(ctx, cups))


class Amplified(FillerStrategy):
    """Amplification of an adaptive strategy with anchor fraction ``delta``.

    Step 1 keeps the ``ceil(delta*n)`` fullest cups as an anchor set ``A``,
    feeding each one unit per round, while the inner strategy runs on the
    rest. When an application finishes without the emptier ever skipping an
    anchor cup, its output cup replaces the least full anchor cup if it is
    fuller. Step 1 ends the moment ``mean(A)`` reaches the starting mean plus
    ``(n_B/n) * f(n_B)``. Step 2 runs the inner strategy on ``A``.
    """

    adaptive = True

    def __init__(self, inner: FillerStrategy, delta, max_n: int):
        self.inner = inner
        self.delta = Fraction(delta)
        self.guarantee = amplify_adaptive(inner.guarantee, self.delta, max_n)
        self.depth = getattr(inner, "depth", 0) + 1
        self.name = f"amplify[{self.depth}]:delta={self.delta}"
        self._resolved = {}

    def resolve(self, n: int) -> FillerStrategy:
        """The strategy actually run on ``n`` cups after following delegations."""
        s = self._resolved.get(n)
        if s is None:
            s = self
            while isinstance(s, Amplified) and s.guarantee.delegates(n):
                s = s.inner
            self._resolved[n] = s
        return s

    def play(self, ctx, cups):
        n = len(cups)
        if n > self.guarantee.max_n:
            raise ConfigError(f"{self.name} built for at most {self.guarantee.max_n} cups, got {n}")
        s = self.resolve(n)
        if s is not self:
            return (yield from s.play(ctx, cups))
        return (yield from self._amplify(ctx, cups))

    def _amplify(self, ctx, cups):
        inner = self.inner
        n = len(cups)
        n_a, n_b = split(n, self.delta)
        st = ctx.state
        ranked = st.order(cups)
        anchor, rest = ranked[:n_a], ranked[n_a:]
        gain = Fraction(n_b, n) * inner.guarantee.at(n_b)
        cap = 2 * self.guarantee.rounds(n)
        used = 0
        if st.exact:
            # mean(A) >= mean(cups) + gain, cleared of denominators:
            # sum(A) * n * gd over scale  vs  (sum(cups) * gd + gn * n * scale) * n_a over scale0
            gn, gd = gain.numerator, gain.denominator
            scale0 = st.scale
            rhs = (st.raw_sum(cups) * gd + gn * n * scale0) * n_a

            def reached():
                s = ctx.state
                return compare_scaled(s.raw_sum(anchor) * n * gd, s.scale, rhs, scale0) >= 0
        else:
            target = st.mean(cups) + float(gain)

            def reached():
                return ctx.state.mean(anchor) >= target

        ctx.anchors.append(anchor)
        try:
            while not reached():
                gen = inner.play(ctx, list(rest))
                played = 0
                clean = True
                out = None
                hit = False
                try:
                    move = next(gen)
                except StopIteration as stop:
                    out = stop.value
                else:
                    while True:
                        yield move.with_units(anchor)
                        used += 1
                        played += 1
                        if used > cap:
                            gen.close()
                            raise NonTermination(
                                f"{self.name} on {n} cups: step 1 passed {cap} rounds; "
                                f"mean(A) has not gained {gain} over the starting mean"
                            )
                        if not set(anchor) <= set(ctx.last_empty.cups):
                            clean = False
                        if reached():
                            gen.close()
                            hit = True
                            break
                        try:
                            move = gen.send(None)
                        except StopIteration as stop:
                            out = stop.value
                            break
                if hit:
                    break
                if not clean:
                    continue
                st = ctx.state
                low = st.order(anchor)[-1]
                if out is not None and st.raw[out] > st.raw[low]:
                    anchor[anchor.index(low)] = out
                    rest[rest.index(out)] = low
                elif played == 0:
                    # Nothing moved and nothing will: the inner strategy
                    # declines to play on B and no swap helps.
                    break
        finally:
            ctx.anchors.pop()
        return (yield from inner.play(ctx, list(anchor)))


class Chain(FillerStrategy):
    """A named recursion chain; plays its top strategy and carries build metadata."""

    def __init__(self, top: FillerStrategy, name: str, meta: dict):
        self.top = top
        self.adaptive = top.adaptive
        self.guarantee = top.guarantee
        self.name = name
        self.meta = meta

    def play(self, ctx, cups):
        return (yield from self.top.play(ctx, cups))


def trivalg2(max_n: int, placement: str = "grid") -> FillerStrategy:
    return Amplified(Amplified(TrivAlg(max_n, placement), HALF, max_n), HALF, max_n)


LINEAR_BASE = 8


def build_linear_strategy(n: int, placement: str = "grid") -> Chain:
    """Chain with anchor fractions 1/2, 1/3, ... on top of trivalg2 (clipped to 1)."""
    if n < LINEAR_BASE:
        raise ConfigError(f"linear chain needs at least {LINEAR_BASE} cups, got {n}")
    levels = max(0, n // LINEAR_BASE - 1)
    s = Capped(trivalg2(n, placement), 1)
    for i in range(1, levels + 1):
        s = Amplified(s, Fraction(1, i + 1), n)
    return Chain(s, "adaptive-linear", {"levels": levels, "base_size": LINEAR_BASE})


def _pow_ge(x: Fraction, num: int, den: int, y: Fraction) -> bool:
    """Exact test of ``x**(num/den) >= y`` for ``x, y > 0``."""
    return x**num >= y**den


def ceil_root_power(k: int, num: int, den: int) -> int:
    """Smallest integer ``m`` with ``m >= k**(num/den)``."""
    m = max(1, int(k ** (num / den)) - 2)
    while m**den < k**num:
        m += 1
    while m > 1 and (m - 1) ** den >= k**num:
        m -= 1
    return m


def poly_delta(eps) -> Fraction:
    """Largest power of two ``delta <= 1/2`` with ``1-(2-eps)delta+delta^(1-eps)/2 >= 1``."""
    eps = Fraction(eps)
    if not 0 < eps < HALF:
        raise ConfigError(f"eps must lie in (0, 1/2), got {eps}")
    # equivalent to (1/delta)^eps >= 2(2-eps)
    need = 2 * (2 - eps)
    delta = HALF
    while not _pow_ge(1 / delta, eps.numerator, eps.denominator, need):
        delta /= 2
    return delta


def growth_sequence(g0: int, delta: Fraction, count: int) -> list:
    g = [g0]
    for _ in range(count):
        g.append(int(Fraction(g[-1]) / (1 - delta)))
    return g


def levels_for(n: int, delta: Fraction) -> int:
    """``ceil(log_{1/(1-delta)} n)``, computed exactly."""
    ratio = 1 / (1 - delta)
    i, acc = 0, Fraction(1)
    while acc < n:
        acc *= ratio
        i += 1
    return i


def poly_plan(eps, n: int) -> dict:
    eps = Fraction(eps)
    delta = poly_delta(eps)
    levels = levels_for(n, delta)
    g0 = ceil(16 / delta)
    root = ceil_root_power(g0, eps.denominator - eps.numerator, eps.denominator)
    c = Fraction(3, 2 * root)
    return {"eps": eps, "delta": delta, "levels": levels, "g0": g0, "c": c}


def build_poly_strategy(eps, n: int, placement: str = "grid") -> Chain:
    """Constant-fraction chain: trivalg amplified ``ceil(log_{1/(1-delta)} n)`` times."""
    plan = poly_plan(eps, n)
    s = TrivAlg(n, placement)
    for _ in range(plan["levels"]):
        s = Amplified(s, plan["delta"], n)
    g = growth_sequence(plan["g0"], plan["delta"], plan["levels"])
    plan["g_head"], plan["g_last"] = g[:4], g[-1]
    return Chain(s, f"adaptive-poly:eps={plan['eps']}", plan)


def poly_claim_failures(eps, levels: int) -> list:
    """Sizes ``k <= g_i`` where ``f_i(k) < c*k^(1-eps) - 1``, for ``i <= levels``.

    The maps are built directly (no strategies) up to ``g_levels``.
    """
    plan = poly_plan(eps, 2)
    delta, c = plan["delta"], plan["c"]
    a, b = plan["eps"].numerator, plan["eps"].denominator
    g = growth_sequence(plan["g0"], delta, levels)
    guar = trivalg_guarantee(g[-1])
    bad = []
    for i in range(levels + 1):
        if i:
            guar = amplify_adaptive(guar, delta, g[-1])
        for k in range(1, g[i] + 1):
            # f + 1 >= c k^((b-a)/b)  <=>  ((f+1)/c)^b >= k^(b-a)
            if ((guar.f[k] + 1) / c) ** b < Fraction(k) ** (b - a):
                bad.append((i, k, guar.f[k]))
    return bad
