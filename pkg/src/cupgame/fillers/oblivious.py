"""Oblivious filling strategies.

None of these ever look at fills or at the emptier's moves: every decision
is a function of the strategy's parameters and its private random stream.
Parameters that would be astronomically large at realistic scale (sampling
range, flattening length, base-case size) are explicit desk-scale knobs in
:class:`DeskParams`; :func:`asymptotic_parameters` records the asymptotic
settings for reference without ever instantiating them.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from math import ceil
from typing import Optional

from ..core import ConfigError, FillMove
from ..guarantees import StrategyGuarantee, amplify_oblivious, split
from .base import FillerStrategy, anchored


def flatness_bound(delta) -> Fraction:
    """Fill-range that flattening can always reach against a delta-greedy-like emptier."""
    return 2 * (2 + Fraction(delta))


def harmonic_gain(k: int) -> Fraction:
    """Expected rise of a never-emptied survivor: 1/2 + 1/3 + ... + 1/k."""
    return sum((Fraction(1, i) for i in range(2, k + 1)), Fraction(0))


class FlatAlg(FillerStrategy):
    """Pour ``floor(m/2)`` units evenly over ``m`` cups for a fixed number of rounds.

    Given a known fill-range bound ``R`` already within the flatness bound,
    it plays nothing.
    """

    name = "flatalg"

    def __init__(self, rounds: int, R=None, delta=0):
        self.rounds = int(rounds)
        self.R = None if R is None else Fraction(R)
        self.delta = Fraction(delta)

    def describe(self):
        return f"flatalg:rounds={self.rounds}"

    def play(self, ctx, cups):
        if self.R is not None and self.R <= flatness_bound(self.delta):
            return None
        m = len(cups)
        p = m // 2
        if p == 0:
            return None
        move = FillMove({c: p for c in cups}, p, m)
        for _ in range(self.rounds):
            yield move
        return None


class RandAlg(FillerStrategy):
    """Single processor; spread one unit over a shrinking random active set.

    Starts from ``k`` random cups, and after each round drops one active cup
    chosen uniformly. After ``k-1`` rounds the survivor is returned.
    """

    name = "randalg"

    def __init__(self, k: int):
        if k < 1:
            raise ConfigError(f"randalg needs k >= 1, got {k}")
        self.k = int(k)

    def describe(self):
        return f"randalg:k={self.k}"

    def play(self, ctx, cups):
        k = self.k
        if k > len(cups):
            raise ConfigError(f"randalg:k={k} needs at least {k} cups, got {len(cups)}")
        rng = ctx.rng
        picks = sorted(int(i) for i in rng.choice(len(cups), size=k, replace=False))
        active = [cups[i] for i in picks]
        while len(active) > 1:
            share = Fraction(1, len(active))
            yield FillMove({c: share for c in active}, 1)
            active.pop(int(rng.integers(len(active))))
        return active[0]


class Rep(FillerStrategy):
    """Grow an anchor set by repeated donation from the non-anchor cups.

    For each of ``ceil(delta*n)`` donations, draw ``m0`` uniformly from
    ``1..M`` and ``m0`` times flatten the non-anchor cups then run ``inner``
    on them. The cup returned by the last run moves into the anchor set.
    Anchor cups get one unit every round throughout. Returns ``(A, B)``.
    """

    name = "rep"

    def __init__(self, inner: FillerStrategy, delta, M: int, flatten_rounds: int):
        if M < 1:
            raise ConfigError(f"sampling range M must be >= 1, got {M}")
        self.inner = inner
        self.delta = Fraction(delta)
        self.M = int(M)
        self.flatten = FlatAlg(flatten_rounds)

    def describe(self):
        return f"rep({self.inner.describe()}):delta={self.delta},M={self.M},flatten={self.flatten.rounds}"

    def play(self, ctx, cups):
        n_a, _ = split(len(cups), self.delta)
        anchor, rest = [], list(cups)
        ctx.anchors.append(anchor)
        try:
            for _ in range(n_a):
                m0 = int(ctx.rng.integers(1, self.M + 1))
                out = None
                for _ in range(m0):
                    yield from anchored(self.flatten.play(ctx, list(rest)), anchor)
                    out = yield from anchored(self.inner.play(ctx, list(rest)), anchor)
                rest.remove(out)
                anchor.append(out)
        finally:
            ctx.anchors.pop()
        return anchor, rest


@dataclass(frozen=True)
class DeskParams:
    """Small-scale stand-ins for the base construction's parameters.

    ``k`` defaults to ``ceil(e^(2h+1))`` when set to None; ``delta_base``
    defaults to ``1/(2k)``; ``H`` is the pump height (``ceil(5H)`` rounds).
    """

    h: Fraction = Fraction(1)
    k: Optional[int] = 3
    delta_base: Optional[Fraction] = None
    M: int = 4
    flatten_rounds: int = 16
    n_b: Optional[int] = 8
    H: Fraction = Fraction(1)
    delta_cap: Fraction = Fraction(1, 2)

    @property
    def k_eff(self) -> int:
        if self.k is not None:
            return self.k
        return math.ceil(math.exp(2 * float(self.h) + 1))

    @property
    def delta_b(self) -> Fraction:
        if self.delta_base is not None:
            return Fraction(self.delta_base)
        return Fraction(1, 2 * self.k_eff)

    @property
    def pump_rounds(self) -> int:
        return ceil(Fraction(self.H) * 5)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: (str(v) if isinstance(v, Fraction) else v) for k, v in d.items()}


def asymptotic_parameters(N: int) -> dict:
    """Asymptotic parameter settings at ``N`` cups, as strings and floats (never run)."""
    lg = math.log2(max(N, 2))
    lll = math.log2(max(math.log2(max(lg, 2)), 2))
    h = lll / 16
    return {
        "delta_cap": lll / 128,
        "h": h,
        "H": h / 8,
        "k": math.ceil(math.exp(2 * h + 1)),
        "n_b": lg**5,
        "M_base": f"2^({lg:.3g}^4)",
        "M_amplify": f"2^({lg:.3g}^9)",
        "flatten_rounds": N * N,
        "failure": "2^(-polylog N)",
    }


class ObliviousBase(FillerStrategy):
    """Base construction on the first ``n_b`` cups of its set.

    Runs ``rep(randalg(k))`` to hide high fill in some unknown anchor cup,
    then picks a non-anchor cup at random and pours one unit per round into
    it for ``ceil(5H)`` rounds. Returns that cup.
    """

    name = "oblivious-base"

    def __init__(self, params: DeskParams = DeskParams(), max_n: int = 64):
        self.params = params
        k = params.k_eff
        self.rep = Rep(RandAlg(k), params.delta_b, params.M, params.flatten_rounds)
        self.guarantee = StrategyGuarantee(
            tuple(Fraction(params.H) if self.runnable(m) else Fraction(0) for m in range(max_n + 1)),
            tuple(self.round_bound(m) for m in range(max_n + 1)),
            ({"op": "oblivious-base", **params.to_dict()},),
            (),
            "p0",
        )

    def describe(self):
        p = self.params
        return f"oblivious-base:k={p.k_eff},M={p.M},flatten={p.flatten_rounds},n_b={p.n_b},H={p.H}"

    def _used(self, m: int) -> int:
        return m if self.params.n_b is None else min(m, self.params.n_b)

    def runnable(self, m: int) -> bool:
        """Whether ``m`` cups leave room for randalg after all donations."""
        return split(self._used(m), self.params.delta_b)[1] >= self.params.k_eff

    def round_bound(self, m: int) -> int:
        if not self.runnable(m):
            return 0
        p = self.params
        n_a, _ = split(self._used(m), p.delta_b)
        return n_a * p.M * (p.flatten_rounds + p.k_eff - 1) + p.pump_rounds

    def play(self, ctx, cups):
        if not self.runnable(len(cups)):
            return cups[0] if cups else None
        use = list(cups[: self._used(len(cups))])
        _, rest = yield from self.rep.play(ctx, use)
        c0 = rest[int(ctx.rng.integers(len(rest)))]
        for _ in range(self.params.pump_rounds):
            yield FillMove({c0: 1}, 1)
        return c0


def amplify_threshold(delta) -> int:
    return ceil(4 / Fraction(delta) ** 2)


class ObliviousAmplified(FillerStrategy):
    """Oblivious amplification: donation-based Step 1, then flatten and recurse on ``A``."""

    def __init__(self, inner: FillerStrategy, delta, params: DeskParams, max_n: int,
                 min_size: Optional[int] = None):
        self.inner = inner
        self.delta = Fraction(delta)
        self.params = params
        self.min_size = amplify_threshold(self.delta) if min_size is None else min_size
        self.guarantee = amplify_oblivious(inner.guarantee, self.delta, max_n, params.M, self.min_size)
        self.depth = getattr(inner, "depth", 0) + 1
        self.name = f"oblivious-amplify[{self.depth}]:delta={self.delta}"
        self.rep = Rep(inner, self.delta, params.M, params.flatten_rounds)
        self.flatten = FlatAlg(params.flatten_rounds)
        self._resolved = {}

    def resolve(self, n: int) -> FillerStrategy:
        s = self._resolved.get(n)
        if s is None:
            s = self
            while isinstance(s, ObliviousAmplified) and s.guarantee.delegates(n):
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
        anchor, _ = yield from self.rep.play(ctx, cups)
        yield from self.flatten.play(ctx, list(anchor))
        return (yield from self.inner.play(ctx, list(anchor)))


def oblivious_amplify(inner: FillerStrategy, delta, params: DeskParams, n: int) -> ObliviousAmplified:
    """One amplification level for exactly ``n`` cups; refuses sizes below ``ceil(4/delta^2)``."""
    need = amplify_threshold(delta)
    if n < need:
        raise ConfigError(f"oblivious amplification with delta={Fraction(delta)} needs n >= {need}, got {n}")
    return ObliviousAmplified(inner, delta, params, n)


def oblivious_delta(eps) -> Fraction:
    """Largest power of two ``delta < 1/2`` with ``1-(3-eps)delta+delta^(1-eps)/2 >= 1``."""
    eps = Fraction(eps)
    if not 0 < eps < Fraction(1, 2):
        raise ConfigError(f"eps must lie in (0, 1/2), got {eps}")
    need = 2 * (3 - eps)
    delta = Fraction(1, 4)
    while (1 / delta) ** eps.numerator < need**eps.denominator:
        delta /= 2
    return delta


def _growth(g0: int, delta: Fraction, count: int) -> list:
    g = [g0]
    for _ in range(count):
        g.append(int(Fraction(g[-1]) / (1 - delta)))
    return g


class ObliviousChain(FillerStrategy):
    def __init__(self, top, name, meta):
        self.top = top
        self.guarantee = top.guarantee
        self.name = name
        self.meta = meta

    def play(self, ctx, cups):
        return (yield from self.top.play(ctx, cups))


def build_oblivious_poly(eps, N: int, desk: DeskParams = DeskParams(), delta=None,
                         levels: Optional[int] = None) -> ObliviousChain:
    """Base construction amplified ``levels`` times.

    Without overrides ``delta`` comes from ``eps`` and ``levels`` is the first
    index whose growth-sequence entry reaches ``N``.
    """
    eps = Fraction(eps)
    delta = oblivious_delta(eps) if delta is None else Fraction(delta)
    n_b = desk.n_b or N
    g0 = n_b * ceil(16 / delta)
    if levels is None:
        levels = 0
        g = g0
        while g < N:
            g = int(Fraction(g) / (1 - delta))
            levels += 1
    s = ObliviousBase(desk, N)
    for _ in range(levels):
        s = ObliviousAmplified(s, delta, desk, N)
    meta = {
        "eps": eps,
        "delta": delta,
        "levels": levels,
        "g": _growth(g0, delta, levels),
        "desk": desk.to_dict(),
        "asymptotic": asymptotic_parameters(N),
    }
    return ObliviousChain(s, f"oblivious-poly:eps={eps}", meta)


def oblivious_claim_failures(eps, n_b: int, levels: int, base_height=None) -> list:
    """Sizes ``k <= g_i`` where ``f_i(k) < (k/n_b)^(1-eps) - 1``.

    The base map is ``base_height`` on every size ``>= n_b`` (default: the
    least integer making the level-0 claim hold) and amplification honours
    the ``ceil(4/delta^2)`` size threshold.
    """
    eps = Fraction(eps)
    a, b = eps.numerator, eps.denominator
    delta = oblivious_delta(eps)
    g = _growth(n_b * ceil(16 / delta), delta, levels)
    if base_height is None:
        # least H with (H+1)^b >= (g0/n_b)^(b-a)
        base_height = 0
        while (base_height + 1) ** b < Fraction(g[0], n_b) ** (b - a):
            base_height += 1
    top = g[-1]
    f0 = tuple(Fraction(base_height) if k >= n_b else Fraction(0) for k in range(top + 1))
    guar = StrategyGuarantee(f0, (0,) * (top + 1), ({"op": "oblivious-base"},))
    bad = []
    for i in range(levels + 1):
        if i:
            guar = amplify_oblivious(guar, delta, top, 1)
        for k in range(1, g[i] + 1):
            # f + 1 >= (k/n_b)^((b-a)/b)
            if (guar.f[k] + 1) ** b < Fraction(k, n_b) ** (b - a):
                bad.append((i, k, guar.f[k]))
    return bad
