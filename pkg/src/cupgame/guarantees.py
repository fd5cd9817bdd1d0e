"""Certified backlog and round-count curves for constructed filling strategies.

A :class:`StrategyGuarantee` stores, for every subproblem size ``k`` up to
``max_n``, the backlog ``f(k)`` the strategy certifies above the starting
mean of the cups it is applied to, and a worst-case round count ``T(k)``.
Amplification steps build a new guarantee from an old one; ``delegates(k)``
records the sizes at which the amplified strategy simply runs its inner one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil
from typing import Optional, Sequence

from .core import ConfigError


def split(n: int, delta: Fraction) -> tuple:
    """Anchor / non-anchor sizes ``(ceil(delta*n), n - ceil(delta*n))``."""
    n_a = ceil(Fraction(delta) * n)
    return n_a, n - n_a


@dataclass(frozen=True)
class StrategyGuarantee:
    f: tuple
    T: tuple
    provenance: tuple = ()
    delegate: tuple = ()
    failure: str = ""

    @property
    def max_n(self) -> int:
        return len(self.f) - 1

    def at(self, k: int) -> Fraction:
        if k > self.max_n:
            raise ConfigError(f"guarantee only tabulated up to {self.max_n} cups, asked for {k}")
        return self.f[k]

    def rounds(self, k: int) -> int:
        return self.T[k]

    def delegates(self, k: int) -> bool:
        return bool(self.delegate) and self.delegate[k]

    def capped(self, limit) -> "StrategyGuarantee":
        limit = Fraction(limit)
        return StrategyGuarantee(
            tuple(min(v, limit) for v in self.f),
            self.T,
            self.provenance + ({"op": "cap", "limit": str(limit)},),
            (),
            self.failure,
        )

    def table(self, sizes: Optional[Sequence[int]] = None) -> list:
        sizes = range(1, self.max_n + 1) if sizes is None else sizes
        return [{"n": k, "f": self.f[k], "T": self.T[k]} for k in sizes]


def trivalg_guarantee(max_n: int) -> StrategyGuarantee:
    f = tuple(Fraction(0) if k < 2 else Fraction(1, 2) for k in range(max_n + 1))
    T = tuple(0 if k < 2 else 1 for k in range(max_n + 1))
    return StrategyGuarantee(f, T, ({"op": "trivalg"},))


def amplify_adaptive(inner: StrategyGuarantee, delta, max_n: int) -> StrategyGuarantee:
    """Guarantee of the adaptive amplification of ``inner`` with parameter ``delta``.

    The anchor set ends Step 1 with mean ``(n_B/n) * f(n_B)`` above the
    starting mean, which equals ``(1 - delta) * f(n_B)`` whenever ``delta*n``
    is an integer.
    """
    delta = Fraction(delta)
    if not 0 < delta <= Fraction(1, 2):
        raise ConfigError(f"adaptive amplification needs delta in (0, 1/2], got {delta}")
    f, T, dele = [Fraction(0)], [0], [True]
    for n in range(1, max_n + 1):
        n_a, n_b = split(n, delta)
        base_f, base_T = inner.at(n), inner.rounds(n)
        if n_b == 0:
            f.append(base_f)
            T.append(base_T)
            dele.append(True)
            continue
        cand = Fraction(n_b, n) * inner.at(n_b) + inner.at(n_a)
        if base_f >= cand:
            f.append(base_f)
            T.append(base_T)
            dele.append(True)
        else:
            f.append(cand)
            T.append(n * n_a * inner.rounds(n_b) + inner.rounds(n_a))
            dele.append(False)
    prov = inner.provenance + ({"op": "amplify", "delta": str(delta)},)
    return StrategyGuarantee(tuple(f), tuple(T), prov, tuple(dele))


def amplify_oblivious(inner: StrategyGuarantee, delta, max_n: int, M: int,
                      min_size: Optional[int] = None) -> StrategyGuarantee:
    """Guarantee of the oblivious amplification: ``(1-delta)^2 f(n_B) + f(n_A)``.

    Sizes below ``min_size`` (default ``ceil(4/delta^2)``) delegate to the
    inner strategy. The failure probability is carried symbolically.
    """
    delta = Fraction(delta)
    if not 0 < delta < Fraction(1, 2):
        raise ConfigError(f"oblivious amplification needs delta in (0, 1/2), got {delta}")
    if min_size is None:
        min_size = ceil(4 / delta**2)
    shrink = (1 - delta) ** 2
    f, T, dele = [Fraction(0)], [0], [True]
    for n in range(1, max_n + 1):
        n_a, n_b = split(n, delta)
        base_f, base_T = inner.at(n), inner.rounds(n)
        if n < min_size or n_b == 0:
            f.append(base_f)
            T.append(base_T)
            dele.append(True)
            continue
        cand = shrink * inner.at(n_b) + inner.at(n_a)
        if base_f >= cand:
            f.append(base_f)
            T.append(base_T)
            dele.append(True)
        else:
            f.append(cand)
            T.append(M * n * inner.rounds(n_b) + inner.rounds(n_a))
            dele.append(False)
    prov = inner.provenance + ({"op": "oblivious-amplify", "delta": str(delta), "M": M, "min_size": min_size},)
    failure = f"n*({inner.failure or 'p0'}) + 2^(-log^8 N)"
    return StrategyGuarantee(tuple(f), tuple(T), prov, tuple(dele), failure)
