"""Game state, round mechanics and state metrics for the variable-processor cup game.

Fills are stored as integers over a shared denominator (``scale``) so that
exact-mode arithmetic never touches :class:`fractions.Fraction` on the hot
path. The public accessors hand back ``Fraction`` values. In float mode the
raw values are floats and ``scale`` is 1.
"""
from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

Number = Union[int, Fraction, float]


class GameError(Exception):
    """Base class for rule violations detected by the engine."""


class InvalidFill(GameError):
    pass


class BudgetExceeded(GameError):
    pass


class DuplicateCup(GameError):
    pass


class EmptySet(GameError):
    pass


class PhaseError(GameError):
    pass


class ConfigError(ValueError):
    pass


class Semantics(str, enum.Enum):
    STANDARD = "standard"
    NEGATIVE = "negative"


class Phase(str, enum.Enum):
    START = "start"
    INTERMEDIATE = "intermediate"


@dataclass(frozen=True)
class GameConfig:
    n: int
    semantics: Semantics = Semantics.NEGATIVE
    extra_budget: int = 0
    skip_budget: Optional[int] = None  # None means unbounded
    seed: int = 0
    arithmetic: str = "exact"

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"need at least one cup, got n={self.n}")
        object.__setattr__(self, "semantics", Semantics(self.semantics))
        if self.arithmetic not in ("exact", "float"):
            raise ConfigError(f"unknown arithmetic mode {self.arithmetic!r}")
        if self.extra_budget < 0 or (self.skip_budget is not None and self.skip_budget < 0):
            raise ConfigError("budgets must be nonnegative")

    @property
    def exact(self) -> bool:
        return self.arithmetic == "exact"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "semantics": self.semantics.value,
            "extra_budget": self.extra_budget,
            "skip_budget": self.skip_budget,
            "seed": self.seed,
            "arithmetic": self.arithmetic,
        }


@dataclass(frozen=True)
class FillMove:
    """Amounts per cup and the processor count ``p``.

    With ``den > 1`` the amounts are integers meaning ``amount / den``; this
    lets exact strategies hand over values on the state's own denominator
    without building reduced fractions of very large integers.
    """

    per_cup: dict
    p: int
    den: int = 1

    def with_units(self, cups: Iterable[int]) -> "FillMove":
        """Return this move plus one full unit into each of ``cups``."""
        per_cup = dict(self.per_cup)
        extra = 0
        for c in cups:
            per_cup[c] = self.den
            extra += 1
        return FillMove(per_cup, self.p + extra, self.den)

    def amounts(self) -> dict:
        """Per-cup amounts as plain numbers (``Fraction`` when ``den > 1``)."""
        if self.den == 1:
            return dict(self.per_cup)
        return {c: Fraction(a, self.den) for c, a in self.per_cup.items()}

    def key(self) -> tuple:
        """Canonical form, equal for moves that pour the same amounts."""
        return (tuple(sorted((c, Fraction(a)) for c, a in self.amounts().items())), self.p)


@dataclass(frozen=True)
class EmptyMove:
    cups: tuple
    skipped: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "cups", tuple(self.cups))


def int_text(i: int) -> str:
    """Decimal text of ``i`` with no digit limit (long exact games reach thousands of digits)."""
    limit = getattr(sys, "get_int_max_str_digits", None)
    if limit is None or i.bit_length() < 10000:
        return str(i)
    old = limit()
    sys.set_int_max_str_digits(0)
    try:
        return str(i)
    finally:
        sys.set_int_max_str_digits(old)


def rational_text(x) -> str:
    """``num/den`` for a ``Fraction``, plain decimal for an integer value."""
    if isinstance(x, Fraction) and x.denominator != 1:
        return f"{int_text(x.numerator)}/{int_text(x.denominator)}"
    return int_text(int(x))


def _as_fraction(x: Number) -> Fraction:
    if isinstance(x, bool):
        raise TypeError("fill amounts must be numbers, got bool")
    if isinstance(x, float):
        raise TypeError("exact mode requires rational amounts, got float")
    return Fraction(x)


@dataclass(frozen=True)
class CupState:
    """A snapshot ``S_t`` (phase start) or ``I_t`` (phase intermediate)."""

    raw: tuple
    scale: int = 1
    exact: bool = True
    round: int = 0
    phase: Phase = Phase.START
    p: int = 0
    extra_used: int = 0
    skips_used: int = 0

    @classmethod
    def from_fills(cls, fills: Sequence[Number], exact: bool = True) -> "CupState":
        if not exact:
            return cls(tuple(float(f) for f in fills), 1, False)
        fracs = [_as_fraction(f) for f in fills]
        scale = math.lcm(1, *(f.denominator for f in fracs))
        return cls(tuple(f.numerator * (scale // f.denominator) for f in fracs), scale, True)

    @classmethod
    def empty(cls, n: int, exact: bool = True) -> "CupState":
        return cls((0,) * n if exact else (0.0,) * n, 1, exact)

    @property
    def n(self) -> int:
        return len(self.raw)

    def _val(self, r):
        return Fraction(r, self.scale) if self.exact else r

    def fill(self, c: int):
        return self._val(self.raw[c])

    @property
    def fills(self) -> tuple:
        return tuple(self._val(r) for r in self.raw)

    @cached_property
    def ranking(self) -> tuple:
        """Cup ids by fill descending, ties by ascending id."""
        raw = self.raw
        return tuple(sorted(range(len(raw)), key=lambda c: (-raw[c], c)))

    def rank(self, r: int) -> int:
        """The cup of rank ``r`` (1-based; rank 1 is the fullest)."""
        return self.ranking[r - 1]

    def ranked_set(self, ranks: Iterable[int]) -> frozenset:
        order = self.ranking
        return frozenset(order[r - 1] for r in ranks)

    def order(self, cups: Iterable[int]) -> list:
        raw = self.raw
        return sorted(cups, key=lambda c: (-raw[c], c))

    @property
    def backlog(self):
        return self._val(max(self.raw))

    @property
    def anti_backlog(self):
        return self._val(min(self.raw))

    @property
    def fill_range(self):
        return self._val(max(self.raw) - min(self.raw))

    def mass(self, cups: Optional[Iterable[int]] = None):
        raw = self.raw
        if cups is None:
            return self._val(sum(raw))
        cups = list(cups)
        if not cups:
            raise EmptySet("mass of an empty set of cups")
        return self._val(sum(raw[c] for c in cups))

    def raw_sum(self, cups: Iterable[int]):
        """Sum of raw fills over ``cups`` (in units of ``1/scale``)."""
        raw = self.raw
        return sum(raw[c] for c in cups)

    def mean(self, cups: Optional[Iterable[int]] = None):
        cups = list(range(self.n)) if cups is None else list(cups)
        if not cups:
            raise EmptySet("mean fill of an empty set of cups")
        total = sum(self.raw[c] for c in cups)
        if self.exact:
            return Fraction(total, self.scale * len(cups))
        return total / len(cups)

    def subset_range(self, cups: Iterable[int]):
        vals = [self.raw[c] for c in cups]
        if not vals:
            raise EmptySet("fill-range of an empty set of cups")
        return self._val(max(vals) - min(vals))

    def key(self) -> tuple:
        """Canonical tuple for bit-equality comparisons across runs."""
        return (self.fills, self.round, self.phase.value, self.extra_used, self.skips_used)


def metrics(state: CupState, cups: Optional[Iterable[int]] = None) -> dict:
    """Backlog, anti-backlog, mass, mean and fill-range of ``state``.

    With ``cups`` given, mass and mean are taken over that subset; the
    backlog-type quantities always refer to the whole configuration.
    """
    return {
        "backlog": state.backlog,
        "anti_backlog": state.anti_backlog,
        "mass": state.mass(cups),
        "mean": state.mean(cups),
        "fill_range": state.fill_range,
        "ranking": state.ranking,
    }


_SMALL_PRIMES = (3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97)
_PRIMORIAL = math.prod(_SMALL_PRIMES)


def _reduce(scale: int, raw: list) -> tuple:
    """Divide out common factors of ``scale`` and every raw fill.

    Only 2 and the primes below 100 are tried. Move denominators come from
    subset sizes and small grids, so in practice that is every factor; a
    larger leftover factor just keeps ``scale`` bigger than it needs to be.
    """
    twos = (scale & -scale).bit_length() - 1
    for r in raw:
        if not twos:
            break
        if r:
            twos = min(twos, (r & -r).bit_length() - 1)
    if twos:
        scale >>= twos
        raw = [r >> twos for r in raw]
    while True:
        # one big modulus per value; the per-prime tests then run on small ints
        sm = scale % _PRIMORIAL
        common = [q for q in _SMALL_PRIMES if sm % q == 0]
        if not common:
            return scale, raw
        for r in raw:
            rm = r % _PRIMORIAL
            common = [q for q in common if rm % q == 0]
            if not common:
                return scale, raw
        g = math.prod(common)
        scale //= g
        raw = [r // g for r in raw]


def apply_fill(state: CupState, move: FillMove) -> CupState:
    if state.phase is not Phase.START:
        raise PhaseError("fill applied to an intermediate state")
    n = state.n
    p = move.p
    if not isinstance(p, int) or not 1 <= p <= n:
        raise InvalidFill(f"processor count p={p} outside [1, {n}]")
    raw = list(state.raw)
    mden = move.den
    if state.exact:
        scale = state.scale
        parsed = []
        for c, a in move.per_cup.items():
            if not 0 <= c < n:
                raise InvalidFill(f"unknown cup {c}")
            t = type(a)
            if t is not int and t is not Fraction:
                a = _as_fraction(a)
                t = type(a)
            if t is int:
                parsed.append((c, a, mden))
            else:
                num, den = a.numerator, a.denominator * mden
                parsed.append((c, num, den))
                if scale % den:
                    scale = math.lcm(scale, den)
        if mden > 1 and scale % mden:
            scale = math.lcm(scale, mden)
        if scale != state.scale:
            factor = scale // state.scale
            raw = [r * factor for r in raw]
        total = 0
        mult = {}
        for c, num, den in parsed:
            f = mult.get(den)
            if f is None:
                f = mult[den] = scale // den
            units = num * f
            if units < 0 or units > scale:
                raise InvalidFill(f"cup {c} receives {Fraction(num, den)}, outside [0, 1]")
            total += units
            raw[c] += units
        if total > p * scale:
            raise InvalidFill(f"filler placed {Fraction(total, scale)} > p={p}")
        if scale > 1:
            # keep the shared denominator as small as the fills allow
            scale, raw = _reduce(scale, raw)
        return replace(state, raw=tuple(raw), scale=scale, phase=Phase.INTERMEDIATE, p=p)
    total = 0.0
    for c, a in move.per_cup.items():
        if not 0 <= c < n:
            raise InvalidFill(f"unknown cup {c}")
        a = float(a) / mden
        if a < 0 or a > 1:
            raise InvalidFill(f"cup {c} receives {a}, outside [0, 1]")
        total += a
        raw[c] += a
    if total > p + 1e-9:
        raise InvalidFill(f"filler placed {total} > p={p}")
    return replace(state, raw=tuple(raw), phase=Phase.INTERMEDIATE, p=p)


def compare_scaled(a: int, a_scale: int, b: int, b_scale: int) -> int:
    """Sign of ``a/a_scale - b/b_scale`` for positive scales, computed exactly.

    When one scale divides the other the comparison needs only a small
    multiplier; otherwise a float estimate settles clear cases before the
    exact cross product.
    """
    if a_scale == b_scale:
        d = a - b
    else:
        q, r = divmod(a_scale, b_scale)
        if r == 0:
            d = a - b * q
        else:
            q, r = divmod(b_scale, a_scale)
            if r == 0:
                d = a * q - b
            else:
                x, y = a / a_scale, b / b_scale
                if abs(x - y) > 1e-9 * (1 + abs(x) + abs(y)):
                    return 1 if x > y else -1
                d = a * b_scale - b * a_scale
    return (d > 0) - (d < 0)


def empty_budget(state: CupState, move: EmptyMove) -> tuple:
    """(extra, skipped) emptyings that ``move`` uses at intermediate ``state``."""
    k = len(move.cups)
    return max(0, k - state.p), max(0, state.p - k)


def zeroed_out(state: CupState, move: EmptyMove, cfg: GameConfig) -> int:
    if cfg.semantics is not Semantics.STANDARD:
        return 0
    return sum(1 for c in move.cups if state.raw[c] < state.scale)


def apply_empty(state: CupState, move: EmptyMove, cfg: GameConfig) -> CupState:
    if state.phase is not Phase.INTERMEDIATE:
        raise PhaseError("emptying applied to a start state")
    cups = move.cups
    if len(set(cups)) != len(cups):
        raise DuplicateCup(f"cup emptied twice in one round: {sorted(cups)}")
    n = len(state.raw)
    for c in cups:
        if not 0 <= c < n:
            raise DuplicateCup(f"unknown cup {c}")
    extra, skipped = empty_budget(state, move)
    if move.skipped is not None and move.skipped != skipped:
        raise BudgetExceeded(f"move declares {move.skipped} skips but uses {skipped}")
    extra_used = state.extra_used + extra
    skips_used = state.skips_used + skipped
    if extra_used > cfg.extra_budget:
        raise BudgetExceeded(f"extra emptyings {extra_used} > E={cfg.extra_budget}")
    if cfg.skip_budget is not None and skips_used > cfg.skip_budget:
        raise BudgetExceeded(f"skipped emptyings {skips_used} > S={cfg.skip_budget}")
    raw = list(state.raw)
    unit = state.scale
    if cfg.semantics is Semantics.NEGATIVE:
        for c in cups:
            raw[c] -= unit
    else:
        zero = 0 if state.exact else 0.0
        for c in cups:
            raw[c] = max(zero, raw[c] - unit)
    return replace(
        state,
        raw=tuple(raw),
        round=state.round + 1,
        phase=Phase.START,
        p=0,
        extra_used=extra_used,
        skips_used=skips_used,
    )


def removed_amount(state: CupState, move: EmptyMove, cfg: GameConfig):
    """Water actually removed by ``move`` from intermediate ``state``."""
    if cfg.semantics is Semantics.NEGATIVE:
        return len(move.cups) if state.exact else float(len(move.cups))
    return state._val(sum(min(state.raw[c], state.scale) for c in move.cups))


def fill_total(move: FillMove, exact: bool = True):
    amounts = move.amounts().values()
    if exact:
        return sum((Fraction(a) for a in amounts), Fraction(0))
    return float(sum(float(a) for a in amounts))


@dataclass
class RoundTrace:
    round: int
    p: int
    backlog: Number
    anti_backlog: Number
    mass: Number
    fill_range: Number
    zeroed: int
    neglect: bool

    FIELDS = ("round", "p", "backlog", "anti_backlog", "mass", "fill_range", "zeroed", "neglect")

    def row(self) -> list:
        return [getattr(self, f) for f in self.FIELDS]


@dataclass
class GameResult:
    final: CupState
    trace: list
    outcome: object = None
    verdicts: list = field(default_factory=list)
    moves: Optional[list] = None
    anchors: Optional[list] = None
    states: Optional[list] = None
    aborted_by: Optional[str] = None
    strategy_finished: bool = False
    peak_backlog: object = None

    @property
    def rounds(self) -> int:
        return len(self.trace)

    @property
    def max_backlog(self):
        if self.peak_backlog is not None:
            return self.peak_backlog
        if not self.trace:
            return self.final.backlog
        return max(r.backlog for r in self.trace)


class NonTermination(RuntimeError):
    """A construction ran past its certified round cap."""
