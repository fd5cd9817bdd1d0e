"""Online verifiers that watch a game without influencing it.

Each monitor gets ``start(state, cfg)`` once and ``on_round(record)`` after
every round, returning True when the round violates its property. The
first violation is kept with exact values so it can be rechecked by hand.
Pure ``check_*`` functions expose the same tests for one-off use.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .core import CupState, GameConfig, apply_fill, fill_total, rational_text, removed_amount
from .emptiers import check_delta_greedy
from .fillers.oblivious import flatness_bound

HOLDS = "holds"
VIOLATED = "violated"


@dataclass
class InvariantVerdict:
    monitor: str
    status: str = HOLDS
    first_violation: Optional[dict] = None
    violations: int = 0
    checked: int = 0
    detail: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.status == HOLDS

    def to_dict(self) -> dict:
        return {
            "monitor": self.monitor,
            "status": self.status,
            "first_violation": _jsonable(self.first_violation),
            "violations": self.violations,
            "checked": self.checked,
            "detail": _jsonable(self.detail),
        }


def _jsonable(x):
    if isinstance(x, Fraction):
        return rational_text(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def greedy_prefix_violation(state: CupState) -> Optional[dict]:
    """First ``k`` whose ``k`` fullest cups have mean above ``2n - k``."""
    n = state.n
    raw = sorted(state.raw, reverse=True)
    unit = state.scale
    total = 0
    for k in range(1, n + 1):
        total += raw[k - 1]
        if total > k * (2 * n - k) * unit:
            return {
                "round": state.round,
                "k": k,
                "lhs": state._val(total) / k,
                "rhs": 2 * n - k,
            }
    return None


def check_greedy_invariants(state: CupState, n: Optional[int] = None) -> InvariantVerdict:
    if n is not None and n != state.n:
        raise ValueError(f"state has {state.n} cups, expected {n}")
    bad = greedy_prefix_violation(state)
    v = InvariantVerdict("greedy-invariant", checked=1)
    if bad:
        v.status, v.first_violation, v.violations = VIOLATED, bad, 1
    return v


def check_flatness(state: CupState, R) -> InvariantVerdict:
    rng = state.fill_range
    v = InvariantVerdict("flatness", checked=1, detail={"fill_range": rng})
    if rng > R:
        v.status = VIOLATED
        v.violations = 1
        v.first_violation = {"round": state.round, "lhs": rng, "rhs": R}
    return v


def check_mass_escape(state: CupState, N: int) -> InvariantVerdict:
    """``violated`` means the total mass reached ``N^2``."""
    m = state.mass()
    v = InvariantVerdict("mass-escape", checked=1, detail={"mass": m})
    if m >= N * N:
        v.status = VIOLATED
        v.violations = 1
        v.first_violation = {"round": state.round, "lhs": m, "rhs": N * N}
    return v


def check_conservation(cfg: GameConfig, moves: Sequence, states: Sequence[CupState]) -> InvariantVerdict:
    """Recompute each round's mass from the move log and compare with the states.

    ``states`` holds every start state, so it is one longer than ``moves``.
    """
    v = InvariantVerdict("conservation")
    for t, (fill, em) in enumerate(moves):
        prev, new = states[t], states[t + 1]
        inter = apply_fill(prev, fill)
        want = prev.mass() + fill_total(fill, prev.exact) - removed_amount(inter, em, cfg)
        got = new.mass()
        v.checked += 1
        if got != want:
            v.violations += 1
            if v.first_violation is None:
                v.status = VIOLATED
                v.first_violation = {"round": prev.round, "lhs": got, "rhs": want}
    return v


class Monitor:
    name = "monitor"
    # Whether a violation may abort a strict game. Informational monitors never do.
    aborts = True

    def __init__(self):
        self._v = InvariantVerdict(self.name)

    def start(self, state: CupState, cfg: GameConfig):
        self._v = InvariantVerdict(self.name)
        self.cfg = cfg

    def _record(self, info: dict) -> bool:
        v = self._v
        v.violations += 1
        if v.first_violation is None:
            v.status = VIOLATED
            v.first_violation = info
        return True

    def on_round(self, rec) -> bool:
        raise NotImplementedError

    def verdict(self) -> InvariantVerdict:
        return self._v

    def describe(self) -> str:
        return self.name


class GreedyInvariantMonitor(Monitor):
    """Mean of the ``k`` fullest cups stays at most ``2n - k`` at every round start."""

    name = "greedy-invariant"

    def start(self, state, cfg):
        super().start(state, cfg)
        self._v.checked = 1
        bad = greedy_prefix_violation(state)
        if bad:
            self._record(bad)

    def on_round(self, rec) -> bool:
        self._v.checked += 1
        bad = greedy_prefix_violation(rec.new)
        return self._record(bad) if bad else False


class FlatnessMonitor(Monitor):
    """Fill-range at most ``R`` at round starts.

    With ``growth_delta`` set it also checks that whenever the fill-range
    grows from one round start to the next, the new range is within the
    flatness bound for that delta.
    """

    name = "flatness"

    def __init__(self, R=None, growth_delta=None):
        super().__init__()
        self.R = None if R is None else Fraction(R)
        self.growth_delta = None if growth_delta is None else Fraction(growth_delta)

    def describe(self):
        parts = []
        if self.R is not None:
            parts.append(f"R={self.R}")
        if self.growth_delta is not None:
            parts.append(f"delta={self.growth_delta}")
        return self.name + (":" + ",".join(parts) if parts else "")

    def start(self, state, cfg):
        super().start(state, cfg)
        self._v.detail = {"max_fill_range": state.fill_range}
        self._v.checked = 1
        if self.R is not None and state.fill_range > self.R:
            self._record({"round": state.round, "lhs": state.fill_range, "rhs": self.R})

    def on_round(self, rec) -> bool:
        self._v.checked += 1
        before, after = rec.prev.fill_range, rec.new.fill_range
        if after > self._v.detail["max_fill_range"]:
            self._v.detail["max_fill_range"] = after
        if self.R is not None and after > self.R:
            return self._record({"round": rec.new.round, "lhs": after, "rhs": self.R})
        if self.growth_delta is not None and after > before:
            bound = flatness_bound(self.growth_delta)
            if after > bound:
                return self._record({"round": rec.new.round, "lhs": after, "rhs": bound, "previous": before})
        return False


class MassEscapeMonitor(Monitor):
    """Notes the first round whose total mass reaches ``N^2``; never aborts."""

    name = "mass-escape"
    aborts = False

    def __init__(self, N: int):
        super().__init__()
        self.N = int(N)

    def describe(self):
        return f"{self.name}:N={self.N}"

    def start(self, state, cfg):
        super().start(state, cfg)
        self._check(state)

    def _check(self, state):
        self._v.checked += 1
        if self._v.first_violation is None and state.mass() >= self.N * self.N:
            return self._record({"round": state.round, "lhs": state.mass(), "rhs": self.N * self.N})
        return False

    def on_round(self, rec) -> bool:
        return self._check(rec.new)


class ConservationMonitor(Monitor):
    """Mass after each round equals mass before plus water poured minus water removed."""

    name = "conservation"

    def on_round(self, rec) -> bool:
        self._v.checked += 1
        want = rec.prev.mass() + fill_total(rec.fill, rec.prev.exact) - removed_amount(rec.inter, rec.empty, rec.cfg)
        got = rec.new.mass()
        if got != want:
            return self._record({"round": rec.prev.round, "lhs": got, "rhs": want})
        return False


class DeltaGreedyMonitor(Monitor):
    """Every emptier move is delta-greedy-like at the post-fill state."""

    name = "delta-greedy"

    def __init__(self, delta=0):
        super().__init__()
        self.delta = Fraction(delta)

    def describe(self):
        return f"{self.name}:delta={self.delta}"

    def on_round(self, rec) -> bool:
        self._v.checked += 1
        w = check_delta_greedy(rec.inter, rec.empty, self.delta)
        if w is not None:
            return self._record({"round": rec.prev.round, "c1": w.c1, "c2": w.c2, "lhs": w.fill1, "rhs": w.fill2})
        return False


class AnchorMonitor(Monitor):
    """Anchor-set mass never drops in a round, and rises by at least 1 when an anchor cup is skipped."""

    name = "anchor-accounting"

    def start(self, state, cfg):
        super().start(state, cfg)
        self._v.detail = {"neglected_rounds": 0}

    def on_round(self, rec) -> bool:
        if not rec.anchors:
            return False
        emptied = set(rec.empty.cups)
        for a in rec.anchors:
            if not a:
                continue
            self._v.checked += 1
            gain = rec.new.mass(a) - rec.prev.mass(a)
            neglected = any(c not in emptied for c in a)
            need = 1 if neglected else 0
            if neglected:
                self._v.detail["neglected_rounds"] += 1
            if gain < need:
                return self._record({"round": rec.prev.round, "anchors": list(a), "lhs": gain, "rhs": need})
        return False


MONITORS = {
    "greedy-invariant": GreedyInvariantMonitor,
    "flatness": FlatnessMonitor,
    "mass-escape": MassEscapeMonitor,
    "conservation": ConservationMonitor,
    "delta-greedy": DeltaGreedyMonitor,
    "anchor-accounting": AnchorMonitor,
}
