import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cupgame.core import (
    BudgetExceeded,
    CupState,
    DuplicateCup,
    EmptyMove,
    FillMove,
    GameConfig,
    InvalidFill,
    Phase,
    PhaseError,
    Semantics,
    _reduce,
    apply_empty,
    apply_fill,
    compare_scaled,
    int_text,
    metrics,
    rational_text,
)
from cupgame.emptiers import greedy_select
from cupgame.engine import replay, run_game
from cupgame.fillers import ScriptedFiller, TrivAlg
from cupgame.harness import build_emptier, build_filler

fracs = st.fractions(min_value=-20, max_value=20, max_denominator=12)


def test_fill_halves():
    s = apply_fill(CupState.empty(2), FillMove({0: F(1, 2), 1: F(1, 2)}, 1))
    assert s.fills == (F(1, 2), F(1, 2))
    assert s.phase is Phase.INTERMEDIATE


def test_empty_fill_move_only_changes_phase():
    s0 = CupState.from_fills([F(1, 3), 2, -1])
    s1 = apply_fill(s0, FillMove({}, 1))
    assert s1.fills == s0.fills and s1.round == s0.round
    assert s1.phase is Phase.INTERMEDIATE


@pytest.mark.parametrize("move", [
    FillMove({0: F(6, 5)}, 1),
    FillMove({0: F(-1, 5)}, 1),
    FillMove({0: 1, 1: 1}, 1),
    FillMove({0: F(1, 2)}, 0),
    FillMove({0: F(1, 2)}, 4),
    FillMove({7: F(1, 2)}, 1),
])
def test_invalid_fill(move):
    with pytest.raises(InvalidFill):
        apply_fill(CupState.empty(3), move)


def test_phase_order_enforced():
    s = CupState.empty(2)
    with pytest.raises(PhaseError):
        apply_empty(s, EmptyMove((0,)), GameConfig(2))
    with pytest.raises(PhaseError):
        apply_fill(apply_fill(s, FillMove({}, 1)), FillMove({}, 1))


def _intermediate(fills, p):
    return apply_fill(CupState.from_fills(fills), FillMove({}, p))


def test_standard_fill_zeroes_out():
    cfg = GameConfig(2, Semantics.STANDARD)
    s = apply_empty(_intermediate([F(2, 5), 3], 1), EmptyMove((0,)), cfg)
    assert s.fills == (0, 3)


def test_negative_fill_goes_below_zero():
    s = apply_empty(_intermediate([F(2, 5), 3], 1), EmptyMove((0,)), GameConfig(2))
    assert s.fills == (F(-3, 5), 3)


def test_skip_without_budget():
    with pytest.raises(BudgetExceeded):
        apply_empty(_intermediate([0, 0], 1), EmptyMove(()), GameConfig(2, skip_budget=0))
    # unbounded skips are fine
    apply_empty(_intermediate([0, 0], 1), EmptyMove(()), GameConfig(2))


def test_extra_emptyings_budget():
    s = _intermediate([1, 1, 1], 1)
    apply_empty(s, EmptyMove((0, 1)), GameConfig(3, extra_budget=1))
    with pytest.raises(BudgetExceeded):
        apply_empty(s, EmptyMove((0, 1)), GameConfig(3, extra_budget=0))


def test_duplicate_cup():
    with pytest.raises(DuplicateCup):
        apply_empty(_intermediate([1, 1], 2), EmptyMove((0, 0)), GameConfig(2))


def test_declared_skips_must_match():
    with pytest.raises(BudgetExceeded):
        apply_empty(_intermediate([1, 1], 2), EmptyMove((0,), skipped=0), GameConfig(2))


def test_metrics_examples():
    s = CupState.from_fills([3, 1, 2, 5])
    assert (s.backlog, s.anti_backlog, s.rank(1)) == (5, 1, 3)
    assert CupState.from_fills([F(7, 3)] * 4).fill_range == 0
    m = metrics(CupState.from_fills([F(1, 2), F(-1, 2)]), [0, 1])
    assert m["mass"] == 0 and m["mean"] == 0


def test_ranking_ties_by_id():
    assert CupState.from_fills([1, 2, 2, 1]).ranking == (1, 2, 0, 3)


def test_zero_rounds():
    res = run_game(GameConfig(4), build_filler("random", 4), build_emptier("greedy"), 0)
    assert res.trace == [] and res.final == CupState.empty(4)


def test_trivalg_example():
    res = run_game(GameConfig(2), TrivAlg(2), build_emptier("greedy"), 5)
    assert res.final.backlog >= F(1, 2)


def test_raw_fill_moves_match_fractions():
    s = CupState.from_fills([F(1, 3), 0, F(-1, 6)])
    a = apply_fill(s, FillMove({0: 3, 1: 5}, 1, 8))
    b = apply_fill(s, FillMove({0: F(3, 8), 1: F(5, 8)}, 1))
    assert a.fills == b.fills
    assert FillMove({0: 3}, 1, 8).key() == FillMove({0: F(3, 8)}, 1).key()


def test_float_mode_tracks_exact():
    moves = [FillMove({0: F(1, 3), 1: F(2, 3)}, 1), FillMove({2: F(1, 7)}, 2)]
    cfg = GameConfig(3)
    exact = CupState.empty(3)
    approx = CupState.empty(3, exact=False)
    for mv in moves:
        exact = apply_fill(exact, mv)
        approx = apply_fill(approx, mv)
        em = greedy_select(exact, mv.p)
        exact = apply_empty(exact, em, cfg)
        approx = apply_empty(approx, em, GameConfig(3, arithmetic="float"))
    assert approx.fills == pytest.approx([float(x) for x in exact.fills])


def test_long_integers_render():
    big = 7 ** 12000
    assert len(int_text(big)) == math.floor(12000 * math.log10(7)) + 1
    assert rational_text(F(big, 3)).endswith("/3")


@given(st.integers(-10**30, 10**30), st.integers(1, 10**20), st.integers(-10**30, 10**30), st.integers(1, 10**20))
def test_compare_scaled(a, sa, b, sb):
    want = (F(a, sa) > F(b, sb)) - (F(a, sa) < F(b, sb))
    assert compare_scaled(a, sa, b, sb) == want
    assert compare_scaled(a * 3, sa * 3, a, sa) == 0


@given(st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=8), st.integers(1, 10**6),
       st.integers(1, 2**10 * 3**3 * 101))
def test_reduce_preserves_values(raw, scale, common):
    raw = [r * common for r in raw]
    scale *= common
    s2, r2 = _reduce(scale, raw)
    assert [F(x, s2) for x in r2] == [F(x, scale) for x in raw]
    assert scale % s2 == 0


@given(st.lists(fracs, min_size=2, max_size=6), st.data())
def test_negative_fill_conserves_mass(fills, data):
    n = len(fills)
    state = CupState.from_fills(fills)
    cfg = GameConfig(n, skip_budget=0)
    for _ in range(5):
        p = data.draw(st.integers(1, n))
        cups = data.draw(st.lists(st.integers(0, n - 1), unique=True, max_size=n))
        amounts = {c: data.draw(st.fractions(0, 1, max_denominator=9)) for c in cups}
        while sum(amounts.values()) > p:
            amounts.popitem()
        before = state.mass()
        inter = apply_fill(state, FillMove(amounts, p))
        state = apply_empty(inter, greedy_select(inter, p), cfg)
        assert state.mass() == before + sum(amounts.values()) - p


@given(st.lists(st.fractions(-3, 3, max_denominator=6), min_size=2, max_size=6), st.integers(0, 2**16))
def test_standard_mass_excess_equals_zeroed_depth(fills, seed):
    """Standard-fill minus negative-fill mass equals the depth lost to zeroing, on a shared move log."""
    n = len(fills)
    fills = [abs(x) for x in fills]
    start = CupState.from_fills(fills)
    cfg_std = GameConfig(n, Semantics.STANDARD, seed=seed)
    res = run_game(cfg_std, build_filler("random", n), build_emptier("uniform"), 12,
                   initial=start, record_moves=True, keep_trace=False)
    neg = replay(GameConfig(n), res.moves, start)
    std = replay(cfg_std, res.moves, start)
    depth = F(0)
    for s, (fill, em) in zip(std, res.moves):
        inter = apply_fill(s, fill)
        depth += sum(max(F(0), 1 - inter.fill(c)) for c in em.cups)
    assert std[-1].mass() - neg[-1].mass() == depth
    assert std[-1] == res.final


@settings(max_examples=30)
@given(st.integers(1, 3), st.integers(0, 2**16))
def test_scripted_replay(p, seed):
    moves = [FillMove({0: F(1, 2), 1: F(1, 2)}, p)] * 4
    cfg = GameConfig(3, seed=seed)
    res = run_game(cfg, ScriptedFiller(moves), build_emptier("uniform"), 10, record_moves=True,
                   record_states=True)
    assert replay(cfg, res.moves) == res.states
    assert res.strategy_finished and res.final.round == 4
