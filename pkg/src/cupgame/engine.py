"""The round loop: fill, empty, observe, repeat.

Each round the engine draws one move from the filler's generator, applies
it, asks the emptier for its selection, applies that, and hands a
:class:`RoundRecord` to every attached monitor. Adaptive fillers see the
new state and the emptier's move before producing their next move;
oblivious fillers see neither.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from . import rng as rngmod
from .core import (
    CupState,
    EmptyMove,
    FillMove,
    GameConfig,
    GameResult,
    RoundTrace,
    apply_empty,
    apply_fill,
    zeroed_out,
)
from .fillers.base import AdaptiveContext, FillerStrategy, ObliviousContext


@dataclass(frozen=True)
class RoundRecord:
    cfg: GameConfig
    prev: CupState  # start of the round
    fill: FillMove
    inter: CupState  # after filling
    empty: EmptyMove
    new: CupState  # start of the next round
    anchors: tuple  # anchor sets live while the fill move was produced
    neglect: bool


def make_context(cfg: GameConfig, filler: FillerStrategy, state: CupState, trial: int):
    rng = rngmod.stream(cfg.seed, trial, rngmod.FILLER)
    if filler.adaptive:
        return AdaptiveContext(cfg.n, cfg.n, rng, state=state)
    return ObliviousContext(cfg.n, cfg.n, rng)


def run_game(
    cfg: GameConfig,
    filler: FillerStrategy,
    emptier,
    rounds: int,
    monitors: Sequence = (),
    initial: Optional[CupState] = None,
    trial: int = 0,
    record_moves: bool = False,
    record_states: bool = False,
    keep_trace: bool = True,
    strict: bool = True,
    cups: Optional[list] = None,
) -> GameResult:
    """Play up to ``rounds`` rounds of ``filler`` against ``emptier``.

    The game stops early when the filler's generator returns (its return
    value becomes ``result.outcome``) or, with ``strict``, when a monitor
    reports a violation. ``cups`` restricts the filler to a subset of cups.
    """
    state = initial if initial is not None else CupState.empty(cfg.n, cfg.exact)
    if state.n != cfg.n:
        raise ValueError(f"initial state has {state.n} cups, config says {cfg.n}")
    if state.exact != cfg.exact:
        raise ValueError("initial state arithmetic does not match the config")
    ctx = make_context(cfg, filler, state, trial)
    emp_rng = rngmod.stream(cfg.seed, trial, rngmod.EMPTIER)
    for m in monitors:
        m.start(state, cfg)

    trace = []
    moves = [] if record_moves else None
    states = [state] if record_states else None
    anchor_log = [] if record_moves else None
    outcome = None
    finished = False
    aborted = None
    peak, peak_scale = max(state.raw), state.scale

    gen = filler.play(ctx, list(range(cfg.n)) if cups is None else list(cups))
    try:
        for t in range(rounds):
            try:
                move = next(gen) if t == 0 else gen.send(None)
            except StopIteration as stop:
                outcome = stop.value
                finished = True
                break
            anchors = tuple(tuple(a) for a in ctx.anchors)
            inter = apply_fill(state, move)
            em = emptier.select(inter, emp_rng, cfg)
            new = apply_empty(inter, em, cfg)
            if anchors:
                emptied = set(em.cups)
                neglect = any(c not in emptied for a in anchors for c in a)
            else:
                neglect = False
            if new.scale != peak_scale:
                peak *= new.scale // peak_scale
                peak_scale = new.scale
            top = max(new.raw)
            if top > peak:
                peak = top
            if keep_trace:
                trace.append(RoundTrace(
                    new.round, move.p, new.backlog, new.anti_backlog, new.mass(),
                    new.fill_range, zeroed_out(inter, em, cfg), neglect,
                ))
            if record_moves:
                moves.append((move, em))
                anchor_log.append(anchors)
            if record_states:
                states.append(new)
            if monitors:
                rec = RoundRecord(cfg, state, move, inter, em, new, anchors, neglect)
                for m in monitors:
                    if m.on_round(rec) and strict and m.aborts:
                        aborted = m.name
                if aborted:
                    state = new
                    break
            state = new
            ctx.round = state.round
            if filler.adaptive:
                ctx.state = state
                ctx.last_empty = em
    finally:
        gen.close()

    result = GameResult(
        final=state,
        trace=trace,
        outcome=outcome,
        verdicts=[m.verdict() for m in monitors],
        moves=moves,
        anchors=anchor_log,
        states=states,
        aborted_by=aborted,
        strategy_finished=finished,
        peak_backlog=state._val(peak),
    )
    return result


def play_to_completion(cfg, filler, emptier, cap: int, **kw) -> GameResult:
    """Run until the filler's generator returns; raise if ``cap`` rounds are not enough."""
    res = run_game(cfg, filler, emptier, cap + 1, **kw)
    if not res.strategy_finished and res.aborted_by is None:
        raise RuntimeError(f"{filler.describe()} still running after {cap} rounds")
    return res


def replay(cfg: GameConfig, moves: Iterable, initial: Optional[CupState] = None) -> list:
    """Re-apply a recorded ``(FillMove, EmptyMove)`` log; returns every start state."""
    state = initial if initial is not None else CupState.empty(cfg.n, cfg.exact)
    out = [state]
    for fill, em in moves:
        state = apply_empty(apply_fill(state, fill), em, cfg)
        out.append(state)
    return out
