"""Simulation engine and strategy library for the variable-processor cup game."""
from .core import (
    BudgetExceeded,
    ConfigError,
    CupState,
    DuplicateCup,
    EmptyMove,
    EmptySet,
    FillMove,
    GameConfig,
    GameError,
    GameResult,
    InvalidFill,
    NonTermination,
    Phase,
    PhaseError,
    RoundTrace,
    Semantics,
    apply_empty,
    apply_fill,
    metrics,
)
from .emptiers import EmptierStrategy, check_delta_greedy, greedy_select
from .engine import RoundRecord, replay, run_game
from .guarantees import StrategyGuarantee

__all__ = [
    "BudgetExceeded", "ConfigError", "CupState", "DuplicateCup", "EmptyMove", "EmptySet",
    "FillMove", "GameConfig", "GameError", "GameResult", "InvalidFill", "NonTermination",
    "Phase", "PhaseError", "RoundTrace", "Semantics", "apply_empty", "apply_fill", "metrics",
    "EmptierStrategy", "check_delta_greedy", "greedy_select", "RoundRecord", "replay",
    "run_game", "StrategyGuarantee",
]
