"""Signal observation hand abstraction for hold'em-style games."""

from .abstraction import (
    AbstractionMap,
    build_ehs,
    build_froi,
    build_kroi,
    build_li,
    build_map,
    build_paaemd,
    build_paoi,
    check_refinement,
)
from .evaluator import ExploitabilityReport, GameValue, exploitability, game_value, run_asymmetric, run_symmetric
from .games import GAMES, GameSpec, get_game
from .solver import AbstractedGame, AbstractionProfile, CFRSolver, StrategyProfile, cfr_solve, lift_strategy

__all__ = [
    'AbstractionMap',
    'build_li',
    'build_paoi',
    'build_kroi',
    'build_froi',
    'build_ehs',
    'build_paaemd',
    'build_map',
    'check_refinement',
    'GAMES',
    'GameSpec',
    'get_game',
    'AbstractionProfile',
    'AbstractedGame',
    'CFRSolver',
    'StrategyProfile',
    'cfr_solve',
    'lift_strategy',
    'ExploitabilityReport',
    'exploitability',
    'GameValue',
    'game_value',
    'run_symmetric',
    'run_asymmetric',
]
