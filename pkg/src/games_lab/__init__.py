"""Numerical laboratory for two-player one-round games and their parallel repetition.

Modules:
    qit: density operators and information-theoretic functionals (log base 2).
    multireg: pure states over named registers.
    games: games, products and exact classical values.
    strategies: entangled strategies and the see-saw lower bound.
    repetition: conditioned states of ``G^k`` and the single-coordinate embedding.
    harness: seeded randomised checks of the toolkit.
"""

from .exceptions import (
    BudgetExceededError,
    DimensionMismatchError,
    GameFormatError,
    GamesLabError,
    InvalidStateError,
    NonProductDistributionError,
    UnsupportedArityError,
    ZeroProbabilityError,
)
from .games import Game, chsh, classical_value, load_game, product_game
from .qit import DensityOperator, fidelity, relative_entropy, trace_norm_distance, uhlmann_unitary
from .strategies import EntangledStrategy, evaluate, product_strategy, seesaw, tsirelson_chsh

__version__ = "0.1.0"

__all__ = [
    "BudgetExceededError",
    "DensityOperator",
    "DimensionMismatchError",
    "EntangledStrategy",
    "Game",
    "GameFormatError",
    "GamesLabError",
    "InvalidStateError",
    "NonProductDistributionError",
    "UnsupportedArityError",
    "ZeroProbabilityError",
    "chsh",
    "classical_value",
    "evaluate",
    "fidelity",
    "load_game",
    "product_game",
    "product_strategy",
    "relative_entropy",
    "seesaw",
    "trace_norm_distance",
    "tsirelson_chsh",
    "uhlmann_unitary",
]
