"""Minority game simulator with multifractal time-series analysis."""

__version__ = "0.1.0"

from .engine import ConfigError, Game, GameConfig, MarketSeries, build_game, run

__all__ = [
    "ConfigError",
    "Game",
    "GameConfig",
    "MarketSeries",
    "build_game",
    "run",
    "__version__",
]
