"""Dynamic two-bloc game of recognized but low-capacity statehood."""

from .model import (
    Action,
    Economy,
    EliteParams,
    ExogenousEnv,
    ModelDomainError,
    ModelParams,
    PolityState,
    ProductivitySpec,
    Regime,
    regime_of,
)

__all__ = [
    "Action", "Economy", "EliteParams", "ExogenousEnv", "ModelDomainError",
    "ModelParams", "PolityState", "ProductivitySpec", "Regime", "regime_of",
]

__version__ = "0.1.0"
