"""Static-wall Fermi acceleration: map, period-2 orbits, normal forms, arithmetic windows and Cantor trees."""
from .core import (
    DomainError,
    DomainExit,
    PhasePoint,
    Regime,
    ResolutionError,
    SystemParams,
    VerificationError,
    classify_regime,
    differential,
    iterate,
    reversor,
    step,
    step_inverse,
)

__all__ = [
    "DomainError",
    "DomainExit",
    "PhasePoint",
    "Regime",
    "ResolutionError",
    "SystemParams",
    "VerificationError",
    "classify_regime",
    "differential",
    "iterate",
    "reversor",
    "step",
    "step_inverse",
]
