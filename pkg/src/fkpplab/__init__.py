"""Numerical laboratory for a coupled pulled-front invasion model.

Two reaction-diffusion fields: an autonomous invader v following the classic
logistic front equation, and a follower w whose growth is suppressed by both
populations.  The package solves the coupled system, relaxes the invader's
travelling wave, prices w through a stochastic path representation, provides
exact and asymptotic laws for the Brownian bridge functionals that control
the follower's spreading speed, and exposes the closed-form speed theory.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConstraintError,
    ConvergenceError,
    DomainError,
    FitError,
    FkppError,
    FrontLostError,
    NumericalBlowupError,
    RescalingError,
)
from .model import (
    FieldState,
    Fixpoint,
    Grid,
    PhysicalParams,
    ScaledParams,
    fixpoints,
    initial_state,
    reaction_rhs,
    rescale,
)

__all__ = [
    "__version__",
    "ConfigError",
    "ConstraintError",
    "ConvergenceError",
    "DomainError",
    "FitError",
    "FkppError",
    "FrontLostError",
    "NumericalBlowupError",
    "RescalingError",
    "FieldState",
    "Fixpoint",
    "Grid",
    "PhysicalParams",
    "ScaledParams",
    "fixpoints",
    "initial_state",
    "reaction_rhs",
    "rescale",
]
