"""Exception taxonomy shared by all modules.

Config/parameter problems and numerical failures are kept apart because the
command line maps them to different exit codes (2 and 3 respectively).
"""

from __future__ import annotations


class FkppError(Exception):
    """Base class for all package errors."""


class ConstraintError(FkppError):
    """A model parameter violates an admissibility inequality."""


class ConfigError(FkppError):
    """Bad configuration input (unknown key, unparsable line, missing value)."""


class DomainError(FkppError):
    """Argument outside the domain of a closed-form law."""


class NumericalBlowupError(FkppError):
    """NaN/Inf detected during time stepping."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


class FrontLostError(FkppError):
    """A tracked level crossing left the window (window misconfiguration)."""


class ConvergenceError(FkppError):
    """Iteration failed to reach tolerance; carries the last residual."""

    def __init__(self, message: str, last_residual: float | None = None):
        super().__init__(message)
        self.last_residual = last_residual


class FitError(FkppError):
    """Speed fit could not be performed (window too small, bad values)."""


class RescalingError(FkppError):
    """Monte Carlo weight overflowed; advise log-domain estimation."""
