#!/usr/bin/env python3
"""
QBM Lab - Error Types
=====================

Every contract violation raised by the laboratory derives from ``QBMError``
so the command-line front end can map it to exit code 1 in one place.
Failed verification verdicts are NOT exceptions; they travel as data.
"""

from typing import List, Optional, Tuple


class QBMError(Exception):
    """Base class for all laboratory errors."""


class InvalidParameterError(QBMError, ValueError):
    """A numeric parameter is outside its admissible range."""


class DomainError(QBMError, ValueError):
    """Evaluation requested outside a declared domain or grid."""

    def __init__(self, message: str, location: Optional[float] = None):
        super().__init__(message)
        self.location = location


class NotConstantError(QBMError):
    """An operation that needs constant coefficients received time-dependent ones."""


class OverdampedRegimeError(QBMError):
    """4p - m*q^2 <= 0: the oscillatory generators do not exist."""


class InvalidGridError(QBMError, ValueError):
    """Grid bounds, sizes or shapes are inconsistent."""


class StepSizeError(QBMError):
    """The requested time step violates the explicit stability bound."""

    def __init__(self, message: str, admissible_dt: float):
        super().__init__(message)
        self.admissible_dt = admissible_dt


class BlowUpError(QBMError):
    """A non-finite value appeared during time stepping."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class InvalidTrajectoryError(QBMError):
    """Snapshots are unordered, too few, on mixed grids or unevenly spaced."""


class CoverageError(QBMError):
    """Pulled-back or mapped coordinates leave the sampled region."""

    def __init__(self, message: str, required: Tuple[float, float]):
        super().__init__(message)
        self.required = required


class DegenerateReductionError(QBMError):
    """The invariant variable is undefined (lambda = q or no admissible slope)."""


class IllPosedError(QBMError):
    """Negative diffusion encountered: the reduced problem runs backwards."""


class MonotonicityError(QBMError):
    """A time rescaling requires S > 0 on the whole interval."""


class InvalidMapError(QBMError):
    """The Schrödinger map needs a positive diffusion constant under the root."""


class DegenerateMapError(QBMError):
    """lambda + q = 0: the complex time of the Schrödinger map is undefined."""


class SingularEvaluationError(QBMError):
    """A closed-form wave family was evaluated at its focal singularity."""


class SingularityError(QBMError):
    """rho fell below its floor while integrating the Ermakov-Pinney equation."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class AccuracyError(QBMError):
    """A monitored invariant drifted beyond tolerance (step too large)."""


class FieldParseError(QBMError):
    """Malformed field file."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ConfigError(QBMError):
    """Run configuration is invalid; carries every violation found."""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.violations))
