"""
Custom Exception Hierarchy for hestonam

Provides specific exceptions for different failure modes,
enabling appropriate error messages and CLI exit statuses.
"""

from typing import Optional, Sequence


class HestonAmError(Exception):
    """Base exception for all hestonam errors."""

    exit_code = 3

    def __init__(self, message: str, details: str = "", recoverable: bool = False):
        self.message = message
        self.details = details
        self.recoverable = recoverable
        super().__init__(message)

    def user_message(self) -> str:
        """Format error for display to user."""
        if self.details:
            return f"{self.message}\n  Details: {self.details}"
        return self.message


# Configuration Errors
class ConfigurationError(HestonAmError):
    """Configuration is invalid."""

    exit_code = 2


class InvalidConfigError(ConfigurationError):
    """One or more configuration keys failed validation."""

    def __init__(self, fields: Sequence[tuple[str, str]], source: Optional[str] = None):
        self.fields = list(fields)
        where = f" in {source}" if source else ""
        keys = ", ".join(key for key, _ in self.fields)
        details = "\n  ".join(f"{key}: {reason}" for key, reason in self.fields)
        super().__init__(
            message=f"Invalid configuration{where}: {keys}",
            details=details,
        )


# Numerical Errors
class NumericalError(HestonAmError):
    """Base class for numerical failures."""

    exit_code = 3


class PathBlowUpError(NumericalError):
    """A simulated price left the finite positive range."""

    def __init__(self, path_index: int, step: int, value: float):
        self.path_index = path_index
        self.step = step
        super().__init__(
            message=f"Simulated price became {value!r} on path {path_index} at step {step}",
            details="The time step is too coarse for these parameters; increase sim.n_steps",
        )


class CharacteristicFunctionError(NumericalError):
    """The affine characteristic function produced a non-finite value."""

    def __init__(self, phi: complex, psi: float, tau: float):
        self.phi = phi
        self.psi = psi
        self.tau = tau
        super().__init__(
            message=f"Characteristic function overflow at phi={phi}, psi={psi}, tau={tau}",
            details="Reduce quad.phi_max",
            recoverable=True,
        )


class QuadratureError(NumericalError):
    """Fourier inversion could not be evaluated on any admissible grid."""
    pass


class RegressionError(NumericalError):
    """Every exercise date produced a degenerate continuation regression."""
    pass


class NoExerciseRegionError(HestonAmError):
    """No exercise boundary could be extracted; the option behaves as European."""

    exit_code = 4

    def __init__(self, message: str = "no exercise region found", details: str = ""):
        super().__init__(
            message=message,
            details=details or (
                "Early exercise is never optimal for these inputs (e.g. a call with q = 0); "
                "price the option as European"
            ),
        )


# Storage Errors
class StoreError(HestonAmError):
    """Boundary store operation failed."""

    exit_code = 3
