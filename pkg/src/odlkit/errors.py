"""Exception hierarchy shared by every odlkit module."""

from __future__ import annotations


class OdlError(Exception):
    """Base class for all odlkit errors."""


class InvalidInputError(OdlError, ValueError):
    """An argument violates a documented precondition."""


class ConfigurationError(OdlError, ValueError):
    """Model or detector configuration is inconsistent."""


class ModeError(OdlError, RuntimeError):
    """Operation is not permitted in the ensemble's current mode."""


class StateError(OdlError, RuntimeError):
    """Object is not in a usable state (e.g. not initialized)."""


class FormatError(OdlError, ValueError):
    """A file or record does not follow the expected layout."""


class InfeasibleWorkloadError(OdlError, ValueError):
    """Requested workload does not fit into one hour of device time."""


class NumericalFailureError(OdlError, ArithmeticError):
    """A non-finite value appeared during an update."""

    def __init__(self, message: str, step: int | None = None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class DatasetIOError(OdlError, OSError):
    """Dataset files are missing, unreadable, or empty."""
