"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class BecSimError(Exception):
    """Base class for all simulator errors."""


class InvalidCutoffError(BecSimError, ValueError):
    pass


class MissingModeError(BecSimError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class DomainError(BecSimError, ValueError):
    pass


class ConfigurationError(BecSimError, ValueError):
    """Invalid or inconsistent configuration.

    ``field`` names the offending config entry (dotted path) when known.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class InvalidLevelsError(BecSimError, ValueError):
    pass


class DegenerateEnvelopeError(BecSimError, ValueError):
    pass


class DimensionError(BecSimError, ValueError):
    pass


class DivergenceError(BecSimError, ArithmeticError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class NonPhysicalStateError(BecSimError, ValueError):
    def __init__(self, message: str, value: float):
        super().__init__(message)
        self.value = value


class UndefinedConditionalError(BecSimError, ValueError):
    pass


class ChannelFileError(BecSimError, OSError):
    pass


class ConfigFileError(BecSimError, OSError):
    """Config file missing or unreadable."""


class CoarseStepWarning(RuntimeWarning):
    """Emitted when ||H|| * dt suggests the fixed step is too coarse."""
