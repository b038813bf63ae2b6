"""Exception types raised by the simulation and analysis routines."""


class FLKSError(Exception):
    """Base class for all package errors."""


class DomainError(FLKSError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class PositivityError(FLKSError, RuntimeError):
    """A field lost positivity during time integration.

    ``step`` holds the index of the offending time step when known.
    """

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class FrontNotFound(FLKSError, ValueError):
    """No downward threshold crossing exists in the profile."""


class NoRootError(FLKSError, ValueError):
    """A root bracket did not contain a sign change."""


class ConfigError(FLKSError, ValueError):
    """Invalid configuration. ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
