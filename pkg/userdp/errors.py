"""Exceptions raised by userdp.

Every error a caller can act on derives from ``UserDPError``; the concrete
classes also derive from the closest builtin so generic ``except ValueError``
handlers keep working.
"""

from typing import Any, Dict, Optional


class UserDPError(Exception):
    pass


class InvalidArgumentError(UserDPError, ValueError):
    pass


class UnsupportedError(UserDPError, ValueError):
    pass


class StateViolationError(UserDPError, RuntimeError):
    pass


class ConvergenceError(UserDPError, RuntimeError):
    """Iteration budget exhausted; ``result`` holds the best iterate found."""

    def __init__(self, message: str, result: Any = None):
        super().__init__(message)
        self.result = result


class InfeasibleConfigurationError(UserDPError, ValueError):
    def __init__(self, message: str, required: Optional[float] = None):
        super().__init__(message)
        self.required = required


class ConstructionError(UserDPError, RuntimeError):
    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UsageError(UserDPError, ValueError):
    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class InvariantViolationError(UserDPError, RuntimeError):
    pass
